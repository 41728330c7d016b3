//! Expression trees and their prefix-notation text form.
//!
//! Grammar (whitespace separated, one expression per string):
//!
//! ```text
//! expr   := literal | "(" head expr* ")"
//! head   := col NAME | corr NAME
//!         | + | - | *                       ; two or more operands, left fold
//!         | < | <= | = | != | >= | >        ; exactly two operands
//!         | and | or                        ; two or more operands, left fold
//!         | not                             ; one operand
//! literal:= integer | float (must contain `.` or an exponent) | 'text' | true | false
//! ```
//!
//! Text literals use single quotes; a quote inside is doubled (`'it''s'`).
//! `NAME` may be qualified (`L.quantity`); only the part after the last dot
//! is used to resolve the column. `corr` names a column of the outer row.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::types::{ColumnTable, DataType, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Ge => ord != Less,
            CmpOp::Gt => ord == Greater,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

impl ArithOp {
    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(String),
    /// Correlation parameter: bound to the named column of the current outer row.
    Param(String),
    Literal(Scalar),
    Bool(bool),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Value(DataType),
    Bool,
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprType::Value(t) => t.fmt(f),
            ExprType::Bool => f.write_str("bool"),
        }
    }
}

/// Strips a table qualifier: `L.quantity` -> `quantity`.
pub fn unqualified(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

impl Expr {
    pub fn col(name: impl Into<String>) -> Self {
        Expr::Column(name.into())
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expr::Param(name.into())
    }

    pub fn int(v: i64) -> Self {
        Expr::Literal(Scalar::Int(v))
    }

    pub fn float(v: f64) -> Self {
        Expr::Literal(Scalar::Float(v))
    }

    pub fn text(v: impl Into<String>) -> Self {
        Expr::Literal(Scalar::Text(v.into()))
    }

    pub fn cmp(op: CmpOp, l: Expr, r: Expr) -> Self {
        Expr::Cmp(op, Box::new(l), Box::new(r))
    }

    pub fn arith(op: ArithOp, l: Expr, r: Expr) -> Self {
        Expr::Arith(op, Box::new(l), Box::new(r))
    }

    pub fn and(l: Expr, r: Expr) -> Self {
        Expr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Expr, r: Expr) -> Self {
        Expr::Or(Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Expr::Not(Box::new(e))
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Column(_) | Expr::Param(_) | Expr::Literal(_) | Expr::Bool(_) => vec![],
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                vec![l, r]
            }
            Expr::Not(e) => vec![e],
        }
    }

    pub fn is_correlated(&self) -> bool {
        matches!(self, Expr::Param(_)) || self.children().into_iter().any(Expr::is_correlated)
    }

    /// Distinct correlation parameters (unqualified outer column names), sorted.
    pub fn params(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut BTreeSet<String>) {
            if let Expr::Param(name) = e {
                out.insert(unqualified(name).to_string());
            }
            for c in e.children() {
                walk(c, out);
            }
        }
        let mut out = BTreeSet::new();
        walk(self, &mut out);
        out.into_iter().collect()
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().into_iter().map(Expr::node_count).sum::<usize>()
    }

    /// Type of the expression when columns resolve against `table` and
    /// parameters against `outer`.
    pub fn type_check(&self, table: &ColumnTable, outer: Option<&ColumnTable>) -> Result<ExprType> {
        match self {
            Expr::Column(name) => {
                let col = table.column(unqualified(name))?;
                Ok(ExprType::Value(col.data.data_type()))
            }
            Expr::Param(name) => {
                let outer = outer.ok_or_else(|| {
                    Error::Planning(format!(
                        "correlation parameter `{name}` used without an outer binding context"
                    ))
                })?;
                Ok(ExprType::Value(outer.column(unqualified(name))?.data.data_type()))
            }
            Expr::Literal(s) => Ok(ExprType::Value(s.data_type())),
            Expr::Bool(_) => Ok(ExprType::Bool),
            Expr::Arith(op, l, r) => {
                let (lt, rt) = (l.type_check(table, outer)?, r.type_check(table, outer)?);
                match (lt, rt) {
                    (ExprType::Value(a), ExprType::Value(b))
                        if a == b && a != DataType::Text =>
                    {
                        Ok(ExprType::Value(a))
                    }
                    _ => Err(Error::Type(format!(
                        "`{}` needs two numeric operands of one type, got {lt} and {rt}",
                        op.symbol()
                    ))),
                }
            }
            Expr::Cmp(op, l, r) => {
                let (lt, rt) = (l.type_check(table, outer)?, r.type_check(table, outer)?);
                match (lt, rt) {
                    (ExprType::Value(a), ExprType::Value(b)) if a == b => Ok(ExprType::Bool),
                    _ => Err(Error::Type(format!(
                        "`{}` compares {lt} with {rt}",
                        op.symbol()
                    ))),
                }
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                for side in [l, r] {
                    let t = side.type_check(table, outer)?;
                    if t != ExprType::Bool {
                        return Err(Error::Type(format!("logical operand has type {t}")));
                    }
                }
                Ok(ExprType::Bool)
            }
            Expr::Not(e) => match e.type_check(table, outer)? {
                ExprType::Bool => Ok(ExprType::Bool),
                t => Err(Error::Type(format!("`not` applied to {t}"))),
            },
        }
    }

    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, at: 0 };
        let expr = parser.expr()?;
        if parser.at != parser.tokens.len() {
            return Err(Error::Parse(format!("trailing input in `{text}`")));
        }
        Ok(expr)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(n) => write!(f, "(col {n})"),
            Expr::Param(n) => write!(f, "(corr {n})"),
            Expr::Literal(Scalar::Int(v)) => write!(f, "{v}"),
            Expr::Literal(Scalar::Float(v)) => write!(f, "{v:?}"),
            Expr::Literal(Scalar::Text(v)) => write!(f, "'{}'", v.replace('\'', "''")),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Arith(op, l, r) => write!(f, "({} {l} {r})", op.symbol()),
            Expr::Cmp(op, l, r) => write!(f, "({} {l} {r})", op.symbol()),
            Expr::And(l, r) => write!(f, "(and {l} {r})"),
            Expr::Or(l, r) => write!(f, "(or {l} {r})"),
            Expr::Not(e) => write!(f, "(not {e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
    Text(String),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                out.push(Token::Open);
            }
            ')' => {
                chars.next();
                out.push(Token::Close);
            }
            '\'' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('\'') if chars.peek() == Some(&'\'') => {
                            chars.next();
                            s.push('\'');
                        }
                        Some('\'') => break,
                        Some(ch) => s.push(ch),
                        None => return Err(Error::Parse("unterminated text literal".into())),
                    }
                }
                out.push(Token::Text(s));
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || ch == '(' || ch == ')' || ch == '\'' {
                        break;
                    }
                    s.push(ch);
                    chars.next();
                }
                out.push(Token::Atom(s));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn next(&mut self) -> Result<Token> {
        let tok = self
            .tokens
            .get(self.at)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.at += 1;
        Ok(tok)
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.next()? {
            Token::Close => Err(Error::Parse("unexpected `)`".into())),
            Token::Text(s) => Ok(Expr::text(s)),
            Token::Atom(a) => literal(&a),
            Token::Open => {
                let head = match self.next()? {
                    Token::Atom(a) => a,
                    other => return Err(Error::Parse(format!("expected operator, got {other:?}"))),
                };
                let expr = match head.as_str() {
                    "col" | "corr" => {
                        let name = match self.next()? {
                            Token::Atom(a) if is_identifier(&a) => a,
                            other => {
                                return Err(Error::Parse(format!(
                                    "`{head}` expects a column name, got {other:?}"
                                )))
                            }
                        };
                        if head == "col" {
                            Expr::Column(name)
                        } else {
                            Expr::Param(name)
                        }
                    }
                    _ => {
                        let args = self.args()?;
                        build(&head, args)?
                    }
                };
                if head == "col" || head == "corr" {
                    match self.next()? {
                        Token::Close => {}
                        _ => return Err(Error::Parse(format!("`{head}` takes one name"))),
                    }
                }
                Ok(expr)
            }
        }
    }

    /// Operands up to and including the closing paren.
    fn args(&mut self) -> Result<Vec<Expr>> {
        let mut args = Vec::new();
        loop {
            if self.tokens.get(self.at) == Some(&Token::Close) {
                self.at += 1;
                return Ok(args);
            }
            args.push(self.expr()?);
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn literal(atom: &str) -> Result<Expr> {
    match atom {
        "true" => return Ok(Expr::Bool(true)),
        "false" => return Ok(Expr::Bool(false)),
        _ => {}
    }
    if let Ok(v) = atom.parse::<i64>() {
        return Ok(Expr::int(v));
    }
    if atom.contains(['.', 'e', 'E']) {
        if let Ok(v) = atom.parse::<f64>() {
            if v.is_finite() {
                return Ok(Expr::float(v));
            }
        }
    }
    Err(Error::Parse(format!("unknown token `{atom}`")))
}

fn build(head: &str, args: Vec<Expr>) -> Result<Expr> {
    let fold = |args: Vec<Expr>, f: &dyn Fn(Expr, Expr) -> Expr| -> Result<Expr> {
        if args.len() < 2 {
            return Err(Error::Parse(format!("`{head}` needs at least two operands")));
        }
        let mut it = args.into_iter();
        let first = it.next().unwrap();
        Ok(it.fold(first, f))
    };
    let binary = |op: CmpOp, args: Vec<Expr>| -> Result<Expr> {
        let [l, r]: [Expr; 2] = args
            .try_into()
            .map_err(|_| Error::Parse(format!("`{head}` takes exactly two operands")))?;
        Ok(Expr::cmp(op, l, r))
    };
    match head {
        "+" => fold(args, &|l, r| Expr::arith(ArithOp::Add, l, r)),
        "-" => fold(args, &|l, r| Expr::arith(ArithOp::Sub, l, r)),
        "*" => fold(args, &|l, r| Expr::arith(ArithOp::Mul, l, r)),
        "and" => fold(args, &Expr::and),
        "or" => fold(args, &Expr::or),
        "<" => binary(CmpOp::Lt, args),
        "<=" => binary(CmpOp::Le, args),
        "=" => binary(CmpOp::Eq, args),
        "!=" => binary(CmpOp::Ne, args),
        ">=" => binary(CmpOp::Ge, args),
        ">" => binary(CmpOp::Gt, args),
        "not" => {
            let [e]: [Expr; 1] = args
                .try_into()
                .map_err(|_| Error::Parse("`not` takes one operand".into()))?;
            Ok(Expr::not(e))
        }
        other => Err(Error::Parse(format!("unknown operator `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Column, ColumnData};
    use proptest::prelude::*;

    #[test]
    fn parses_listing_shapes() {
        let e = Expr::parse("(< (col salary) (corr S.salary))").unwrap();
        assert_eq!(
            e,
            Expr::cmp(CmpOp::Lt, Expr::col("salary"), Expr::param("S.salary"))
        );
        assert!(e.is_correlated());
        assert_eq!(e.params(), vec!["salary".to_string()]);

        let v = Expr::parse("(* 3.0 (col extendedprice) (col discount) (col tax))").unwrap();
        assert_eq!(v.node_count(), 7);
        assert!(!v.is_correlated());

        let nc = Expr::parse("(= (col department) 'Dep1')").unwrap();
        assert_eq!(
            nc,
            Expr::cmp(CmpOp::Eq, Expr::col("department"), Expr::text("Dep1"))
        );
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "(xor true false)",
            "(< 1)",
            "(col)",
            "(col a b)",
            "(not)",
            "foo",
            "(= 1 2",
            "(= 1 2))",
            "'open",
            "(col 3)",
            "nan",
        ] {
            assert!(matches!(Expr::parse(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn text_quotes_round_trip() {
        let e = Expr::text("it's");
        assert_eq!(e.to_string(), "'it''s'");
        assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn type_checking() {
        let inner = ColumnTable::new(
            "inner",
            vec![
                Column::new("a", ColumnData::Int(vec![1])),
                Column::new("f", ColumnData::Float(vec![1.0])),
            ],
        )
        .unwrap();
        let outer =
            ColumnTable::new("outer", vec![Column::new("k", ColumnData::Int(vec![1]))]).unwrap();
        let ok = Expr::parse("(and (< (col a) (corr k)) (> (col f) 0.5))").unwrap();
        assert_eq!(ok.type_check(&inner, Some(&outer)).unwrap(), ExprType::Bool);
        let mixed = Expr::parse("(< (col a) (col f))").unwrap();
        assert!(matches!(mixed.type_check(&inner, None), Err(Error::Type(_))));
        let unbound = Expr::parse("(< (col a) (corr k))").unwrap();
        assert!(matches!(
            unbound.type_check(&inner, None),
            Err(Error::Planning(_))
        ));
        let arith = Expr::parse("(* 3 (col f))").unwrap();
        assert!(matches!(arith.type_check(&inner, None), Err(Error::Type(_))));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            "[a-z][a-z0-9_]{0,5}".prop_map(Expr::col),
            "[a-z][a-z0-9_]{0,5}".prop_map(Expr::param),
            any::<i64>().prop_map(Expr::int),
            (-1e9f64..1e9).prop_map(Expr::float),
            "[ -~]{0,6}".prop_map(Expr::text),
            any::<bool>().prop_map(Expr::Bool),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::arith(ArithOp::Sub, l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::arith(ArithOp::Mul, l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::cmp(CmpOp::Le, l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::cmp(CmpOp::Ne, l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::or(l, r)),
                inner.prop_map(Expr::not),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            prop_assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
        }
    }
}
