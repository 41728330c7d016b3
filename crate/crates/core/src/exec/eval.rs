//! Block-at-a-time expression evaluation.
//!
//! Expressions are compiled against a table once (column names resolved to
//! indices, correlation parameters to binding slots) and then evaluated over
//! a slice of positions, producing one typed vector per node.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::expr::{unqualified, ArithOp, CmpOp, Expr, ExprType};
use crate::types::{float_cmp, ColumnData, ColumnTable, DataType, Position, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum Vector {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Text(Vec<String>),
    Bool(Vec<bool>),
}

impl Vector {
    pub fn len(&self) -> usize {
        match self {
            Vector::Int(v) => v.len(),
            Vector::Float(v) => v.len(),
            Vector::Text(v) => v.len(),
            Vector::Bool(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Element `i` as a scalar. Booleans have no scalar form.
    pub fn scalar(&self, i: usize) -> Option<Scalar> {
        match self {
            Vector::Int(v) => Some(Scalar::Int(v[i])),
            Vector::Float(v) => Some(Scalar::Float(v[i])),
            Vector::Text(v) => Some(Scalar::Text(v[i].clone())),
            Vector::Bool(_) => None,
        }
    }

    pub fn into_scalars(self) -> Result<Vec<Scalar>> {
        Ok(match self {
            Vector::Int(v) => v.into_iter().map(Scalar::Int).collect(),
            Vector::Float(v) => v.into_iter().map(Scalar::Float).collect(),
            Vector::Text(v) => v.into_iter().map(Scalar::Text).collect(),
            Vector::Bool(_) => {
                return Err(Error::Invariant("boolean vector has no scalar form".into()))
            }
        })
    }

    fn broadcast(value: &Scalar, n: usize) -> Vector {
        match value {
            Scalar::Int(v) => Vector::Int(vec![*v; n]),
            Scalar::Float(v) => Vector::Float(vec![*v; n]),
            Scalar::Text(v) => Vector::Text(vec![v.clone(); n]),
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Column(usize),
    Param(usize),
    Literal(Scalar),
    Bool(bool),
    Arith(ArithOp, Box<Node>, Box<Node>),
    Cmp(CmpOp, Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Not(Box<Node>),
}

/// An expression bound to one table's layout.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    root: Node,
    ty: ExprType,
    correlated: bool,
    slots: usize,
}

impl CompiledExpr {
    /// `slots` lists the outer column names that correlation parameters bind
    /// to; a binding passed to [`eval`](Self::eval) follows the same order.
    pub fn compile(
        expr: &Expr,
        table: &ColumnTable,
        outer: Option<&ColumnTable>,
        slots: &[String],
    ) -> Result<Self> {
        let ty = expr.type_check(table, outer)?;
        let root = lower(expr, table, slots)?;
        Ok(CompiledExpr {
            root,
            ty,
            correlated: expr.is_correlated(),
            slots: slots.len(),
        })
    }

    pub fn ty(&self) -> ExprType {
        self.ty
    }

    pub fn is_correlated(&self) -> bool {
        self.correlated
    }

    pub fn eval(&self, table: &ColumnTable, positions: &[Position], binding: &[Scalar]) -> Result<Vector> {
        if self.correlated && binding.len() < self.slots {
            return Err(Error::Execution(
                "correlated expression evaluated without a binding for every parameter".into(),
            ));
        }
        eval_node(&self.root, table, positions, binding)
    }

    /// Evaluates a boolean expression.
    pub fn eval_mask(&self, table: &ColumnTable, positions: &[Position], binding: &[Scalar]) -> Result<Vec<bool>> {
        match self.eval(table, positions, binding)? {
            Vector::Bool(mask) => Ok(mask),
            _ => Err(Error::Type("predicate does not evaluate to a boolean".into())),
        }
    }
}

fn lower(expr: &Expr, table: &ColumnTable, slots: &[String]) -> Result<Node> {
    Ok(match expr {
        Expr::Column(name) => Node::Column(table.column_index(unqualified(name))?),
        Expr::Param(name) => {
            let name = unqualified(name);
            let slot = slots.iter().position(|s| s == name).ok_or_else(|| {
                Error::Planning(format!("correlation parameter `{name}` has no binding slot"))
            })?;
            Node::Param(slot)
        }
        Expr::Literal(s) => Node::Literal(s.clone()),
        Expr::Bool(b) => Node::Bool(*b),
        Expr::Arith(op, l, r) => Node::Arith(
            *op,
            Box::new(lower(l, table, slots)?),
            Box::new(lower(r, table, slots)?),
        ),
        Expr::Cmp(op, l, r) => Node::Cmp(
            *op,
            Box::new(lower(l, table, slots)?),
            Box::new(lower(r, table, slots)?),
        ),
        Expr::And(l, r) => Node::And(
            Box::new(lower(l, table, slots)?),
            Box::new(lower(r, table, slots)?),
        ),
        Expr::Or(l, r) => Node::Or(
            Box::new(lower(l, table, slots)?),
            Box::new(lower(r, table, slots)?),
        ),
        Expr::Not(e) => Node::Not(Box::new(lower(e, table, slots)?)),
    })
}

fn constant<'a>(node: &'a Node, binding: &'a [Scalar]) -> Option<&'a Scalar> {
    match node {
        Node::Literal(s) => Some(s),
        Node::Param(slot) => binding.get(*slot),
        _ => None,
    }
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        other => other,
    }
}

fn mismatch() -> Error {
    Error::Invariant("operand types changed after type checking".into())
}

/// The first position when `positions` is a dense ascending run.
fn dense_start(positions: &[Position]) -> Option<usize> {
    let first = *positions.first()?;
    positions
        .windows(2)
        .all(|w| w[1] == w[0] + 1)
        .then_some(first as usize)
}

/// Values of `col` at `positions`, as a slice when they are dense.
fn visit<T, R>(col: &[T], positions: &[Position], f: impl Fn(&T) -> R) -> Vec<R> {
    match dense_start(positions) {
        Some(start) => col[start..start + positions.len()].iter().map(f).collect(),
        None => positions.iter().map(|&p| f(&col[p as usize])).collect(),
    }
}

/// `column <op> constant` without gathering the column first.
fn cmp_column_const(op: CmpOp, data: &ColumnData, positions: &[Position], k: &Scalar) -> Result<Vec<bool>> {
    Ok(match (data, k) {
        (ColumnData::Int(col), Scalar::Int(k)) => {
            let k = *k;
            match op {
                CmpOp::Eq => visit(col, positions, |&v| v == k),
                CmpOp::Lt => visit(col, positions, |&v| v < k),
                _ => visit(col, positions, |v| op.holds(v.cmp(&k))),
            }
        }
        (ColumnData::Float(col), Scalar::Float(k)) => {
            visit(col, positions, |&v| op.holds(float_cmp(v, *k)))
        }
        (ColumnData::Text(col), Scalar::Text(k)) => {
            visit(col, positions, |v| op.holds(v.as_bytes().cmp(k.as_bytes())))
        }
        _ => return Err(mismatch()),
    })
}

fn gather(data: &ColumnData, positions: &[Position]) -> Vector {
    match data {
        ColumnData::Int(col) => Vector::Int(visit(col, positions, |&v| v)),
        ColumnData::Float(col) => Vector::Float(visit(col, positions, |&v| v)),
        ColumnData::Text(col) => Vector::Text(visit(col, positions, Clone::clone)),
    }
}

fn eval_node(node: &Node, table: &ColumnTable, positions: &[Position], binding: &[Scalar]) -> Result<Vector> {
    let n = positions.len();
    match node {
        Node::Column(idx) => Ok(gather(&table.columns()[*idx].data, positions)),
        Node::Param(slot) => {
            let value = binding.get(*slot).ok_or_else(|| {
                Error::Execution(format!("correlation parameter slot {slot} is unbound"))
            })?;
            Ok(Vector::broadcast(value, n))
        }
        Node::Literal(s) => Ok(Vector::broadcast(s, n)),
        Node::Bool(b) => Ok(Vector::Bool(vec![*b; n])),
        Node::Arith(op, l, r) => {
            let (l, r) = (
                eval_node(l, table, positions, binding)?,
                eval_node(r, table, positions, binding)?,
            );
            match (l, r) {
                (Vector::Int(a), Vector::Int(b)) => Ok(Vector::Int(
                    a.iter()
                        .zip(&b)
                        .map(|(&x, &y)| match op {
                            ArithOp::Add => x.wrapping_add(y),
                            ArithOp::Sub => x.wrapping_sub(y),
                            ArithOp::Mul => x.wrapping_mul(y),
                        })
                        .collect(),
                )),
                (Vector::Float(a), Vector::Float(b)) => Ok(Vector::Float(
                    a.iter()
                        .zip(&b)
                        .map(|(&x, &y)| match op {
                            ArithOp::Add => x + y,
                            ArithOp::Sub => x - y,
                            ArithOp::Mul => x * y,
                        })
                        .collect(),
                )),
                _ => Err(mismatch()),
            }
        }
        Node::Cmp(op, l, r) => {
            if let (Node::Column(idx), Some(k)) = (l.as_ref(), constant(r, binding)) {
                return cmp_column_const(*op, &table.columns()[*idx].data, positions, k)
                    .map(Vector::Bool);
            }
            if let (Some(k), Node::Column(idx)) = (constant(l, binding), r.as_ref()) {
                return cmp_column_const(flip(*op), &table.columns()[*idx].data, positions, k)
                    .map(Vector::Bool);
            }
            let (l, r) = (
                eval_node(l, table, positions, binding)?,
                eval_node(r, table, positions, binding)?,
            );
            let mask: Vec<bool> = match (&l, &r) {
                (Vector::Int(a), Vector::Int(b)) => {
                    a.iter().zip(b).map(|(x, y)| op.holds(x.cmp(y))).collect()
                }
                (Vector::Float(a), Vector::Float(b)) => a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| op.holds(float_cmp(*x, *y)))
                    .collect(),
                (Vector::Text(a), Vector::Text(b)) => a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| op.holds(x.as_bytes().cmp(y.as_bytes())))
                    .collect(),
                _ => return Err(mismatch()),
            };
            Ok(Vector::Bool(mask))
        }
        Node::And(l, r) | Node::Or(l, r) => {
            let is_and = matches!(node, Node::And(..));
            let (l, r) = (
                eval_node(l, table, positions, binding)?,
                eval_node(r, table, positions, binding)?,
            );
            match (l, r) {
                (Vector::Bool(mut a), Vector::Bool(b)) => {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x = if is_and { *x && y } else { *x || y };
                    }
                    Ok(Vector::Bool(a))
                }
                _ => Err(mismatch()),
            }
        }
        Node::Not(e) => match eval_node(e, table, positions, binding)? {
            Vector::Bool(mut a) => {
                a.iter_mut().for_each(|x| *x = !*x);
                Ok(Vector::Bool(a))
            }
            _ => Err(mismatch()),
        },
    }
}

/// Ordering of a scalar against element `i` of a value vector.
pub(crate) fn cmp_scalar_elem(probe: &Scalar, values: &Vector, i: usize) -> Result<Ordering> {
    Ok(match (probe, values) {
        (Scalar::Int(a), Vector::Int(v)) => a.cmp(&v[i]),
        (Scalar::Float(a), Vector::Float(v)) => float_cmp(*a, v[i]),
        (Scalar::Text(a), Vector::Text(v)) => a.as_bytes().cmp(v[i].as_bytes()),
        _ => {
            return Err(Error::Type(format!(
                "probe of type {} compared with inner values of another type",
                probe.data_type()
            )))
        }
    })
}

pub(crate) fn value_type(ty: ExprType) -> Result<DataType> {
    match ty {
        ExprType::Value(t) => Ok(t),
        ExprType::Bool => Err(Error::Type("expected a value expression, got a predicate".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Column;

    fn table() -> ColumnTable {
        ColumnTable::new(
            "t",
            vec![
                Column::new("a", ColumnData::Int(vec![10, 20, 30, 40])),
                Column::new("f", ColumnData::Float(vec![0.5, 1.5, 2.5, 3.5])),
                Column::new("s", ColumnData::Text(vec!["x".into(), "y".into(), "x".into(), "z".into()])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluates_over_positions() {
        let t = table();
        let e = CompiledExpr::compile(&Expr::parse("(< (col a) 25)").unwrap(), &t, None, &[]).unwrap();
        assert_eq!(e.eval_mask(&t, &[0, 1, 2], &[]).unwrap(), vec![true, true, false]);

        let e = CompiledExpr::compile(&Expr::parse("(> 25 (col a))").unwrap(), &t, None, &[]).unwrap();
        assert_eq!(e.eval_mask(&t, &[1, 2], &[]).unwrap(), vec![true, false]);

        let v = CompiledExpr::compile(&Expr::parse("(* 2.0 (col f))").unwrap(), &t, None, &[]).unwrap();
        assert_eq!(v.eval(&t, &[3, 0], &[]).unwrap(), Vector::Float(vec![7.0, 1.0]));

        let s = CompiledExpr::compile(&Expr::parse("(not (= (col s) 'x'))").unwrap(), &t, None, &[]).unwrap();
        assert_eq!(s.eval_mask(&t, &[0, 1, 2, 3], &[]).unwrap(), vec![false, true, false, true]);
    }

    #[test]
    fn parameters_bind_by_slot() {
        let t = table();
        let outer = ColumnTable::new("o", vec![Column::new("k", ColumnData::Int(vec![0]))]).unwrap();
        let slots = vec!["k".to_string()];
        let e = CompiledExpr::compile(
            &Expr::parse("(or (= (col a) (corr k)) (= (+ (col a) (corr k)) 50))").unwrap(),
            &t,
            Some(&outer),
            &slots,
        )
        .unwrap();
        assert!(e.is_correlated());
        assert_eq!(
            e.eval_mask(&t, &[0, 1, 2, 3], &[Scalar::Int(20)]).unwrap(),
            vec![false, true, true, false]
        );
        assert!(matches!(e.eval(&t, &[0], &[]), Err(Error::Execution(_))));
    }
}
