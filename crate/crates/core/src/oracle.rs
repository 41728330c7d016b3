//! Reference evaluator: the original subquery, one row at a time.
//!
//! Shares nothing with the block executor beyond the table and expression
//! types. For every outer row the full inner multiset is rebuilt by walking
//! every inner row, then the set predicate is decided over it.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::exec::SetPredicateOp;
use crate::expr::{unqualified, ArithOp, Expr};
use crate::exec::Connective;
use crate::planner::{Catalog, SubqueryQuery};
use crate::types::{ColumnTable, Position, Scalar};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleResult {
    pub positions: Vec<Position>,
    pub rows: Vec<Vec<Scalar>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Scalar(Scalar),
    Bool(bool),
}

struct Rows<'a> {
    inner: &'a ColumnTable,
    inner_row: usize,
    outer: &'a ColumnTable,
    outer_row: usize,
}

fn lookup(table: &ColumnTable, name: &str, row: usize) -> Result<Scalar> {
    let name = unqualified(name);
    for column in table.columns() {
        if column.name == name {
            return Ok(column.data.get(row));
        }
    }
    Err(Error::Schema(format!("no column `{name}` in `{}`", table.name())))
}

fn eval(expr: &Expr, at: &Rows) -> Result<Value> {
    Ok(match expr {
        Expr::Column(c) => Value::Scalar(lookup(at.inner, c, at.inner_row)?),
        Expr::Param(p) => Value::Scalar(lookup(at.outer, p, at.outer_row)?),
        Expr::Literal(s) => Value::Scalar(s.clone()),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Arith(op, l, r) => {
            let (l, r) = (scalar(eval(l, at)?)?, scalar(eval(r, at)?)?);
            Value::Scalar(match (l, r) {
                (Scalar::Int(a), Scalar::Int(b)) => Scalar::Int(match op {
                    ArithOp::Add => a.wrapping_add(b),
                    ArithOp::Sub => a.wrapping_sub(b),
                    ArithOp::Mul => a.wrapping_mul(b),
                }),
                (Scalar::Float(a), Scalar::Float(b)) => Scalar::Float(match op {
                    ArithOp::Add => a + b,
                    ArithOp::Sub => a - b,
                    ArithOp::Mul => a * b,
                }),
                (a, b) => {
                    return Err(Error::Type(format!("cannot combine {a} and {b}")));
                }
            })
        }
        Expr::Cmp(op, l, r) => {
            let (l, r) = (scalar(eval(l, at)?)?, scalar(eval(r, at)?)?);
            Value::Bool(op.holds(l.try_cmp(&r)?))
        }
        Expr::And(l, r) => {
            let l = boolean(eval(l, at)?)?;
            let r = boolean(eval(r, at)?)?;
            Value::Bool(l && r)
        }
        Expr::Or(l, r) => {
            let l = boolean(eval(l, at)?)?;
            let r = boolean(eval(r, at)?)?;
            Value::Bool(l || r)
        }
        Expr::Not(e) => Value::Bool(!boolean(eval(e, at)?)?),
    })
}

fn scalar(v: Value) -> Result<Scalar> {
    match v {
        Value::Scalar(s) => Ok(s),
        Value::Bool(_) => Err(Error::Type("expected a value, found a boolean".into())),
    }
}

fn boolean(v: Value) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(b),
        Value::Scalar(s) => Err(Error::Type(format!("expected a boolean, found {s}"))),
    }
}

fn decide(op: SetPredicateOp, probe: &Scalar, values: &[Scalar]) -> Result<bool> {
    let mut witnesses = 0;
    for v in values {
        let ord = probe.try_cmp(v)?;
        let holds = match op {
            SetPredicateOp::In => ord == Ordering::Equal,
            SetPredicateOp::LtSome | SetPredicateOp::LtAll => ord == Ordering::Less,
            SetPredicateOp::GtSome | SetPredicateOp::GtAll => ord == Ordering::Greater,
        };
        if holds {
            witnesses += 1;
        }
    }
    Ok(match op {
        SetPredicateOp::In | SetPredicateOp::LtSome | SetPredicateOp::GtSome => witnesses > 0,
        SetPredicateOp::LtAll | SetPredicateOp::GtAll => witnesses == values.len(),
    })
}

/// Evaluates `q` exactly as written, with no rewrite, caching or early exit.
pub fn oracle_eval(q: &SubqueryQuery, catalog: &Catalog) -> Result<OracleResult> {
    let outer = catalog.get(&q.outer_table)?;
    let inner = catalog.get(&q.inner_table)?;
    let mut result = OracleResult::default();
    for o in 0..outer.row_count() {
        let mut values = Vec::new();
        for i in 0..inner.row_count() {
            let at = Rows {
                inner: &inner,
                inner_row: i,
                outer: &outer,
                outer_row: o,
            };
            let nc = boolean(eval(&q.nc, &at)?)?;
            let c = boolean(eval(&q.c, &at)?)?;
            let keep = match q.connective {
                Connective::And => nc && c,
                Connective::Or => nc || c,
            };
            if keep {
                values.push(scalar(eval(&q.inner_value, &at)?)?);
            }
        }
        // The probe only references outer columns; evaluate it with the outer
        // table in both roles.
        let probe_at = Rows {
            inner: &outer,
            inner_row: o,
            outer: &outer,
            outer_row: o,
        };
        let probe = scalar(eval(&q.probe, &probe_at)?)?;
        if decide(q.op, &probe, &values)? {
            result.positions.push(o as Position);
            let row = q
                .output_columns
                .iter()
                .map(|c| lookup(&outer, c, o))
                .collect::<Result<Vec<_>>>()?;
            result.rows.push(row);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Column, ColumnData};
    use std::sync::Arc;

    fn students_employees(employees: bool) -> Catalog {
        let students = ColumnTable::new(
            "students",
            vec![
                Column::new("name", ColumnData::Text(vec!["ann".into(), "bob".into(), "cid".into()])),
                Column::new("salary", ColumnData::Int(vec![100, 50, 300])),
            ],
        )
        .unwrap();
        let (names, deps, sal) = if employees {
            (
                vec!["ann".into(), "bob".into(), "cid".into()],
                vec!["Dep2".into(), "Dep1".into(), "Dep2".into()],
                vec![90, 500, 400],
            )
        } else {
            (vec![], vec![], vec![])
        };
        let employees = ColumnTable::new(
            "employees",
            vec![
                Column::new("name", ColumnData::Text(names)),
                Column::new("department", ColumnData::Text(deps)),
                Column::new("salary", ColumnData::Int(sal)),
            ],
        )
        .unwrap();
        let mut catalog = Catalog::new();
        catalog.insert(Arc::new(students));
        catalog.insert(Arc::new(employees));
        catalog
    }

    fn listing(op: SetPredicateOp) -> SubqueryQuery {
        SubqueryQuery {
            outer_table: "students".into(),
            output_columns: vec!["name".into(), "salary".into()],
            probe: Expr::col("S.name"),
            op,
            inner_table: "employees".into(),
            inner_value: Expr::col("E.name"),
            nc: Expr::parse("(= (col E.department) 'Dep1')").unwrap(),
            c: Expr::parse("(< (col E.salary) (corr S.salary))").unwrap(),
            connective: Connective::Or,
        }
    }

    #[test]
    fn hand_checked_instance() {
        // ann: employee ann has salary 90 < 100 -> passes via C.
        // bob: bob is in Dep1 -> passes via NC.
        // cid: employee cid earns 400 >= 300 and is in Dep2 -> fails.
        let out = oracle_eval(&listing(SetPredicateOp::In), &students_employees(true)).unwrap();
        assert_eq!(out.positions, vec![0, 1]);
        assert_eq!(
            out.rows,
            vec![
                vec![Scalar::Text("ann".into()), Scalar::Int(100)],
                vec![Scalar::Text("bob".into()), Scalar::Int(50)],
            ]
        );
    }

    #[test]
    fn empty_inner_some_is_false() {
        let mut q = listing(SetPredicateOp::LtSome);
        q.probe = Expr::col("salary");
        q.inner_value = Expr::col("salary");
        let out = oracle_eval(&q, &students_employees(false)).unwrap();
        assert!(out.positions.is_empty());
        q.op = SetPredicateOp::LtAll;
        let out = oracle_eval(&q, &students_employees(false)).unwrap();
        assert_eq!(out.positions, vec![0, 1, 2]);
    }
}
