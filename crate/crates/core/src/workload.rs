//! Query instances: the parameterised evaluation query and random small
//! instances of each class for equivalence testing.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exec::{Connective, SetPredicateOp};
use crate::expr::{ArithOp, CmpOp, Expr};
use crate::planner::{parse_query, Catalog, SubqueryQuery};
use crate::types::{Column, ColumnData, ColumnTable};

/// Placeholder substituted by [`instantiate`].
pub const X_PLACEHOLDER: &str = "${X}";

/// `part.retailprice <SOME (3 * extendedprice * discount * tax)` over
/// lineitem, where `suppkey = X OR part.size = quantity`.
pub const EVALUATION_QUERY: &str = r#"[outer]
table = "part"
output = ["partkey"]
probe = "(col P.retailprice)"

[subquery]
op = "lt_some"
table = "lineitem"
value = "(* 3.0 (col L.extendedprice) (col L.discount) (col L.tax))"
nc = "(= (col L.suppkey) ${X})"
c = "(= (corr P.size) (col L.quantity))"
connective = "or"
"#;

pub fn instantiate(template: &str, x: &str) -> String {
    template.replace(X_PLACEHOLDER, x)
}

pub fn evaluation_query(x: i64) -> SubqueryQuery {
    parse_query(&instantiate(EVALUATION_QUERY, &x.to_string()))
        .expect("built-in evaluation query parses")
}

/// A query over freshly generated tables `o` (outer) and `i` (inner).
#[derive(Debug, Clone)]
pub struct Instance {
    pub query: SubqueryQuery,
    pub catalog: Catalog,
}

/// Degenerate shapes forced into the random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeCase {
    None,
    EmptyInner,
    EmptyOuter,
    /// NC is `true`: every inner row passes it.
    NcAll,
    /// NC is `false`.
    NcNone,
}

impl EdgeCase {
    /// The edge case used for the `index`-th instance of a batch.
    pub fn for_index(index: usize) -> EdgeCase {
        match index % 10 {
            0 => EdgeCase::EmptyInner,
            1 => EdgeCase::NcAll,
            2 => EdgeCase::NcNone,
            3 => EdgeCase::EmptyOuter,
            _ => EdgeCase::None,
        }
    }
}

pub fn class_shape(class: u8) -> (SetPredicateOp, Connective) {
    match class {
        1 => (SetPredicateOp::In, Connective::And),
        2 => (SetPredicateOp::In, Connective::Or),
        3 => (SetPredicateOp::LtSome, Connective::And),
        4 => (SetPredicateOp::LtSome, Connective::Or),
        _ => panic!("query classes are 1..=4, got {class}"),
    }
}

fn cmp_op(rng: &mut ChaCha8Rng) -> CmpOp {
    *[CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt]
        .choose(rng)
        .unwrap()
}

fn int_column(rng: &mut ChaCha8Rng, n: usize, hi: i64) -> ColumnData {
    ColumnData::Int((0..n).map(|_| rng.random_range(0..hi)).collect())
}

/// A non-correlated predicate over inner columns `a` and `b`.
fn random_nc(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.5) {
        let column = if rng.random_bool(0.5) { "a" } else { "b" };
        let lhs = if rng.random_bool(0.2) {
            Expr::arith(ArithOp::Add, Expr::col("a"), Expr::col("b"))
        } else {
            Expr::col(column)
        };
        return Expr::cmp(cmp_op(rng), lhs, Expr::int(rng.random_range(0..10)));
    }
    match rng.random_range(0..3) {
        0 => Expr::and(random_nc(rng, depth - 1), random_nc(rng, depth - 1)),
        1 => Expr::or(random_nc(rng, depth - 1), random_nc(rng, depth - 1)),
        _ => Expr::not(random_nc(rng, depth - 1)),
    }
}

/// A correlated predicate; always references at least one outer column.
fn random_c(rng: &mut ChaCha8Rng) -> Expr {
    let key = Expr::cmp(
        if rng.random_bool(0.6) { CmpOp::Eq } else { cmp_op(rng) },
        Expr::col("k"),
        Expr::param("key"),
    );
    match rng.random_range(0..4) {
        0 => key,
        1 => Expr::and(key, random_nc(rng, 1)),
        2 => Expr::or(key, Expr::cmp(cmp_op(rng), Expr::col("b"), Expr::param("g"))),
        _ => Expr::cmp(
            cmp_op(rng),
            Expr::arith(ArithOp::Sub, Expr::col("a"), Expr::param("g")),
            Expr::int(rng.random_range(-3..4)),
        ),
    }
}

/// A random instance of `class` with at most 200 outer and 500 inner rows.
///
/// Probe and inner values are either small integers or floats on a half-unit
/// grid, so ties between probe and inner values are common.
pub fn random_instance(class: u8, seed: u64, edge: EdgeCase) -> Result<Instance> {
    let (op, connective) = class_shape(class);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outer_rows = if edge == EdgeCase::EmptyOuter { 0 } else { rng.random_range(1..=200) };
    let inner_rows = if edge == EdgeCase::EmptyInner { 0 } else { rng.random_range(1..=500) };
    let keys = rng.random_range(1..=12);
    let floats = rng.random_bool(0.3);
    let values = |rng: &mut ChaCha8Rng, n: usize| {
        if floats {
            ColumnData::Float((0..n).map(|_| rng.random_range(0..40) as f64 * 0.5).collect())
        } else {
            int_column(rng, n, 20)
        }
    };
    let outer = ColumnTable::new(
        "o",
        vec![
            Column::new("x", values(&mut rng, outer_rows)),
            Column::new("key", int_column(&mut rng, outer_rows, keys)),
            Column::new("g", int_column(&mut rng, outer_rows, 10)),
            Column::new("id", ColumnData::Int((0..outer_rows as i64).collect())),
        ],
    )?;
    let inner = ColumnTable::new(
        "i",
        vec![
            Column::new("v", values(&mut rng, inner_rows)),
            Column::new("a", int_column(&mut rng, inner_rows, 10)),
            Column::new("b", int_column(&mut rng, inner_rows, 10)),
            Column::new("k", int_column(&mut rng, inner_rows, keys)),
        ],
    )?;
    let (probe, inner_value) = match (floats, rng.random_range(0..3)) {
        (false, 0) => (
            Expr::arith(ArithOp::Add, Expr::col("x"), Expr::int(1)),
            Expr::arith(ArithOp::Add, Expr::col("v"), Expr::col("a")),
        ),
        (true, 0) => (
            Expr::col("x"),
            Expr::arith(ArithOp::Mul, Expr::col("v"), Expr::float(2.0)),
        ),
        _ => (Expr::col("x"), Expr::col("v")),
    };
    let nc = match edge {
        EdgeCase::NcAll => Expr::Bool(true),
        EdgeCase::NcNone => Expr::Bool(false),
        _ => random_nc(&mut rng, 2),
    };
    let c = random_c(&mut rng);
    let mut catalog = Catalog::new();
    catalog.insert(Arc::new(outer));
    catalog.insert(Arc::new(inner));
    Ok(Instance {
        query: SubqueryQuery {
            outer_table: "o".into(),
            output_columns: vec!["id".into(), "x".into()],
            probe,
            op,
            inner_table: "i".into(),
            inner_value,
            nc,
            c,
            connective,
        },
        catalog,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::classify;

    #[test]
    fn evaluation_query_is_class_4() {
        let q = evaluation_query(39);
        assert_eq!(classify(&q).unwrap(), 4);
        assert_eq!(q.nc, Expr::parse("(= (col L.suppkey) 39)").unwrap());
    }

    #[test]
    fn random_instances_validate() {
        for class in 1..=4 {
            for i in 0..50 {
                let inst = random_instance(class, i, EdgeCase::for_index(i as usize)).unwrap();
                inst.query.validate(&inst.catalog).unwrap();
                assert_eq!(classify(&inst.query).unwrap(), class);
            }
        }
    }
}
