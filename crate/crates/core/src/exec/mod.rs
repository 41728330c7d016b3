//! Pull-based, block-oriented operators.
//!
//! The positional part of a plan passes [`PositionBlock`]s between
//! [`PositionalOperator`]s; [`Materialize`] is the boundary where positions
//! are turned into value tuples. Every operator follows the same protocol:
//! `open`, then `next_block` until it returns `None` (and keeps returning
//! `None` afterwards), then `close`.
//!
//! [`Datasource`] never emits an empty block. Positional filters
//! ([`PosFilter`], the set operators, LP) emit exactly one block per input
//! block, which is empty when every position was filtered out; this keeps
//! slice numbers aligned for operators that split and re-join streams.

mod eval;
mod inner;
mod setop;

use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::Arc;

pub use eval::{CompiledExpr, Vector};
pub use inner::{InnerSource, InnerSubplan, ScanOutcome};
pub use setop::{
    set_predicate, CompoundCheck, Connective, CorrelatedProbe, Digest, ExecFlags, NcProbe,
    SetOpCorrelated, SetOpNonCorrelated, SetPredicateOp,
};


use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::types::{ColumnTable, Position, PositionBlock, Reader, Scalar};

pub trait PositionalOperator {
    fn open(&mut self) -> Result<()>;
    fn next_block(&mut self) -> Result<Option<PositionBlock>>;
    fn close(&mut self) {}
}

pub type BoxedOperator = Box<dyn PositionalOperator>;

/// Materialized rows together with the positions they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TupleBlock {
    pub positions: Vec<Position>,
    pub rows: Vec<Vec<Scalar>>,
}

pub trait TupleOperator {
    fn open(&mut self) -> Result<()>;
    fn next_tuples(&mut self) -> Result<Option<TupleBlock>>;
    fn close(&mut self) {}
}

/// Instrumentation shared by the operators of one plan instance.
#[derive(Debug, Default)]
pub struct Metrics {
    inner_invocations: Cell<u64>,
    inner_rows_scanned: Cell<u64>,
    correlated_rows_scanned: Cell<u64>,
    nc_digest_builds: Cell<u64>,
    memo_hits: Cell<u64>,
    emitted: RefCell<Vec<(String, Rc<Cell<u64>>)>>,
}

fn bump(cell: &Cell<u64>, by: u64) {
    cell.set(cell.get() + by);
}

impl Metrics {
    pub fn new() -> Rc<Self> {
        Rc::new(Metrics::default())
    }

    /// Registers a per-operator "positions emitted" counter.
    pub fn counter(&self, operator: &str) -> Rc<Cell<u64>> {
        let cell = Rc::new(Cell::new(0));
        self.emitted
            .borrow_mut()
            .push((operator.to_string(), cell.clone()));
        cell
    }

    pub(crate) fn record_invocation(&self, rows: u64) {
        bump(&self.inner_invocations, 1);
        bump(&self.inner_rows_scanned, rows);
        bump(&self.correlated_rows_scanned, rows);
    }

    pub(crate) fn record_digest_build(&self, rows: u64) {
        bump(&self.nc_digest_builds, 1);
        bump(&self.inner_rows_scanned, rows);
    }

    pub(crate) fn record_prefilter(&self, rows: u64) {
        bump(&self.inner_rows_scanned, rows);
    }

    pub(crate) fn record_memo_hit(&self) {
        bump(&self.memo_hits, 1);
    }

    pub fn snapshot(&self) -> ExecStats {
        ExecStats {
            inner_invocations: self.inner_invocations.get(),
            inner_rows_scanned: self.inner_rows_scanned.get(),
            correlated_rows_scanned: self.correlated_rows_scanned.get(),
            nc_digest_builds: self.nc_digest_builds.get(),
            memo_hits: self.memo_hits.get(),
            emitted: self
                .emitted
                .borrow()
                .iter()
                .map(|(name, c)| (name.clone(), c.get()))
                .collect(),
        }
    }
}

/// Counter values after (or during) a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecStats {
    /// Evaluations of a correlated inner subplan (memo hits excluded).
    pub inner_invocations: u64,
    /// Every inner row examined: digest builds, prefilters and correlated scans.
    pub inner_rows_scanned: u64,
    /// Inner rows examined by correlated evaluations only.
    pub correlated_rows_scanned: u64,
    pub nc_digest_builds: u64,
    pub memo_hits: u64,
    /// Positions emitted per operator, in registration order.
    pub emitted: Vec<(String, u64)>,
}

/// Emits ascending blocks covering every row of a table exactly once.
pub struct Datasource {
    table: Arc<ColumnTable>,
    name: Arc<str>,
    capacity: usize,
    next: usize,
    slice: u64,
    emitted: Option<Rc<Cell<u64>>>,
}

impl Datasource {
    pub fn new(table: Arc<ColumnTable>, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("block capacity must be at least 1".into()));
        }
        let name = Arc::from(table.name());
        Ok(Datasource {
            table,
            name,
            capacity,
            next: 0,
            slice: 0,
            emitted: None,
        })
    }

    pub fn with_metrics(mut self, metrics: &Metrics) -> Self {
        self.emitted = Some(metrics.counter("datasource"));
        self
    }
}

impl PositionalOperator for Datasource {
    fn open(&mut self) -> Result<()> {
        self.next = 0;
        self.slice = 0;
        Ok(())
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        let rows = self.table.row_count();
        if self.next >= rows {
            return Ok(None);
        }
        let end = (self.next + self.capacity).min(rows);
        let positions: Vec<Position> = (self.next as Position..end as Position).collect();
        self.next = end;
        let block = PositionBlock::new(self.name.clone(), positions, self.capacity, self.slice)?;
        self.slice += 1;
        if let Some(c) = &self.emitted {
            bump(c, block.len() as u64);
        }
        Ok(Some(block))
    }
}

/// Keeps the positions whose row satisfies a non-correlated predicate.
pub struct PosFilter {
    child: BoxedOperator,
    table: Arc<ColumnTable>,
    predicate: CompiledExpr,
    emitted: Option<Rc<Cell<u64>>>,
}

impl PosFilter {
    pub fn new(child: BoxedOperator, table: Arc<ColumnTable>, predicate: &Expr) -> Result<Self> {
        if predicate.is_correlated() {
            return Err(Error::Planning(format!(
                "positional filter predicate `{predicate}` is correlated"
            )));
        }
        let predicate = CompiledExpr::compile(predicate, &table, None, &[])?;
        if predicate.ty() != crate::expr::ExprType::Bool {
            return Err(Error::Type("filter predicate is not boolean".into()));
        }
        Ok(PosFilter {
            child,
            table,
            predicate,
            emitted: None,
        })
    }

    pub fn with_metrics(mut self, metrics: &Metrics) -> Self {
        self.emitted = Some(metrics.counter("pos_filter"));
        self
    }
}

impl PositionalOperator for PosFilter {
    fn open(&mut self) -> Result<()> {
        self.child.open()
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        let Some(block) = self.child.next_block()? else {
            return Ok(None);
        };
        check_table(&block, &self.table)?;
        let mask = self.predicate.eval_mask(&self.table, block.positions(), &[])?;
        let kept = select(block.positions(), &mask);
        if let Some(c) = &self.emitted {
            bump(c, kept.len() as u64);
        }
        Ok(Some(block.derive(kept)))
    }

    fn close(&mut self) {
        self.child.close()
    }
}

pub(crate) fn select(positions: &[Position], mask: &[bool]) -> Vec<Position> {
    positions
        .iter()
        .zip(mask)
        .filter_map(|(&p, &keep)| keep.then_some(p))
        .collect()
}

pub(crate) fn check_table(block: &PositionBlock, table: &ColumnTable) -> Result<()> {
    if block.table() != table.name() {
        return Err(Error::Schema(format!(
            "operator over `{}` received a block of `{}`",
            table.name(),
            block.table()
        )));
    }
    Ok(())
}

/// Converts positions into value tuples.
pub struct Materialize {
    child: BoxedOperator,
    readers: Vec<Reader>,
}

impl Materialize {
    pub fn new(child: BoxedOperator, readers: Vec<Reader>) -> Self {
        Materialize { child, readers }
    }
}

impl TupleOperator for Materialize {
    fn open(&mut self) -> Result<()> {
        self.child.open()
    }

    fn next_tuples(&mut self) -> Result<Option<TupleBlock>> {
        let Some(block) = self.child.next_block()? else {
            return Ok(None);
        };
        let columns = self
            .readers
            .iter()
            .map(|r| r.read(&block))
            .collect::<Result<Vec<_>>>()?;
        let rows = (0..block.len())
            .map(|i| columns.iter().map(|c| c[i].clone()).collect())
            .collect();
        Ok(Some(TupleBlock {
            positions: block.into_positions(),
            rows,
        }))
    }

    fn close(&mut self) {
        self.child.close()
    }
}

/// Drains a positional operator and returns every emitted position.
pub fn collect_positions(op: &mut dyn PositionalOperator) -> Result<Vec<Position>> {
    op.open()?;
    let mut out = Vec::new();
    while let Some(block) = op.next_block()? {
        out.extend_from_slice(block.positions());
    }
    op.close();
    Ok(out)
}

/// Drains a tuple operator.
pub fn collect_tuples(op: &mut dyn TupleOperator) -> Result<TupleBlock> {
    op.open()?;
    let mut out = TupleBlock::default();
    while let Some(block) = op.next_tuples()? {
        out.positions.extend(block.positions);
        out.rows.extend(block.rows);
    }
    op.close();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Column, ColumnData};
    use proptest::prelude::*;

    fn table(values: Vec<i64>) -> Arc<ColumnTable> {
        Arc::new(ColumnTable::new("t", vec![Column::new("col", ColumnData::Int(values))]).unwrap())
    }

    fn blocks(op: &mut dyn PositionalOperator) -> Vec<Vec<Position>> {
        op.open().unwrap();
        let mut out = Vec::new();
        while let Some(b) = op.next_block().unwrap() {
            out.push(b.positions().to_vec());
        }
        assert!(op.next_block().unwrap().is_none());
        out
    }

    #[test]
    fn datasource_blocks() {
        let mut ds = Datasource::new(table(vec![1, 2, 3, 4, 5]), 2).unwrap();
        assert_eq!(blocks(&mut ds), vec![vec![0, 1], vec![2, 3], vec![4]]);
        let mut empty = Datasource::new(table(vec![]), 2).unwrap();
        assert!(blocks(&mut empty).is_empty());
        assert!(Datasource::new(table(vec![]), 0).is_err());
    }

    #[test]
    fn datasource_covers_large_table() {
        let t = table((0..40000).collect());
        let mut ds = Datasource::new(t, 1024).unwrap();
        let all = collect_positions(&mut ds).unwrap();
        assert_eq!(all, (0..40000).collect::<Vec<Position>>());
    }

    #[test]
    fn pos_filter_examples() {
        let t = table(vec![10, 20, 30]);
        let ds = Box::new(Datasource::new(t.clone(), 8).unwrap());
        let mut f = PosFilter::new(ds, t.clone(), &Expr::parse("(< (col col) 25)").unwrap()).unwrap();
        assert_eq!(collect_positions(&mut f).unwrap(), vec![0, 1]);

        let ds = Box::new(Datasource::new(t.clone(), 2).unwrap());
        let mut none = PosFilter::new(ds, t.clone(), &Expr::Bool(false)).unwrap();
        assert!(collect_positions(&mut none).unwrap().is_empty());

        let ds = Box::new(Datasource::new(t.clone(), 2).unwrap());
        let corr = PosFilter::new(ds, t, &Expr::parse("(< (col col) (corr x))").unwrap());
        assert!(matches!(corr, Err(Error::Planning(_))));
    }

    #[test]
    fn materialize_examples() {
        let t = Arc::new(
            ColumnTable::new(
                "t",
                vec![Column::new(
                    "c",
                    ColumnData::Text(vec!["a".into(), "b".into(), "c".into(), "d".into()]),
                )],
            )
            .unwrap(),
        );
        let ds = Box::new(Datasource::new(t.clone(), 8).unwrap());
        let filt = PosFilter::new(ds, t.clone(), &Expr::parse("(or (= (col c) 'b') (= (col c) 'd'))").unwrap())
            .unwrap();
        let mut m = Materialize::new(Box::new(filt), vec![Reader::new(t.clone(), "c").unwrap()]);
        let out = collect_tuples(&mut m).unwrap();
        assert_eq!(out.positions, vec![1, 3]);
        assert_eq!(
            out.rows,
            vec![vec![Scalar::Text("b".into())], vec![Scalar::Text("d".into())]]
        );

        let ds = Box::new(Datasource::new(t.clone(), 8).unwrap());
        let none = PosFilter::new(ds, t.clone(), &Expr::Bool(false)).unwrap();
        let mut m = Materialize::new(Box::new(none), vec![Reader::new(t, "c").unwrap()]);
        assert!(collect_tuples(&mut m).unwrap().rows.is_empty());
    }

    #[test]
    fn materialize_rejects_foreign_reader() {
        let t = table(vec![1, 2]);
        let u = Arc::new(ColumnTable::new("u", vec![Column::new("col", ColumnData::Int(vec![1, 2]))]).unwrap());
        let ds = Box::new(Datasource::new(t, 8).unwrap());
        let mut m = Materialize::new(ds, vec![Reader::new(u, "col").unwrap()]);
        assert!(matches!(collect_tuples(&mut m), Err(Error::Schema(_))));
    }

    proptest! {
        #[test]
        fn filter_pipeline_matches_row_at_a_time(
            values in proptest::collection::vec(-50i64..50, 0..500),
            threshold in -60i64..60,
            op in prop::sample::select(vec!["<", "<=", "=", "!=", ">=", ">"]),
            capacity in 1usize..70,
        ) {
            let t = table(values.clone());
            let pred = Expr::parse(&format!("({op} (col col) {threshold})")).unwrap();
            let ds = Box::new(Datasource::new(t.clone(), capacity).unwrap());
            let mut f = PosFilter::new(ds, t.clone(), &pred).unwrap();
            let got = collect_positions(&mut f).unwrap();
            let expected: Vec<Position> = values.iter().enumerate().filter(|(_, &v)| match op {
                "<" => v < threshold, "<=" => v <= threshold, "=" => v == threshold,
                "!=" => v != threshold, ">=" => v >= threshold, _ => v > threshold,
            }).map(|(i, _)| i as Position).collect();
            prop_assert_eq!(&got, &expected);

            let ds = Box::new(Datasource::new(t.clone(), capacity).unwrap());
            let f = PosFilter::new(ds, t.clone(), &pred).unwrap();
            let mut m = Materialize::new(Box::new(f), vec![Reader::new(t, "col").unwrap()]);
            let rows = collect_tuples(&mut m).unwrap().rows;
            let expected_rows: Vec<Vec<Scalar>> = expected.iter().map(|&p| vec![Scalar::Int(values[p as usize])]).collect();
            prop_assert_eq!(rows, expected_rows);
        }
    }
}
