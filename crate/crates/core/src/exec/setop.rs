//! Set-based subquery predicates (`IN`, `<SOME`, `<ALL`, ...) and the
//! positional operators that apply them to outer positions.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{unqualified, Expr};
use crate::types::{ColumnTable, Position, PositionBlock, Scalar};

use super::eval::{cmp_scalar_elem, value_type, CompiledExpr, Vector};
use super::inner::InnerSubplan;
use super::{bump, check_table, select, BoxedOperator, Metrics, PositionalOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetPredicateOp {
    In,
    LtSome,
    GtSome,
    LtAll,
    GtAll,
}

impl SetPredicateOp {
    pub const ALL: [SetPredicateOp; 5] = [
        SetPredicateOp::In,
        SetPredicateOp::LtSome,
        SetPredicateOp::GtSome,
        SetPredicateOp::LtAll,
        SetPredicateOp::GtAll,
    ];

    /// `IN` and the `SOME` forms ask for one witness; the `ALL` forms for no
    /// counterexample.
    pub fn is_existential(self) -> bool {
        matches!(
            self,
            SetPredicateOp::In | SetPredicateOp::LtSome | SetPredicateOp::GtSome
        )
    }

    /// Whether `probe` relates to one inner value `v` as the operator requires,
    /// given `probe.cmp(v)`.
    pub fn relates(self, ord: Ordering) -> bool {
        match self {
            SetPredicateOp::In => ord == Ordering::Equal,
            SetPredicateOp::LtSome | SetPredicateOp::LtAll => ord == Ordering::Less,
            SetPredicateOp::GtSome | SetPredicateOp::GtAll => ord == Ordering::Greater,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SetPredicateOp::In => "in",
            SetPredicateOp::LtSome => "lt_some",
            SetPredicateOp::GtSome => "gt_some",
            SetPredicateOp::LtAll => "lt_all",
            SetPredicateOp::GtAll => "gt_all",
        }
    }
}

impl fmt::Display for SetPredicateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetPredicateOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SetPredicateOp::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown set predicate `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connective {
    And,
    Or,
}

impl Connective {
    pub fn as_str(self) -> &'static str {
        match self {
            Connective::And => "and",
            Connective::Or => "or",
        }
    }
}

impl FromStr for Connective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "and" => Ok(Connective::And),
            "or" => Ok(Connective::Or),
            _ => Err(Error::Parse(format!("unknown connective `{s}`"))),
        }
    }
}

impl fmt::Display for Connective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Evaluates `probe OP values` over a fully materialized multiset.
///
/// Empty multisets follow SQL quantified-comparison semantics: `IN` and the
/// `SOME` forms are false, the `ALL` forms true.
pub fn set_predicate(op: SetPredicateOp, probe: &Scalar, values: &[Scalar]) -> Result<bool> {
    let mut relations = Vec::with_capacity(values.len());
    for v in values {
        relations.push(op.relates(probe.try_cmp(v)?));
    }
    Ok(if op.is_existential() {
        relations.into_iter().any(|r| r)
    } else {
        relations.into_iter().all(|r| r)
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecFlags {
    /// Stop an inner scan at the first row that decides the predicate.
    pub early_exit: bool,
    /// Cache correlated digests keyed by the correlation input tuple.
    pub memoize: bool,
}

/// Summary of an inner multiset sufficient to decide one set predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum Digest {
    Members(HashSet<Scalar>),
    Max(Option<Scalar>),
    Min(Option<Scalar>),
}

impl Digest {
    pub fn empty(op: SetPredicateOp) -> Self {
        match op {
            SetPredicateOp::In => Digest::Members(HashSet::new()),
            SetPredicateOp::LtSome | SetPredicateOp::GtAll => Digest::Max(None),
            SetPredicateOp::GtSome | SetPredicateOp::LtAll => Digest::Min(None),
        }
    }

    pub fn from_values(op: SetPredicateOp, values: &[Scalar]) -> Result<Self> {
        let mut d = Digest::empty(op);
        for v in values {
            d.absorb_scalar(v.clone())?;
        }
        Ok(d)
    }

    fn absorb_scalar(&mut self, v: Scalar) -> Result<()> {
        match self {
            Digest::Members(set) => {
                set.insert(v);
            }
            Digest::Max(cur) => {
                if cur.as_ref().map_or(Ok(true), |c| v.try_cmp(c).map(|o| o == Ordering::Greater))? {
                    *cur = Some(v);
                }
            }
            Digest::Min(cur) => {
                if cur.as_ref().map_or(Ok(true), |c| v.try_cmp(c).map(|o| o == Ordering::Less))? {
                    *cur = Some(v);
                }
            }
        }
        Ok(())
    }

    pub fn absorb(&mut self, values: &Vector) -> Result<()> {
        if values.is_empty() {
            return Ok(());
        }
        let want_max = match self {
            Digest::Members(set) => {
                set.extend(values.clone().into_scalars()?);
                return Ok(());
            }
            Digest::Max(_) => true,
            Digest::Min(_) => false,
        };
        let extreme = match values {
            Vector::Int(v) => Scalar::Int(if want_max {
                *v.iter().max().unwrap()
            } else {
                *v.iter().min().unwrap()
            }),
            Vector::Float(v) => Scalar::Float(if want_max {
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            } else {
                v.iter().copied().fold(f64::INFINITY, f64::min)
            }),
            Vector::Text(v) => Scalar::Text(if want_max {
                v.iter().max_by(|a, b| a.as_bytes().cmp(b.as_bytes())).unwrap().clone()
            } else {
                v.iter().min_by(|a, b| a.as_bytes().cmp(b.as_bytes())).unwrap().clone()
            }),
            Vector::Bool(_) => return Err(Error::Type("cannot digest boolean values".into())),
        };
        self.absorb_scalar(extreme)
    }

    pub fn decide(&self, op: SetPredicateOp, probe: &Scalar) -> Result<bool> {
        let cmp = |v: &Scalar| probe.try_cmp(v).map(|o| op.relates(o));
        match (self, op) {
            (Digest::Members(set), SetPredicateOp::In) => {
                if let Some(any) = set.iter().next() {
                    probe.try_cmp(any)?;
                }
                Ok(set.contains(probe))
            }
            (Digest::Max(m), SetPredicateOp::LtSome) | (Digest::Min(m), SetPredicateOp::GtSome) => {
                m.as_ref().map_or(Ok(false), cmp)
            }
            (Digest::Min(m), SetPredicateOp::LtAll) | (Digest::Max(m), SetPredicateOp::GtAll) => {
                m.as_ref().map_or(Ok(true), cmp)
            }
            _ => Err(Error::Invariant(format!("digest does not match operator {op}"))),
        }
    }

    /// The cached extreme, for the max/min forms.
    pub fn extreme(&self) -> Option<&Scalar> {
        match self {
            Digest::Max(m) | Digest::Min(m) => m.as_ref(),
            Digest::Members(_) => None,
        }
    }
}

fn compile_probe(outer: &ColumnTable, probe: &Expr, sub: &InnerSubplan) -> Result<CompiledExpr> {
    if probe.is_correlated() {
        return Err(Error::Planning(format!(
            "probe expression `{probe}` must be over the outer row only"
        )));
    }
    let compiled = CompiledExpr::compile(probe, outer, None, &[])?;
    let ty = value_type(compiled.ty())?;
    if ty != sub.value_type() {
        return Err(Error::Type(format!(
            "probe of type {ty} compared with inner values of type {}",
            sub.value_type()
        )));
    }
    Ok(compiled)
}

/// Decides a non-correlated set predicate for outer rows against a digest
/// built once, on first use, with a single pass over the inner subplan.
pub struct NcProbe {
    outer: Arc<ColumnTable>,
    probe: CompiledExpr,
    op: SetPredicateOp,
    sub: InnerSubplan,
    digest: Option<Digest>,
    metrics: Rc<Metrics>,
}

impl NcProbe {
    pub fn new(
        outer: Arc<ColumnTable>,
        probe: &Expr,
        op: SetPredicateOp,
        sub: InnerSubplan,
        metrics: Rc<Metrics>,
    ) -> Result<Self> {
        if sub.is_correlated() {
            return Err(Error::Planning(
                "non-correlated set operator given a correlated inner subplan".into(),
            ));
        }
        let probe = compile_probe(&outer, probe, &sub)?;
        Ok(NcProbe {
            outer,
            probe,
            op,
            sub,
            digest: None,
            metrics,
        })
    }

    pub fn outer(&self) -> &Arc<ColumnTable> {
        &self.outer
    }

    pub fn digest(&mut self) -> Result<&Digest> {
        if self.digest.is_none() {
            let mut digest = Digest::empty(self.op);
            let outcome = self.sub.scan(None, |values| {
                digest.absorb(values)?;
                Ok(None)
            })?;
            self.metrics.record_digest_build(outcome.rows_examined);
            self.digest = Some(digest);
        }
        Ok(self.digest.as_ref().unwrap())
    }

    pub fn decide(&mut self, positions: &[Position]) -> Result<Vec<bool>> {
        let probes = self.probe.eval(&self.outer, positions, &[])?;
        let op = self.op;
        let digest = self.digest()?;
        (0..positions.len())
            .map(|i| digest.decide(op, &probes.scalar(i).unwrap()))
            .collect()
    }
}

/// Decides a correlated set predicate for outer rows by re-running the inner
/// subplan under each row's binding.
pub struct CorrelatedProbe {
    outer: Arc<ColumnTable>,
    probe: CompiledExpr,
    key_columns: Vec<usize>,
    op: SetPredicateOp,
    sub: InnerSubplan,
    flags: ExecFlags,
    memo: HashMap<Vec<Scalar>, Digest>,
    metrics: Rc<Metrics>,
}

impl CorrelatedProbe {
    pub fn new(
        outer: Arc<ColumnTable>,
        probe: &Expr,
        op: SetPredicateOp,
        sub: InnerSubplan,
        flags: ExecFlags,
        metrics: Rc<Metrics>,
    ) -> Result<Self> {
        let probe = compile_probe(&outer, probe, &sub)?;
        let key_columns = sub
            .slots()
            .iter()
            .map(|s| outer.column_index(unqualified(s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CorrelatedProbe {
            outer,
            probe,
            key_columns,
            op,
            sub,
            flags,
            memo: HashMap::new(),
            metrics,
        })
    }

    pub fn outer(&self) -> &Arc<ColumnTable> {
        &self.outer
    }

    /// Correlation input tuple of one outer row.
    fn key(&self, pos: Position) -> Vec<Scalar> {
        self.key_columns
            .iter()
            .map(|&c| self.outer.columns()[c].data.get(pos as usize))
            .collect()
    }

    fn full_digest(&self, key: &[Scalar]) -> Result<Digest> {
        let mut digest = Digest::empty(self.op);
        let outcome = self.sub.scan(Some(key), |values| {
            digest.absorb(values)?;
            Ok(None)
        })?;
        self.metrics.record_invocation(outcome.rows_examined);
        Ok(digest)
    }

    fn decide_row(&mut self, probe: &Scalar, pos: Position) -> Result<bool> {
        let key = self.key(pos);
        let op = self.op;
        if self.flags.memoize {
            if let Some(d) = self.memo.get(&key) {
                self.metrics.record_memo_hit();
                return d.decide(op, probe);
            }
            let d = self.full_digest(&key)?;
            let decision = d.decide(op, probe)?;
            self.memo.insert(key, d);
            return Ok(decision);
        }
        if self.flags.early_exit {
            let existential = op.is_existential();
            let outcome = self.sub.scan(Some(&key), |values| {
                for i in 0..values.len() {
                    if op.relates(cmp_scalar_elem(probe, values, i)?) == existential {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            })?;
            self.metrics.record_invocation(outcome.rows_examined);
            return Ok(outcome.stopped_early == existential);
        }
        self.full_digest(&key)?.decide(op, probe)
    }

    pub fn decide(&mut self, positions: &[Position]) -> Result<Vec<bool>> {
        if positions.is_empty() {
            return Ok(Vec::new());
        }
        let probes = self.probe.eval(&self.outer, positions, &[])?;
        positions
            .iter()
            .enumerate()
            .map(|(i, &p)| self.decide_row(&probes.scalar(i).unwrap(), p))
            .collect()
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }
}

fn filter_block(
    block: PositionBlock,
    mask: &[bool],
    emitted: &Option<Rc<Cell<u64>>>,
) -> PositionBlock {
    let kept = select(block.positions(), mask);
    if let Some(c) = emitted {
        bump(c, kept.len() as u64);
    }
    block.derive(kept)
}

/// Positional `SetOp` whose inner query is non-correlated.
pub struct SetOpNonCorrelated {
    child: BoxedOperator,
    probe: NcProbe,
    emitted: Option<Rc<Cell<u64>>>,
}

impl SetOpNonCorrelated {
    pub fn new(child: BoxedOperator, probe: NcProbe) -> Self {
        SetOpNonCorrelated {
            child,
            probe,
            emitted: None,
        }
    }

    pub fn with_metrics(mut self, metrics: &Metrics, name: &str) -> Self {
        self.emitted = Some(metrics.counter(name));
        self
    }
}

impl PositionalOperator for SetOpNonCorrelated {
    fn open(&mut self) -> Result<()> {
        self.child.open()
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        let Some(block) = self.child.next_block()? else {
            return Ok(None);
        };
        check_table(&block, self.probe.outer())?;
        let mask = self.probe.decide(block.positions())?;
        Ok(Some(filter_block(block, &mask, &self.emitted)))
    }

    fn close(&mut self) {
        self.child.close()
    }
}

/// Positional `SetOp` whose inner query is re-evaluated per outer row.
pub struct SetOpCorrelated {
    child: BoxedOperator,
    probe: CorrelatedProbe,
    emitted: Option<Rc<Cell<u64>>>,
}

impl SetOpCorrelated {
    pub fn new(child: BoxedOperator, probe: CorrelatedProbe) -> Self {
        SetOpCorrelated {
            child,
            probe,
            emitted: None,
        }
    }

    pub fn with_metrics(mut self, metrics: &Metrics, name: &str) -> Self {
        self.emitted = Some(metrics.counter(name));
        self
    }
}

impl PositionalOperator for SetOpCorrelated {
    fn open(&mut self) -> Result<()> {
        self.child.open()
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        let Some(block) = self.child.next_block()? else {
            return Ok(None);
        };
        check_table(&block, self.probe.outer())?;
        let mask = self.probe.decide(block.positions())?;
        Ok(Some(filter_block(block, &mask, &self.emitted)))
    }

    fn close(&mut self) {
        self.child.close()
    }
}

/// Evaluates both branches of a rewritten query for every outer row and
/// combines them: the non-correlated branch from its cached digest, the
/// correlated one by re-evaluation, with no skipping between them.
pub struct CompoundCheck {
    child: BoxedOperator,
    nc: NcProbe,
    correlated: CorrelatedProbe,
    connective: Connective,
    emitted: Option<Rc<Cell<u64>>>,
}

impl CompoundCheck {
    pub fn new(
        child: BoxedOperator,
        nc: NcProbe,
        correlated: CorrelatedProbe,
        connective: Connective,
    ) -> Self {
        CompoundCheck {
            child,
            nc,
            correlated,
            connective,
            emitted: None,
        }
    }

    pub fn with_metrics(mut self, metrics: &Metrics) -> Self {
        self.emitted = Some(metrics.counter("compound_check"));
        self
    }
}

impl PositionalOperator for CompoundCheck {
    fn open(&mut self) -> Result<()> {
        self.child.open()
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        let Some(block) = self.child.next_block()? else {
            return Ok(None);
        };
        check_table(&block, self.nc.outer())?;
        let left = self.nc.decide(block.positions())?;
        let right = self.correlated.decide(block.positions())?;
        let mask: Vec<bool> = left
            .into_iter()
            .zip(right)
            .map(|(a, b)| match self.connective {
                Connective::And => a && b,
                Connective::Or => a || b,
            })
            .collect();
        Ok(Some(filter_block(block, &mask, &self.emitted)))
    }

    fn close(&mut self) {
        self.child.close()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{collect_positions, Datasource, InnerSource};
    use crate::types::{Column, ColumnData};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ints(v: &[i64]) -> Vec<Scalar> {
        v.iter().copied().map(Scalar::Int).collect()
    }

    #[test]
    fn set_predicate_examples() {
        use SetPredicateOp::*;
        assert!(set_predicate(LtSome, &Scalar::Int(5), &ints(&[3, 7])).unwrap());
        assert!(!set_predicate(LtSome, &Scalar::Int(5), &[]).unwrap());
        assert!(set_predicate(LtAll, &Scalar::Int(5), &[]).unwrap());
        assert!(!set_predicate(In, &Scalar::Int(5), &[]).unwrap());
        assert!(set_predicate(GtAll, &Scalar::Int(5), &[]).unwrap());
        assert!(!set_predicate(GtSome, &Scalar::Int(5), &[]).unwrap());
        // Ties are strict.
        assert!(!set_predicate(LtSome, &Scalar::Int(7), &ints(&[3, 7])).unwrap());
        assert!(matches!(
            set_predicate(In, &Scalar::Int(1), &[Scalar::Float(1.0)]),
            Err(Error::Type(_))
        ));
    }

    #[test]
    fn in_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.random_range(0..20);
            let values: Vec<i64> = (0..n).map(|_| rng.random_range(-10..10)).collect();
            let probe = rng.random_range(-12..12);
            let mut found = false;
            for v in &values {
                if *v == probe {
                    found = true;
                }
            }
            assert_eq!(
                set_predicate(SetPredicateOp::In, &Scalar::Int(probe), &ints(&values)).unwrap(),
                found
            );
        }
    }

    #[test]
    fn digest_decisions_match_full_multiset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for op in SetPredicateOp::ALL {
            for _ in 0..40 {
                let n = rng.random_range(0..30);
                let values: Vec<Scalar> =
                    (0..n).map(|_| Scalar::Float(rng.random_range(-5..5) as f64 * 0.5)).collect();
                let digest = Digest::from_values(op, &values).unwrap();
                let mut vec_digest = Digest::empty(op);
                vec_digest
                    .absorb(&Vector::Float(values.iter().map(|s| s.as_f64().unwrap()).collect()))
                    .unwrap();
                assert_eq!(digest, vec_digest);
                for _ in 0..25 {
                    let probe = Scalar::Float(rng.random_range(-7..7) as f64 * 0.5);
                    assert_eq!(
                        digest.decide(op, &probe).unwrap(),
                        set_predicate(op, &probe, &values).unwrap(),
                        "{op} {probe:?} {values:?}"
                    );
                }
            }
        }
    }

    fn outer_inner(probes: &[i64], keys: &[i64], inner_v: &[i64], inner_k: &[i64]) -> (Arc<ColumnTable>, Arc<ColumnTable>) {
        let outer = ColumnTable::new(
            "outer",
            vec![
                Column::new("p", ColumnData::Int(probes.to_vec())),
                Column::new("key", ColumnData::Int(keys.to_vec())),
            ],
        )
        .unwrap();
        let inner = ColumnTable::new(
            "inner",
            vec![
                Column::new("v", ColumnData::Int(inner_v.to_vec())),
                Column::new("k", ColumnData::Int(inner_k.to_vec())),
            ],
        )
        .unwrap();
        (Arc::new(outer), Arc::new(inner))
    }

    fn run_nc(outer: &Arc<ColumnTable>, inner: &Arc<ColumnTable>, op: SetPredicateOp) -> Vec<Position> {
        let m = Metrics::new();
        let sub = InnerSubplan::new(inner.clone(), None, &Expr::col("v"), &Expr::Bool(true), InnerSource::Table, 4)
            .unwrap();
        let probe = NcProbe::new(outer.clone(), &Expr::col("p"), op, sub, m.clone()).unwrap();
        let ds = Box::new(Datasource::new(outer.clone(), 2).unwrap());
        let mut setop = SetOpNonCorrelated::new(ds, probe);
        let out = collect_positions(&mut setop).unwrap();
        assert_eq!(m.snapshot().nc_digest_builds, u64::from(outer.row_count() > 0));
        out
    }

    #[test]
    fn setop_noncorrelated_examples() {
        let (outer, inner) = outer_inner(&[1, 5, 9], &[0, 0, 0], &[4], &[0]);
        assert_eq!(run_nc(&outer, &inner, SetPredicateOp::LtSome), vec![0]);
        let (outer, empty) = outer_inner(&[1, 5, 9], &[0, 0, 0], &[], &[]);
        assert!(run_nc(&outer, &empty, SetPredicateOp::LtSome).is_empty());
        assert_eq!(run_nc(&outer, &empty, SetPredicateOp::LtAll), vec![0, 1, 2]);
    }

    fn correlated(
        outer: &Arc<ColumnTable>,
        inner: &Arc<ColumnTable>,
        op: SetPredicateOp,
        flags: ExecFlags,
    ) -> (Vec<Position>, crate::exec::ExecStats) {
        let m = Metrics::new();
        let sub = InnerSubplan::new(
            inner.clone(),
            Some(outer),
            &Expr::col("v"),
            &Expr::parse("(= (col k) (corr key))").unwrap(),
            InnerSource::Table,
            3,
        )
        .unwrap();
        let probe = CorrelatedProbe::new(outer.clone(), &Expr::col("p"), op, sub, flags, m.clone()).unwrap();
        let ds = Box::new(Datasource::new(outer.clone(), 2).unwrap());
        let mut setop = SetOpCorrelated::new(ds, probe);
        let out = collect_positions(&mut setop).unwrap();
        (out, m.snapshot())
    }

    #[test]
    fn setop_correlated_examples() {
        // Key A=1 yields {6}, key B=2 yields {2}.
        let (outer, inner) = outer_inner(&[5, 9], &[1, 2], &[6, 2], &[1, 2]);
        let (out, _) = correlated(&outer, &inner, SetPredicateOp::LtSome, ExecFlags::default());
        assert_eq!(out, vec![0]);

        let (outer, inner) = outer_inner(&[5, 5], &[1, 1], &[6, 2], &[1, 2]);
        let memo = ExecFlags { memoize: true, early_exit: false };
        let (out, stats) = correlated(&outer, &inner, SetPredicateOp::LtSome, memo);
        assert_eq!(out, vec![0, 1]);
        assert_eq!(stats.inner_invocations, 1);
        assert_eq!(stats.memo_hits, 1);
    }

    #[test]
    fn early_exit_examines_up_to_first_witness() {
        // Inner values under key 0: 1,1,1,9,1,1 -> first witness for probe 5 at index 3.
        let inner_v = [1, 1, 1, 9, 1, 1];
        let (outer, inner) = outer_inner(&[5, 50], &[0, 0], &inner_v, &[0; 6]);
        let flags = ExecFlags { early_exit: true, memoize: false };
        let (out, stats) = correlated(&outer, &inner, SetPredicateOp::LtSome, flags);
        assert_eq!(out, vec![0]);
        // 4 rows for the first outer row, a full scan of 6 for the second.
        assert_eq!(stats.correlated_rows_scanned, 4 + 6);
        let (_, full) = correlated(&outer, &inner, SetPredicateOp::LtSome, ExecFlags::default());
        assert_eq!(full.correlated_rows_scanned, 12);
    }

    #[test]
    fn probe_type_mismatch_is_rejected() {
        let outer = Arc::new(ColumnTable::new("outer", vec![Column::new("p", ColumnData::Float(vec![1.0]))]).unwrap());
        let (_, inner) = outer_inner(&[], &[], &[1], &[1]);
        let sub = InnerSubplan::new(inner, None, &Expr::col("v"), &Expr::Bool(true), InnerSource::Table, 4).unwrap();
        assert!(matches!(
            NcProbe::new(outer, &Expr::col("p"), SetPredicateOp::In, sub, Metrics::new()),
            Err(Error::Type(_))
        ));
    }

    proptest! {
        #[test]
        fn correlated_flags_agree_with_brute_force(
            rows in proptest::collection::vec((0i64..12, 0i64..4), 0..40),
            inner_rows in proptest::collection::vec((0i64..12, 0i64..4), 0..60),
            op_idx in 0usize..5,
        ) {
            let op = SetPredicateOp::ALL[op_idx];
            let probes: Vec<i64> = rows.iter().map(|r| r.0).collect();
            let keys: Vec<i64> = rows.iter().map(|r| r.1).collect();
            let iv: Vec<i64> = inner_rows.iter().map(|r| r.0).collect();
            let ik: Vec<i64> = inner_rows.iter().map(|r| r.1).collect();
            let (outer, inner) = outer_inner(&probes, &keys, &iv, &ik);
            let expected: Vec<Position> = (0..rows.len()).filter(|&i| {
                let values: Vec<Scalar> = inner_rows.iter().filter(|r| r.1 == keys[i]).map(|r| Scalar::Int(r.0)).collect();
                set_predicate(op, &Scalar::Int(probes[i]), &values).unwrap()
            }).map(|i| i as Position).collect();
            let distinct_keys = keys.iter().collect::<HashSet<_>>().len() as u64;
            for (early_exit, memoize) in [(false, false), (true, false), (false, true), (true, true)] {
                let (got, stats) = correlated(&outer, &inner, op, ExecFlags { early_exit, memoize });
                prop_assert_eq!(&got, &expected);
                if memoize {
                    prop_assert_eq!(stats.inner_invocations, distinct_keys);
                } else {
                    prop_assert_eq!(stats.inner_invocations, rows.len() as u64);
                }
            }
        }
    }
}
