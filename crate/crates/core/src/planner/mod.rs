//! Query IR, classification, rewrite and plan construction.
//!
//! A [`SubqueryQuery`] describes
//!
//! ```text
//! SELECT <output> FROM <outer> WHERE <probe> OP (
//!     SELECT <inner_value> FROM <inner> WHERE <nc> AND|OR <c>)
//! ```
//!
//! with `OP` either `IN` or `<SOME`. The AND classes rewrite to
//! `OP (NC) AND OP (NC AND C)`, the OR classes to `OP (NC) OR OP (C)`.

mod ir_text;

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{
    collect_tuples, BoxedOperator, CompoundCheck, Connective, CorrelatedProbe, Datasource,
    ExecFlags, ExecStats, InnerSource, InnerSubplan, Materialize, Metrics, NcProbe,
    SetOpCorrelated, SetOpNonCorrelated, SetPredicateOp, TupleOperator,
};
use crate::expr::{Expr, ExprType};
use crate::lp::LpOperator;
use crate::types::{ColumnTable, Position, Reader, Scalar, DEFAULT_BLOCK_CAPACITY};

pub use ir_text::{parse_query, query_to_toml};

/// Tables by name.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    tables: HashMap<String, Arc<ColumnTable>>,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn insert(&mut self, table: Arc<ColumnTable>) {
        self.tables.insert(table.name().to_string(), table);
    }

    pub fn get(&self, name: &str) -> Result<Arc<ColumnTable>> {
        self.tables
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Schema(format!("unknown table `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubqueryQuery {
    pub outer_table: String,
    pub output_columns: Vec<String>,
    pub probe: Expr,
    pub op: SetPredicateOp,
    pub inner_table: String,
    pub inner_value: Expr,
    pub nc: Expr,
    pub c: Expr,
    pub connective: Connective,
}

impl SubqueryQuery {
    /// The inner predicate as written: `nc AND c` or `nc OR c`.
    pub fn compound_predicate(&self) -> Expr {
        match self.connective {
            Connective::And => Expr::and(self.nc.clone(), self.c.clone()),
            Connective::Or => Expr::or(self.nc.clone(), self.c.clone()),
        }
    }

    /// Type-checks every part of the query against the catalog.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let outer = catalog.get(&self.outer_table)?;
        let inner = catalog.get(&self.inner_table)?;
        for c in &self.output_columns {
            outer.column_index(crate::expr::unqualified(c))?;
        }
        if self.probe.is_correlated() {
            return Err(Error::Planning("probe expression cannot use `corr`".into()));
        }
        let probe = self.probe.type_check(&outer, None)?;
        let value = self.inner_value.type_check(&inner, None)?;
        if probe == ExprType::Bool || probe != value {
            return Err(Error::Type(format!(
                "probe `{}` and inner value `{}` have incompatible types",
                self.probe, self.inner_value
            )));
        }
        for (what, pred) in [("nc", &self.nc), ("c", &self.c)] {
            if pred.type_check(&inner, Some(&outer))? != ExprType::Bool {
                return Err(Error::Type(format!("{what} predicate is not boolean")));
            }
        }
        Ok(())
    }
}

/// Class 1..=4: (IN, AND), (IN, OR), (<SOME, AND), (<SOME, OR).
pub fn classify(q: &SubqueryQuery) -> Result<u8> {
    if q.nc.is_correlated() {
        return Err(Error::Classification(format!(
            "non-correlated predicate `{}` references the outer row",
            q.nc
        )));
    }
    if !q.c.is_correlated() {
        return Err(Error::Classification(format!(
            "correlated predicate `{}` has no outer reference",
            q.c
        )));
    }
    Ok(match (q.op, q.connective) {
        (SetPredicateOp::In, Connective::And) => 1,
        (SetPredicateOp::In, Connective::Or) => 2,
        (SetPredicateOp::LtSome, Connective::And) => 3,
        (SetPredicateOp::LtSome, Connective::Or) => 4,
        (op, _) => {
            return Err(Error::Classification(format!(
                "set predicate {op} is outside classes 1-4"
            )))
        }
    })
}

/// One side of a rewritten query: `probe OP (SELECT value WHERE predicate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub value: Expr,
    pub predicate: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewrittenQuery {
    /// `OP (nc_only) AND OP (combined)`.
    And { nc_only: Branch, combined: Branch },
    /// `OP (nc_branch) OR OP (c_branch)`.
    Or { nc_branch: Branch, c_branch: Branch },
}

pub fn rewrite(q: &SubqueryQuery) -> Result<RewrittenQuery> {
    classify(q)?;
    let branch = |predicate| Branch {
        value: q.inner_value.clone(),
        predicate,
    };
    Ok(match q.connective {
        Connective::And => RewrittenQuery::And {
            nc_only: branch(q.nc.clone()),
            combined: branch(Expr::and(q.nc.clone(), q.c.clone())),
        },
        Connective::Or => RewrittenQuery::Or {
            nc_branch: branch(q.nc.clone()),
            c_branch: branch(q.c.clone()),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanKind {
    Naive,
    Prefilter,
    Cached,
    Lp,
}

impl PlanKind {
    pub const ALL: [PlanKind; 4] = [PlanKind::Naive, PlanKind::Prefilter, PlanKind::Cached, PlanKind::Lp];

    pub fn is_legal(self, connective: Connective) -> bool {
        match self {
            PlanKind::Naive | PlanKind::Cached => true,
            PlanKind::Prefilter => connective == Connective::And,
            PlanKind::Lp => connective == Connective::Or,
        }
    }

    pub fn legal(connective: Connective) -> Vec<PlanKind> {
        PlanKind::ALL
            .into_iter()
            .filter(|k| k.is_legal(connective))
            .collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlanKind::Naive => "naive",
            PlanKind::Prefilter => "prefilter",
            PlanKind::Cached => "cached",
            PlanKind::Lp => "lp",
        }
    }
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlanKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown plan kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOptions {
    pub flags: ExecFlags,
    pub capacity: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            flags: ExecFlags::default(),
            capacity: DEFAULT_BLOCK_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanOutput {
    pub positions: Vec<Position>,
    pub rows: Vec<Vec<Scalar>>,
    pub stats: ExecStats,
}

/// An executable plan. Building one does no work; the inner subplans run on
/// the first pull.
pub struct Plan {
    pub kind: PlanKind,
    pub flags: ExecFlags,
    root: Box<dyn TupleOperator>,
    metrics: Rc<Metrics>,
    shape: String,
}

impl Plan {
    /// Operator tree in prefix form, e.g. `materialize(lp(...))`.
    pub fn shape(&self) -> &str {
        &self.shape
    }

    pub fn execute(mut self) -> Result<PlanOutput> {
        let out = collect_tuples(self.root.as_mut())?;
        Ok(PlanOutput {
            positions: out.positions,
            rows: out.rows,
            stats: self.metrics.snapshot(),
        })
    }
}

pub fn build_plan(
    q: &SubqueryQuery,
    catalog: &Catalog,
    kind: PlanKind,
    options: PlanOptions,
) -> Result<Plan> {
    let rewritten = rewrite(q)?;
    plan_rewritten(q, &rewritten, catalog, kind, options)
}

/// Builds a plan for an already rewritten query. `build_plan` uses the
/// rewrite produced by [`rewrite`]; tests pass hand-made forms.
pub fn plan_rewritten(
    q: &SubqueryQuery,
    rewritten: &RewrittenQuery,
    catalog: &Catalog,
    kind: PlanKind,
    options: PlanOptions,
) -> Result<Plan> {
    if !kind.is_legal(q.connective) {
        return Err(Error::Planning(format!(
            "plan kind {kind} is not legal for a query with connective {}",
            q.connective
        )));
    }
    q.validate(catalog)?;
    let outer = catalog.get(&q.outer_table)?;
    let inner = catalog.get(&q.inner_table)?;
    let metrics = Metrics::new();
    let cap = options.capacity;
    let flags = options.flags;
    let sub = |b: &Branch, source: InnerSource| {
        InnerSubplan::new(inner.clone(), Some(&outer), &b.value, &b.predicate, source, cap)
    };
    let nc_probe = |b: &Branch, source| NcProbe::new(outer.clone(), &q.probe, q.op, sub(b, source)?, metrics.clone());
    let corr_probe = |b: &Branch, source| {
        CorrelatedProbe::new(outer.clone(), &q.probe, q.op, sub(b, source)?, flags, metrics.clone())
    };
    let ds: BoxedOperator = Box::new(Datasource::new(outer.clone(), cap)?.with_metrics(&metrics));

    let (positional, shape): (BoxedOperator, String) = match (kind, rewritten) {
        (PlanKind::Naive, _) => {
            let whole = Branch {
                value: q.inner_value.clone(),
                predicate: q.compound_predicate(),
            };
            let probe = corr_probe(&whole, InnerSource::Table)?;
            (
                Box::new(SetOpCorrelated::new(ds, probe).with_metrics(&metrics, "setop_correlated")),
                "setop_correlated(datasource)".into(),
            )
        }
        (PlanKind::Cached, RewrittenQuery::And { nc_only: left, combined: right })
        | (PlanKind::Cached, RewrittenQuery::Or { nc_branch: left, c_branch: right }) => {
            let nc = nc_probe(left, InnerSource::Table)?;
            let corr = corr_probe(right, InnerSource::Table)?;
            (
                Box::new(CompoundCheck::new(ds, nc, corr, q.connective).with_metrics(&metrics)),
                format!("compound_check_{}(datasource)", q.connective),
            )
        }
        (PlanKind::Prefilter, RewrittenQuery::And { nc_only, combined }) => {
            let kept = prefilter(&inner, &nc_only.predicate, cap)?;
            metrics.record_prefilter(inner.row_count() as u64);
            let kept: Arc<[Position]> = Arc::from(kept);
            let always = Branch {
                value: nc_only.value.clone(),
                predicate: Expr::Bool(true),
            };
            // Within the prefiltered rows NC holds, so the combined branch
            // reduces to its correlated conjunct.
            let residual = Branch {
                value: combined.value.clone(),
                predicate: strip_conjunct(&combined.predicate, &nc_only.predicate),
            };
            let nc = nc_probe(&always, InnerSource::Positions(kept.clone()))?;
            let corr = corr_probe(&residual, InnerSource::Positions(kept))?;
            let left: BoxedOperator =
                Box::new(SetOpNonCorrelated::new(ds, nc).with_metrics(&metrics, "setop_noncorrelated"));
            (
                Box::new(SetOpCorrelated::new(left, corr).with_metrics(&metrics, "setop_correlated")),
                "setop_correlated(setop_noncorrelated(datasource))".into(),
            )
        }
        (PlanKind::Lp, RewrittenQuery::Or { nc_branch, c_branch }) => {
            let nc = nc_probe(nc_branch, InnerSource::Table)?;
            let corr = corr_probe(c_branch, InnerSource::Table)?;
            let left_m = metrics.clone();
            let right_m = metrics.clone();
            let lp = LpOperator::new(
                ds,
                move |input| Box::new(SetOpNonCorrelated::new(input, nc).with_metrics(&left_m, "setop_noncorrelated")),
                move |input| Box::new(SetOpCorrelated::new(input, corr).with_metrics(&right_m, "setop_correlated")),
            )
            .with_metrics(&metrics);
            (
                Box::new(lp),
                "lp(datasource, setop_noncorrelated(proxy), setop_correlated(proxy))".into(),
            )
        }
        (kind, _) => {
            return Err(Error::Planning(format!(
                "plan kind {kind} does not match the rewritten form"
            )))
        }
    };
    let readers = q
        .output_columns
        .iter()
        .map(|c| Reader::new(outer.clone(), crate::expr::unqualified(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan {
        kind,
        flags,
        root: Box::new(Materialize::new(positional, readers)),
        metrics,
        shape: format!("materialize({shape})"),
    })
}

/// Positions of `table` satisfying a non-correlated predicate, ascending.
fn prefilter(table: &Arc<ColumnTable>, predicate: &Expr, capacity: usize) -> Result<Vec<Position>> {
    let ds = Box::new(Datasource::new(table.clone(), capacity)?);
    let mut filter = crate::exec::PosFilter::new(ds, table.clone(), predicate)?;
    crate::exec::collect_positions(&mut filter)
}

/// `pred` without its top-level conjunct `conjunct`, if present.
fn strip_conjunct(pred: &Expr, conjunct: &Expr) -> Expr {
    match pred {
        Expr::And(l, r) if **l == *conjunct => (**r).clone(),
        Expr::And(l, r) if **r == *conjunct => (**l).clone(),
        other => other.clone(),
    }
}
