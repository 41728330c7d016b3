//! Cost formulas for the plan kinds and cost-based plan choice.
//!
//! With N outer rows, M inner rows, per-row predicate costs `cost_nc` and
//! `cost_c`, and `f` the fraction of outer rows passing the non-correlated
//! branch:
//!
//! ```text
//! naive     = N * M * (cost_nc + cost_c)
//! cached    = N * cost_nc + N * M * cost_c
//! proposed  = N * cost_nc + N * (1 - f) * M * cost_c
//! prefilter = M * cost_nc + N * (M * s) * cost_c     (s: inner NC selectivity)
//! ```
//!
//! `cached` and `proposed` charge nothing for the single pass that builds the
//! non-correlated digest.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{CompiledExpr, Connective, Digest, InnerSource, InnerSubplan};
use crate::par::{self, Parallelism};
use crate::planner::{Catalog, PlanKind, SubqueryQuery};
use crate::types::{Position, DEFAULT_BLOCK_CAPACITY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub n: f64,
    pub m: f64,
    pub cost_nc: f64,
    pub cost_c: f64,
    pub nc_pass_fraction: f64,
    /// Fraction of inner rows satisfying NC; used by the prefilter formula.
    pub nc_inner_selectivity: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let fraction = 0.0..=1.0;
        let ok = [self.n, self.m, self.cost_nc, self.cost_c]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && fraction.contains(&self.nc_pass_fraction)
            && fraction.contains(&self.nc_inner_selectivity);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid cost parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub naive: f64,
    pub cached: f64,
    pub proposed: f64,
}

pub fn estimate(p: &CostParams) -> CostEstimate {
    CostEstimate {
        naive: p.n * p.m * (p.cost_nc + p.cost_c),
        cached: p.n * p.cost_nc + p.n * p.m * p.cost_c,
        proposed: p.n * p.cost_nc + p.n * (1.0 - p.nc_pass_fraction) * p.m * p.cost_c,
    }
}

pub fn estimate_prefilter(p: &CostParams, nc_inner_selectivity: f64) -> f64 {
    p.m * p.cost_nc + p.n * (p.m * nc_inner_selectivity) * p.cost_c
}

/// Estimated cost of each legal plan kind, in tie-break preference order.
pub fn candidate_costs(connective: Connective, p: &CostParams) -> Vec<(PlanKind, f64)> {
    let e = estimate(p);
    match connective {
        Connective::Or => vec![
            (PlanKind::Lp, e.proposed),
            (PlanKind::Cached, e.cached),
            (PlanKind::Naive, e.naive),
        ],
        Connective::And => vec![
            (PlanKind::Prefilter, estimate_prefilter(p, p.nc_inner_selectivity)),
            (PlanKind::Naive, e.naive),
        ],
    }
}

/// Cheapest legal plan kind; ties go to LP/PREFILTER, then CACHED, then NAIVE.
pub fn choose_plan(q: &SubqueryQuery, p: &CostParams) -> PlanKind {
    let mut best: Option<(PlanKind, f64)> = None;
    for (kind, cost) in candidate_costs(q.connective, p) {
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((kind, cost));
        }
    }
    best.expect("every connective has a legal plan").0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMode {
    /// Decide the non-correlated branch for every outer row.
    Exact,
    /// Decide it for `size` outer rows drawn uniformly without replacement.
    /// The standard error of the estimate is at most `0.5 / sqrt(size)`.
    Sample { size: usize, seed: u64 },
}

const CHUNK: usize = 4096;

/// Measures N, M, the NC pass fraction and the inner NC selectivity; costs
/// default to the expression sizes of NC and C.
pub fn measure_params(
    q: &SubqueryQuery,
    catalog: &Catalog,
    mode: MeasureMode,
    par: Parallelism,
) -> Result<CostParams> {
    q.validate(catalog)?;
    let outer = catalog.get(&q.outer_table)?;
    let inner = catalog.get(&q.inner_table)?;
    let sub = InnerSubplan::new(
        inner.clone(),
        None,
        &q.inner_value,
        &q.nc,
        InnerSource::Table,
        DEFAULT_BLOCK_CAPACITY,
    )?;
    let mut digest = Digest::empty(q.op);
    let mut passing_inner = 0u64;
    sub.scan(None, |values| {
        passing_inner += values.len() as u64;
        digest.absorb(values)?;
        Ok(None)
    })?;

    let n = outer.row_count();
    let positions: Vec<Position> = match mode {
        MeasureMode::Exact => (0..n as Position).collect(),
        MeasureMode::Sample { size, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<Position> = rand::seq::index::sample(&mut rng, n, size.min(n))
                .into_iter()
                .map(|i| i as Position)
                .collect();
            picked.sort_unstable();
            picked
        }
    };
    let probe = CompiledExpr::compile(&q.probe, &outer, None, &[])?;
    let chunks: Vec<&[Position]> = positions.chunks(CHUNK).collect();
    let counts = par::map(par, &chunks, |chunk| -> Result<usize> {
        let probes = probe.eval(&outer, chunk, &[])?;
        let mut passed = 0;
        for i in 0..chunk.len() {
            if digest.decide(q.op, &probes.scalar(i).expect("probe is a value"))? {
                passed += 1;
            }
        }
        Ok(passed)
    });
    let passed: usize = counts.into_iter().sum::<Result<usize>>()?;
    let m = inner.row_count();
    Ok(CostParams {
        n: n as f64,
        m: m as f64,
        cost_nc: q.nc.node_count() as f64,
        cost_c: q.c.node_count() as f64,
        nc_pass_fraction: if positions.is_empty() {
            0.0
        } else {
            passed as f64 / positions.len() as f64
        },
        nc_inner_selectivity: if m == 0 {
            0.0
        } else {
            passing_inner as f64 / m as f64
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::SetPredicateOp;
    use crate::expr::Expr;

    fn params(n: f64, m: f64, cost_nc: f64, cost_c: f64, f: f64) -> CostParams {
        CostParams {
            n,
            m,
            cost_nc,
            cost_c,
            nc_pass_fraction: f,
            nc_inner_selectivity: 0.5,
        }
    }

    fn or_query() -> SubqueryQuery {
        SubqueryQuery {
            outer_table: "o".into(),
            output_columns: vec![],
            probe: Expr::col("x"),
            op: SetPredicateOp::LtSome,
            inner_table: "i".into(),
            inner_value: Expr::col("v"),
            nc: Expr::Bool(true),
            c: Expr::parse("(= (col k) (corr k))").unwrap(),
            connective: Connective::Or,
        }
    }

    #[test]
    fn closed_forms() {
        let e = estimate(&params(10.0, 10.0, 1.0, 1.0, 0.0));
        assert_eq!(e, CostEstimate { naive: 200.0, cached: 110.0, proposed: 110.0 });
        assert_eq!(estimate(&params(10.0, 10.0, 1.0, 1.0, 1.0)).proposed, 10.0);
        assert_eq!(estimate_prefilter(&params(10.0, 100.0, 1.0, 1.0, 0.0), 0.5), 600.0);
        let p = params(10.0, 100.0, 2.0, 3.0, 0.0);
        assert_eq!(estimate_prefilter(&p, 0.0), 200.0);
        assert_eq!(estimate_prefilter(&p, 1.0), 200.0 + 3000.0);
    }

    #[test]
    fn proposed_is_affine_and_bounded_by_cached() {
        let base = params(40.0, 70.0, 3.0, 2.0, 0.0);
        let at = |f: f64| estimate(&CostParams { nc_pass_fraction: f, ..base });
        let e0 = at(0.0);
        assert_eq!(e0.proposed, e0.cached);
        let mut prev = e0.proposed;
        for i in 1..=100 {
            let e = at(i as f64 / 100.0);
            assert!(e.proposed < e.cached);
            assert!(e.proposed <= prev);
            assert_eq!(e.cached, e0.cached);
            assert_eq!(e.naive, e0.naive);
            let mid = (at((i - 1) as f64 / 100.0).proposed + e.proposed) / 2.0;
            assert!((at((i as f64 - 0.5) / 100.0).proposed - mid).abs() < 1e-6);
            prev = e.proposed;
        }
    }

    #[test]
    fn choice_examples() {
        let q = or_query();
        assert_eq!(choose_plan(&q, &params(10.0, 10.0, 1.0, 1.0, 0.99)), PlanKind::Lp);
        // Tie between proposed and cached at f = 0 goes to LP.
        assert_eq!(choose_plan(&q, &params(10.0, 10.0, 1.0, 1.0, 0.0)), PlanKind::Lp);
        // With these costs the formulas still rank naive last for M >= 1 ...
        let p = params(10.0, 10.0, 1000.0, 0.001, 0.0);
        let e = estimate(&p);
        assert!((e.naive - 100_000.1).abs() < 1e-6 && (e.cached - 10_000.1).abs() < 1e-6);
        assert_eq!(choose_plan(&q, &p), PlanKind::Lp);
        // ... and naive wins only when there is no inner work at all.
        assert_eq!(choose_plan(&q, &params(10.0, 0.0, 1000.0, 0.001, 0.0)), PlanKind::Naive);

        let and = SubqueryQuery { connective: Connective::And, ..q };
        assert_eq!(choose_plan(&and, &params(10.0, 10.0, 1.0, 1.0, 0.5)), PlanKind::Prefilter);
        // For N >= 1 the prefilter never costs more than naive; with no outer rows it does.
        assert_eq!(choose_plan(&and, &params(0.0, 10.0, 10.0, 1.0, 0.5)), PlanKind::Naive);
    }

    #[test]
    fn choice_over_pass_fraction_grid() {
        let q = or_query();
        for (cost_nc, cost_c) in [(1.0, 1.0), (50.0, 0.01), (0.01, 50.0), (3.0, 3.0)] {
            let base = params(100.0, 300.0, cost_nc, cost_c, 0.0);
            let kinds: Vec<PlanKind> = (0..=100)
                .map(|i| choose_plan(&q, &CostParams { nc_pass_fraction: i as f64 / 100.0, ..base }))
                .collect();
            let switches = kinds.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(switches <= 1, "{kinds:?}");
            for scale in [0.1, 1.0, 10.0] {
                for (i, kind) in kinds.iter().enumerate() {
                    let p = CostParams {
                        cost_nc: cost_nc * scale,
                        cost_c: cost_c * scale,
                        nc_pass_fraction: i as f64 / 100.0,
                        ..base
                    };
                    assert_eq!(choose_plan(&q, &p), *kind);
                }
            }
        }
    }
}
