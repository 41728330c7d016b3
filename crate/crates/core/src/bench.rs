//! Selectivity sweep, parameter search and running-maximum analysis.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use crate::costmodel::{choose_plan, estimate, measure_params, CostEstimate, CostParams, MeasureMode};
use crate::error::{Error, Result};
use crate::exec::{CompiledExpr, ExecStats, SetPredicateOp};
use crate::expr::unqualified;
use crate::par::{self, Parallelism};
use crate::planner::{build_plan, parse_query, Catalog, PlanKind, PlanOptions, SubqueryQuery};
use crate::types::{ColumnData, Position, Scalar};
use crate::workload::instantiate;

/// Median of a non-empty sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

#[derive(Debug, Clone)]
pub struct TimedRun {
    pub wall: Duration,
    pub result_rows: usize,
    pub stats: ExecStats,
}

/// Builds and runs one plan, timing build plus execution on a monotonic clock.
pub fn time_plan(
    q: &SubqueryQuery,
    catalog: &Catalog,
    kind: PlanKind,
    options: PlanOptions,
) -> Result<TimedRun> {
    let start = Instant::now();
    let out = build_plan(q, catalog, kind, options)?.execute()?;
    let wall = start.elapsed();
    Ok(TimedRun {
        wall,
        result_rows: out.positions.len(),
        stats: out.stats,
    })
}

/// Instantiates `template` with `x` and parses it.
pub fn query_for(template: &str, x: &Scalar) -> Result<SubqueryQuery> {
    let text = match x {
        Scalar::Text(s) => format!("'{}'", s.replace('\'', "''")),
        other => other.to_string(),
    };
    parse_query(&instantiate(template, &text))
}

/// Distinct values of an inner column, ascending.
pub fn candidate_values(catalog: &Catalog, table: &str, column: &str) -> Result<Vec<Scalar>> {
    let t = catalog.get(table)?;
    let data = &t.column(unqualified(column))?.data;
    Ok(match data {
        ColumnData::Int(v) => v.iter().copied().collect::<BTreeSet<_>>().into_iter().map(Scalar::Int).collect(),
        ColumnData::Text(v) => v.iter().cloned().collect::<BTreeSet<_>>().into_iter().map(Scalar::Text).collect(),
        ColumnData::Float(v) => {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.into_iter().map(Scalar::Float).collect()
        }
    })
}

/// Exact NC pass fraction of every candidate X.
pub fn pass_fractions(
    template: &str,
    catalog: &Catalog,
    candidates: &[Scalar],
    par: Parallelism,
) -> Result<Vec<f64>> {
    par::map(par, candidates, |x| {
        let q = query_for(template, x)?;
        Ok(measure_params(&q, catalog, MeasureMode::Exact, Parallelism::Sequential)?.nc_pass_fraction)
    })
    .into_iter()
    .collect()
}

/// The candidate whose measured pass fraction is closest to `target`
/// (smallest candidate on ties), with that fraction.
pub fn closest(candidates: &[Scalar], fractions: &[f64], target: f64) -> Option<(Scalar, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in fractions.iter().enumerate() {
        let d = (f - target).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| (candidates[i].clone(), fractions[i]))
}

#[derive(Debug, Clone)]
pub enum SweepPoints {
    /// Explicit X values.
    Values(Vec<Scalar>),
    /// Target pass fractions; X is searched over the distinct values of
    /// `column` in the inner table.
    Targets { targets: Vec<f64>, column: String },
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub template: String,
    pub points: SweepPoints,
    pub kinds: Vec<PlanKind>,
    pub repetitions: usize,
    pub warmup: usize,
    pub options: PlanOptions,
    pub parallelism: Parallelism,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::Config("at least one plan kind is required".into()));
        }
        if let SweepPoints::Targets { targets, .. } = &self.points {
            if let Some(t) = targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                return Err(Error::Config(format!("target {t} is not a fraction")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub x: Scalar,
    pub measured: f64,
    pub kind: PlanKind,
    pub run_idx: usize,
    pub wall_millis: f64,
    pub inner_invocations: u64,
    pub inner_rows_scanned: u64,
    pub result_rows: usize,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub target: Option<f64>,
    pub x: Scalar,
    pub measured: f64,
    pub estimate: CostEstimate,
    pub chosen: PlanKind,
    /// Median wall time in milliseconds per plan kind, in config order.
    pub medians: Vec<(PlanKind, f64)>,
}

impl SweepPoint {
    pub fn median_of(&self, kind: PlanKind) -> Option<f64> {
        self.medians.iter().find(|(k, _)| *k == kind).map(|(_, m)| *m)
    }

    pub fn fastest(&self) -> PlanKind {
        self.medians
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one plan kind")
            .0
    }

    /// LP median over CACHED median, when both ran.
    pub fn lp_over_cached(&self) -> Option<f64> {
        Some(self.median_of(PlanKind::Lp)? / self.median_of(PlanKind::Cached)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub points: Vec<SweepPoint>,
}

/// Runs every plan kind at every sweep point. Plan runs are strictly
/// sequential; only the X search uses `cfg.parallelism`. Repetition `r` of
/// every (point, kind) pair runs before repetition `r + 1` of any.
pub fn sweep(cfg: &SweepConfig, catalog: &Catalog) -> Result<SweepReport> {
    cfg.validate()?;
    let probe_query = query_for(&cfg.template, &Scalar::Int(0))?;
    let points: Vec<(Option<f64>, Scalar)> = match &cfg.points {
        SweepPoints::Values(xs) => xs.iter().map(|x| (None, x.clone())).collect(),
        SweepPoints::Targets { targets, column } => {
            let candidates = candidate_values(catalog, &probe_query.inner_table, column)?;
            let fractions = pass_fractions(&cfg.template, catalog, &candidates, cfg.parallelism)?;
            targets
                .iter()
                .map(|&t| {
                    closest(&candidates, &fractions, t)
                        .map(|(x, _)| (Some(t), x))
                        .ok_or_else(|| Error::Config(format!("column `{column}` has no values")))
                })
                .collect::<Result<_>>()?
        }
    };

    struct Prepared {
        target: Option<f64>,
        x: Scalar,
        query: SubqueryQuery,
        params: CostParams,
        rows: Option<usize>,
        walls: Vec<Vec<f64>>,
    }
    let mut prepared = points
        .into_iter()
        .map(|(target, x)| {
            let query = query_for(&cfg.template, &x)?;
            let params = measure_params(&query, catalog, MeasureMode::Exact, cfg.parallelism)?;
            Ok(Prepared { target, x, query, params, rows: None, walls: vec![Vec::new(); cfg.kinds.len()] })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = SweepReport::default();
    for p in &prepared {
        for &kind in &cfg.kinds {
            for _ in 0..cfg.warmup {
                time_plan(&p.query, catalog, kind, cfg.options)?;
            }
        }
    }
    // Round-robin over points and kinds so slow drift in machine speed is
    // spread across the whole sweep instead of landing on one point.
    for run_idx in 0..cfg.repetitions {
        for p in prepared.iter_mut() {
            for (k, &kind) in cfg.kinds.iter().enumerate() {
                let run = time_plan(&p.query, catalog, kind, cfg.options)?;
                let expected = *p.rows.get_or_insert(run.result_rows);
                if expected != run.result_rows {
                    return Err(Error::Invariant(format!(
                        "plan {kind} returned {} rows at X = {}, other plans {expected}",
                        run.result_rows, p.x
                    )));
                }
                let wall_millis = run.wall.as_secs_f64() * 1000.0;
                p.walls[k].push(wall_millis);
                report.runs.push(SweepRun {
                    x: p.x.clone(),
                    measured: p.params.nc_pass_fraction,
                    kind,
                    run_idx,
                    wall_millis,
                    inner_invocations: run.stats.inner_invocations,
                    inner_rows_scanned: run.stats.inner_rows_scanned,
                    result_rows: run.result_rows,
                });
            }
        }
    }
    for p in prepared {
        report.points.push(SweepPoint {
            target: p.target,
            measured: p.params.nc_pass_fraction,
            estimate: estimate(&p.params),
            chosen: choose_plan(&p.query, &p.params),
            medians: cfg.kinds.iter().copied().zip(p.walls.iter().map(|w| median(w))).collect(),
            x: p.x,
        });
    }
    Ok(report)
}

pub const RUNS_HEADER: &str = "x_value,measured_nc_pass_fraction,plan_kind,run_idx,wall_millis,inner_invocations,inner_rows_scanned,result_rows";
pub const SUMMARY_HEADER: &str = "target,x_value,measured_nc_pass_fraction,est_naive,est_cached,est_proposed,chosen_kind,plan_kind,median_wall_millis,fastest_kind,lp_over_cached";

fn csv_scalar(s: &Scalar) -> String {
    match s {
        Scalar::Text(t) => t.clone(),
        other => other.to_string(),
    }
}

pub fn write_runs_csv(w: &mut dyn Write, report: &SweepReport) -> std::io::Result<()> {
    writeln!(w, "{RUNS_HEADER}")?;
    for r in &report.runs {
        writeln!(
            w,
            "{},{:.6},{},{},{:.3},{},{},{}",
            csv_scalar(&r.x),
            r.measured,
            r.kind,
            r.run_idx,
            r.wall_millis,
            r.inner_invocations,
            r.inner_rows_scanned,
            r.result_rows
        )?;
    }
    Ok(())
}

/// One line per (point, plan kind).
pub fn write_summary_csv(w: &mut dyn Write, report: &SweepReport) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for p in &report.points {
        let ratio = p.lp_over_cached().map_or(String::new(), |r| format!("{r:.4}"));
        for (kind, m) in &p.medians {
            writeln!(
                w,
                "{},{},{:.6},{:.1},{:.1},{:.1},{},{},{:.3},{},{}",
                p.target.map_or(String::new(), |t| t.to_string()),
                csv_scalar(&p.x),
                p.measured,
                p.estimate.naive,
                p.estimate.cached,
                p.estimate.proposed,
                p.chosen,
                kind,
                m,
                p.fastest(),
                ratio
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMaxRow {
    pub scan_index: usize,
    pub inner_position: Position,
    pub running_max: f64,
}

/// Running maximum of the inner value over the NC-passing inner rows, in
/// storage order.
pub fn running_max(q: &SubqueryQuery, catalog: &Catalog) -> Result<Vec<RunMaxRow>> {
    if q.op != SetPredicateOp::LtSome {
        return Err(Error::Planning(format!(
            "running maximum needs a lt_some query, got {}",
            q.op
        )));
    }
    q.validate(catalog)?;
    let inner = catalog.get(&q.inner_table)?;
    let all: Vec<Position> = (0..inner.row_count() as Position).collect();
    let nc = CompiledExpr::compile(&q.nc, &inner, None, &[])?;
    let value = CompiledExpr::compile(&q.inner_value, &inner, None, &[])?;
    let mask = nc.eval_mask(&inner, &all, &[])?;
    let kept: Vec<Position> = all.into_iter().zip(mask).filter_map(|(p, m)| m.then_some(p)).collect();
    let values = value.eval(&inner, &kept, &[])?;
    let mut out = Vec::with_capacity(kept.len());
    let mut max = f64::NEG_INFINITY;
    for (i, &p) in kept.iter().enumerate() {
        let v = values
            .scalar(i)
            .and_then(|s| s.as_f64())
            .ok_or_else(|| Error::Type("running maximum needs a numeric inner value".into()))?;
        max = max.max(v);
        out.push(RunMaxRow {
            scan_index: i,
            inner_position: p,
            running_max: max,
        });
    }
    Ok(out)
}

pub const RUNMAX_HEADER: &str = "scan_index,inner_position,running_max";

pub fn write_runmax_csv(w: &mut dyn Write, rows: &[RunMaxRow]) -> std::io::Result<()> {
    writeln!(w, "{RUNMAX_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{:?}", r.scan_index, r.inner_position, r.running_max)?;
    }
    Ok(())
}

/// `rows=.. final_max=.. reached_at_scan_index=.. reached_at_fraction=..`.
pub fn runmax_summary(rows: &[RunMaxRow]) -> String {
    let Some(last) = rows.last() else {
        return "rows=0 final_max= reached_at_scan_index= reached_at_fraction=".into();
    };
    let first = rows
        .iter()
        .position(|r| r.running_max == last.running_max)
        .expect("last row reaches the final maximum");
    format!(
        "rows={} final_max={:?} reached_at_scan_index={} reached_at_fraction={:.4}",
        rows.len(),
        last.running_max,
        first,
        first as f64 / rows.len() as f64
    )
}
