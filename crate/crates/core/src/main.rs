use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ncsplit::bench::{self, SweepConfig, SweepPoints};
use ncsplit::costmodel::{candidate_costs, choose_plan, estimate, measure_params, MeasureMode};
use ncsplit::exec::ExecFlags;
use ncsplit::oracle::oracle_eval;
use ncsplit::par::Parallelism;
use ncsplit::planner::{build_plan, classify, parse_query, Catalog, PlanKind, PlanOptions, SubqueryQuery};
use ncsplit::storage::{self, GenSpec};
use ncsplit::types::{Scalar, DEFAULT_BLOCK_CAPACITY};
use ncsplit::workload::{instantiate, EVALUATION_QUERY};
use ncsplit::{Error, Result};

#[derive(Parser)]
#[command(name = "ncsplit", version, about = "Compound-predicate subquery engine and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate part.csv and lineitem.csv.
    Gen(GenArgs),
    /// Run a query under one plan kind.
    Run(RunArgs),
    /// Time plan kinds across NC pass fractions.
    Sweep(SweepArgs),
    /// Print cost parameters, estimates and the chosen plan.
    Explain(ExplainArgs),
    /// Running maximum of the inner value along the NC branch scan.
    Runmax(RunmaxArgs),
    /// Evaluate a query with the reference evaluator.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Tpch,
    /// Early-exit stress data (4000 parts; NC values 1 and 2).
    Adversarial,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0.02)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "tpch")]
    dataset: Dataset,
}

#[derive(Args)]
struct QueryArgs {
    /// Query document; the built-in evaluation query when omitted.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Value substituted for `${X}` in the query text.
    #[arg(long)]
    x: Option<String>,
    /// Directory holding `<table>.csv` files.
    #[arg(long, default_value = "data")]
    data: PathBuf,
}

#[derive(Args)]
struct ExecArgs {
    #[arg(long)]
    early_exit: bool,
    #[arg(long)]
    memoize: bool,
    #[arg(long, default_value_t = DEFAULT_BLOCK_CAPACITY)]
    block: usize,
}

impl ExecArgs {
    fn options(&self) -> PlanOptions {
        PlanOptions {
            flags: ExecFlags {
                early_exit: self.early_exit,
                memoize: self.memoize,
            },
            capacity: self.block,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value = "lp")]
    plan: String,
    #[command(flatten)]
    exec: ExecArgs,
    /// Write result rows to this CSV file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Query template with `${X}`; the built-in evaluation query when omitted.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Data directory; data is generated in memory from --scale/--seed when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,0.999", conflicts_with = "x_values")]
    targets: Vec<f64>,
    /// Explicit X values instead of targets.
    #[arg(long, value_delimiter = ',')]
    x_values: Vec<String>,
    /// Inner column whose distinct values are the X candidates.
    #[arg(long, default_value = "suppkey")]
    x_column: String,
    #[arg(long, value_delimiter = ',', default_value = "naive,cached,lp")]
    plans: Vec<String>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[command(flatten)]
    exec: ExecArgs,
    /// Per-run CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-point summary CSV with estimates and medians.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Run the X search sequentially.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Estimate the pass fraction from this many sampled outer rows.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    cost_nc: Option<f64>,
    #[arg(long)]
    cost_c: Option<f64>,
}

#[derive(Args)]
struct RunmaxArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    dump: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn template(path: Option<&Path>) -> Result<String> {
    path.map_or_else(|| Ok(EVALUATION_QUERY.to_string()), read_text)
}

fn load_query(args: &QueryArgs) -> Result<SubqueryQuery> {
    let text = template(args.query.as_deref())?;
    let text = match &args.x {
        Some(x) => instantiate(&text, x),
        None => text,
    };
    parse_query(&text)
}

fn load_catalog(dir: &Path, tables: &[&str]) -> Result<Catalog> {
    let mut catalog = Catalog::new();
    for name in tables {
        catalog.insert(Arc::new(storage::load_table(dir, name)?));
    }
    Ok(catalog)
}

fn query_and_data(args: &QueryArgs) -> Result<(SubqueryQuery, Catalog)> {
    let q = load_query(args)?;
    let catalog = load_catalog(&args.data, &[&q.outer_table, &q.inner_table])?;
    Ok((q, catalog))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source: e,
    }
}

fn dump_rows(path: &Path, columns: &[String], rows: &[Vec<Scalar>]) -> Result<()> {
    let err = write_err(Some(path));
    let mut w = output(Some(path))?;
    writeln!(w, "{}", columns.join(",")).map_err(&err)?;
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|s| match s {
                Scalar::Float(v) => format!("{v:?}"),
                Scalar::Int(v) => v.to_string(),
                Scalar::Text(t) => t.clone(),
            })
            .collect();
        writeln!(w, "{}", cells.join(",")).map_err(&err)?;
    }
    w.flush().map_err(&err)
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let spec = GenSpec::new(args.scale, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let (part, lineitem) = match args.dataset {
        Dataset::Tpch => (storage::generate_part(&spec), storage::generate_lineitem(&spec)),
        Dataset::Adversarial => {
            let adv = storage::adversarial_dataset(args.seed);
            println!("lucky_x={}", adv.lucky);
            println!("unlucky_x={}", adv.unlucky);
            (adv.part, adv.lineitem)
        }
    };
    for t in [&part, &lineitem] {
        let path = args.out.join(format!("{}.csv", t.name()));
        storage::save_csv(t, &path)?;
        println!("{}={} rows={}", t.name(), path.display(), t.row_count());
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let (q, catalog) = query_and_data(&args.query)?;
    let kind: PlanKind = args.plan.parse()?;
    let start = std::time::Instant::now();
    let out = build_plan(&q, &catalog, kind, args.exec.options())?.execute()?;
    let wall = start.elapsed();
    println!("plan={kind}");
    println!("class={}", classify(&q)?);
    println!("rows={}", out.positions.len());
    println!("wall_millis={:.3}", wall.as_secs_f64() * 1000.0);
    println!("inner_invocations={}", out.stats.inner_invocations);
    println!("inner_rows_scanned={}", out.stats.inner_rows_scanned);
    println!("correlated_rows_scanned={}", out.stats.correlated_rows_scanned);
    println!("nc_digest_builds={}", out.stats.nc_digest_builds);
    println!("memo_hits={}", out.stats.memo_hits);
    for (op, n) in &out.stats.emitted {
        println!("emitted.{op}={n}");
    }
    if let Some(path) = &args.dump {
        dump_rows(path, &q.output_columns, &out.rows)?;
    }
    Ok(())
}

fn parse_x(text: &str) -> Scalar {
    if let Ok(v) = text.parse() {
        Scalar::Int(v)
    } else if let Ok(v) = text.parse::<f64>() {
        Scalar::Float(v)
    } else {
        Scalar::Text(text.to_string())
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let template = template(args.query.as_deref())?;
    let probe = bench::query_for(&template, &Scalar::Int(0))?;
    let catalog = match &args.data {
        Some(dir) => load_catalog(dir, &[&probe.outer_table, &probe.inner_table])?,
        None => {
            let spec = GenSpec::new(args.scale, args.seed)?;
            let mut c = Catalog::new();
            c.insert(Arc::new(storage::generate_part(&spec)));
            c.insert(Arc::new(storage::generate_lineitem(&spec)));
            c
        }
    };
    let points = if args.x_values.is_empty() {
        SweepPoints::Targets {
            targets: args.targets.clone(),
            column: args.x_column.clone(),
        }
    } else {
        SweepPoints::Values(args.x_values.iter().map(|x| parse_x(x)).collect())
    };
    let cfg = SweepConfig {
        template,
        points,
        kinds: args.plans.iter().map(|p| p.parse()).collect::<Result<_>>()?,
        repetitions: args.reps,
        warmup: args.warmup,
        options: args.exec.options(),
        parallelism: if args.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        },
    };
    let report = bench::sweep(&cfg, &catalog)?;
    let out = args.out.as_deref();
    let mut w = output(out)?;
    bench::write_runs_csv(&mut w, &report).map_err(write_err(out))?;
    w.flush().map_err(write_err(out))?;
    if let Some(path) = &args.summary {
        let mut w = output(Some(path))?;
        bench::write_summary_csv(&mut w, &report).map_err(write_err(Some(path)))?;
        w.flush().map_err(write_err(Some(path)))?;
    }
    Ok(())
}

fn cmd_explain(args: &ExplainArgs) -> Result<()> {
    let (q, catalog) = query_and_data(&args.query)?;
    let class = classify(&q)?;
    let mode = match args.sample {
        Some(size) => MeasureMode::Sample { size, seed: args.seed },
        None => MeasureMode::Exact,
    };
    let mut params = measure_params(&q, &catalog, mode, Parallelism::Parallel)?;
    if let Some(c) = args.cost_nc {
        params.cost_nc = c;
    }
    if let Some(c) = args.cost_c {
        params.cost_c = c;
    }
    params.validate()?;
    let e = estimate(&params);
    println!("class={class}");
    println!("n={}", params.n);
    println!("m={}", params.m);
    println!("cost_nc={}", params.cost_nc);
    println!("cost_c={}", params.cost_c);
    println!("nc_pass_fraction={:.6}", params.nc_pass_fraction);
    println!("nc_inner_selectivity={:.6}", params.nc_inner_selectivity);
    println!("measure_mode={}", if args.sample.is_some() { "sample" } else { "exact" });
    println!("estimate_naive={}", e.naive);
    println!("estimate_cached={}", e.cached);
    println!("estimate_proposed={}", e.proposed);
    for (kind, cost) in candidate_costs(q.connective, &params) {
        println!("candidate.{kind}={cost}");
    }
    let legal: Vec<String> = PlanKind::legal(q.connective).iter().map(|k| k.to_string()).collect();
    println!("legal={}", legal.join(","));
    println!("chosen={}", choose_plan(&q, &params));
    Ok(())
}

fn cmd_runmax(args: &RunmaxArgs) -> Result<()> {
    let (q, catalog) = query_and_data(&args.query)?;
    let rows = bench::running_max(&q, &catalog)?;
    let out = args.out.as_deref();
    let mut w = output(out)?;
    bench::write_runmax_csv(&mut w, &rows).map_err(write_err(out))?;
    w.flush().map_err(write_err(out))?;
    eprintln!("{}", bench::runmax_summary(&rows));
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let (q, catalog) = query_and_data(&args.query)?;
    let start = std::time::Instant::now();
    let out = oracle_eval(&q, &catalog)?;
    println!("rows={}", out.positions.len());
    println!("wall_millis={:.3}", start.elapsed().as_secs_f64() * 1000.0);
    if let Some(path) = &args.dump {
        dump_rows(path, &q.output_columns, &out.rows)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Runmax(a) => cmd_runmax(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
