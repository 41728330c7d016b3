use std::path::Path;
use std::process::{Command, Output};

fn ncsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncsplit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn gen(dir: &Path) {
    let out = ncsplit(&["gen", "--scale", "0.001", "--seed", "5", "--out", dir.to_str().unwrap()]);
    let text = stdout(&out);
    assert!(text.contains("rows=200"), "{text}");
    assert!(text.contains("rows=6000"), "{text}");
}

#[test]
fn plans_agree_with_oracle_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().to_str().unwrap();
    gen(tmp.path());

    let oracle_dump = tmp.path().join("oracle.csv");
    let oracle = stdout(&ncsplit(&["oracle", "--data", data, "--x", "3", "--dump", oracle_dump.to_str().unwrap()]));
    for plan in ["naive", "cached", "lp"] {
        let dump = tmp.path().join(format!("{plan}.csv"));
        let run = stdout(&ncsplit(&[
            "run", "--data", data, "--x", "3", "--plan", plan, "--dump", dump.to_str().unwrap(),
        ]));
        assert_eq!(field(&run, "plan"), plan);
        assert_eq!(field(&run, "class"), "4");
        assert_eq!(field(&run, "rows"), field(&oracle, "rows"));
        assert_eq!(std::fs::read_to_string(&dump).unwrap(), std::fs::read_to_string(&oracle_dump).unwrap());
    }
}

#[test]
fn memoize_counts_distinct_correlation_keys() {
    let tmp = tempfile::tempdir().unwrap();
    gen(tmp.path());
    let run = stdout(&ncsplit(&[
        "run", "--data", tmp.path().to_str().unwrap(), "--x", "3", "--plan", "cached", "--memoize",
    ]));
    let part = ncsplit::storage::load_table(tmp.path(), "part").unwrap();
    let ncsplit::types::ColumnData::Int(sizes) = &part.column("size").unwrap().data else { panic!() };
    let distinct: std::collections::BTreeSet<i64> = sizes.iter().copied().collect();
    assert_eq!(field(&run, "inner_invocations"), distinct.len().to_string());
    assert_eq!(field(&run, "memo_hits"), (sizes.len() - distinct.len()).to_string());
}

#[test]
fn explain_sweep_and_runmax_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().to_str().unwrap();
    gen(tmp.path());

    let explain = stdout(&ncsplit(&["explain", "--data", data, "--x", "3"]));
    assert_eq!(field(&explain, "n"), "200");
    assert_eq!(field(&explain, "m"), "6000");
    assert_eq!(field(&explain, "legal"), "naive,cached,lp");
    assert_eq!(field(&explain, "measure_mode"), "exact");
    let sampled = stdout(&ncsplit(&["explain", "--data", data, "--x", "3", "--sample", "50", "--seed", "9"]));
    assert_eq!(field(&sampled, "measure_mode"), "sample");

    let runs = tmp.path().join("runs.csv");
    let summary = tmp.path().join("summary.csv");
    stdout(&ncsplit(&[
        "sweep", "--data", data, "--x-values", "1,2", "--reps", "2", "--warmup", "0",
        "--out", runs.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
    ]));
    let runs = std::fs::read_to_string(runs).unwrap();
    assert!(runs.starts_with(ncsplit::bench::RUNS_HEADER));
    assert_eq!(runs.lines().count(), 1 + 2 * 3 * 2);
    let summary = std::fs::read_to_string(summary).unwrap();
    assert!(summary.starts_with(ncsplit::bench::SUMMARY_HEADER));

    let runmax = tmp.path().join("runmax.csv");
    let out = ncsplit(&["runmax", "--data", data, "--x", "3", "--out", runmax.to_str().unwrap()]);
    stdout(&out);
    let csv = std::fs::read_to_string(runmax).unwrap();
    assert!(csv.starts_with(ncsplit::bench::RUNMAX_HEADER));
    let maxes: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(!maxes.is_empty());
    assert!(maxes.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().to_str().unwrap();
    gen(tmp.path());
    let code = |args: &[&str]| ncsplit(args).status.code().unwrap();

    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["gen", "--scale", "0", "--out", data]), 2);
    assert_eq!(code(&["run", "--data", data]), 2, "missing ${{X}} value");
    assert_eq!(code(&["run", "--data", data, "--x", "3", "--plan", "bogus"]), 2);
    assert_eq!(code(&["run", "--data", "/nonexistent/dir", "--x", "3"]), 3);
    assert_eq!(code(&["run", "--data", data, "--x", "3", "--plan", "prefilter"]), 4);

    let query = tmp.path().join("q.toml");
    std::fs::write(
        &query,
        ncsplit::workload::EVALUATION_QUERY.replace("(col L.suppkey) ${X}", "(col L.suppkey) (corr P.size)"),
    )
    .unwrap();
    assert_eq!(code(&["explain", "--data", data, "--query", query.to_str().unwrap()]), 4);

    std::fs::write(tmp.path().join("part.csv"), "partkey,size\n1,2\n").unwrap();
    assert_eq!(code(&["run", "--data", data, "--x", "3"]), 3);
}
