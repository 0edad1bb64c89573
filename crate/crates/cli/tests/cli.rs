//! End-to-end runs of the `netgrowth` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

struct Run {
    ok: bool,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_netgrowth"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    Run {
        ok: out.status.success(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let r = run(args);
    assert!(r.ok, "{args:?} failed: {}", r.stderr);
    r.stdout
}

/// Value of `key=` on the last stdout line that has it.
fn field(stdout: &str, key: &str) -> String {
    let prefix = format!("{key}=");
    stdout
        .lines()
        .rev()
        .flat_map(|l| l.split_whitespace())
        .find_map(|w| w.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in {stdout:?}"))
        .to_string()
}

fn num(stdout: &str, key: &str) -> f64 {
    field(stdout, key).parse().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, model: &str, nodes: &str, seed: &str) -> PathBuf {
    let out = dir.join(name);
    ok(&[
        "generate", "--model", model, "--m", "3", "--nodes", nodes, "--seed", seed, "--out", s(&out),
    ]);
    out
}

fn data(path: &Path) -> [&str; 6] {
    ["--data", s(path), "--format", "stars", "--seed-through", "0"]
}

#[test]
fn generate_reports_sizes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.stars");
    let b = dir.path().join("b.stars");
    let args = |p: &Path| {
        ok(&[
            "generate", "--model", "0.5*BA+0.5*TRI", "--m", "2", "--nodes", "300", "--seed", "4",
            "--out", s(p),
        ])
    };
    let out = args(&a);
    args(&b);
    assert_eq!(num(&out, "nodes"), 300.0);
    assert_eq!(num(&out, "edges"), 10.0 + 2.0 * 295.0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn random_model_scores_c0_of_one() {
    let dir = tempfile::tempdir().unwrap();
    let stars = generate(dir.path(), "r.stars", "1*BA", "400", "1");
    let mut args = vec!["score"];
    args.extend(data(&stars));
    args.extend(["--model", "1*RAND"]);
    let out = ok(&args);
    assert_eq!(num(&out, "c0"), 1.0);
    assert_eq!(field(&out, "impossible"), "false");
}

#[test]
fn fit_recovers_degree_power_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let stars = generate(dir.path(), "ba.stars", "1*BA", "1500", "2");
    let fit = dir.path().join("fit.json");
    let mut args = vec!["fit"];
    args.extend(data(&stars));
    args.extend(["--grid-alpha", "-0.1:2.1:0.05", "--out", s(&fit)]);
    let out = ok(&args);
    assert!((num(&out, "alpha") - 1.0).abs() <= 0.15, "{out}");

    let mut args = vec!["score"];
    args.extend(data(&stars));
    args.extend(["--fit", s(&fit)]);
    let rescored = ok(&args);
    assert_eq!(field(&rescored, "logL"), field(&out, "logL"));
    assert_eq!(field(&rescored, "c0"), field(&out, "c0"));
}

#[test]
fn weight_fit_interval_fit_and_scan_agree() {
    let dir = tempfile::tempdir().unwrap();
    let stars = generate(dir.path(), "m.stars", "0.7*BA+0.3*RAND", "600", "3");
    let mut args = vec!["fit"];
    args.extend(data(&stars));
    args.extend(["--components", "BA,RAND", "--step", "0.05"]);
    let weights = ok(&args);

    let fit = dir.path().join("j1.json");
    let mut args = vec!["fit-intervals"];
    args.extend(data(&stars));
    args.extend(["--components", "BA,RAND", "--intervals", "1", "--step", "0.05", "--out", s(&fit)]);
    let one = ok(&args);
    assert_eq!(field(&weights, "logL"), field(&one, "logL"));

    let mut args = vec!["scan-j"];
    args.extend(data(&stars));
    args.extend(["--components", "BA,RAND", "--jmin", "1", "--jmax", "3", "--step", "0.05"]);
    let csv = ok(&args);
    let rows: Vec<&str> = csv.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(rows[0], "J,logL,c0");
    assert_eq!(rows.len(), 4);
    let ll: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(ll.windows(2).all(|w| w[1] >= w[0] - 1e-9));

    let mut args = vec!["wilks"];
    args.extend(data(&stars));
    args.extend(["--components", "BA,RAND", "--step", "0.05", "--j0", "1", "--j1", "2"]);
    let w = ok(&args);
    assert_eq!(num(&w, "df"), 1.0);
    let p = num(&w, "p");
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn wilks_from_numbers() {
    let out = ok(&["wilks", "--logl0", "-100", "--logl1", "-98.0794", "--l", "2", "--j0", "1", "--j1", "2"]);
    assert_eq!(num(&out, "df"), 1.0);
    assert!((num(&out, "statistic") - 3.8412).abs() < 1e-9);
    assert!((num(&out, "p") - 0.05).abs() < 1e-3);
}

#[test]
fn changepoint_on_a_switching_stream() {
    let dir = tempfile::tempdir().unwrap();
    let schedule = dir.path().join("sched.json");
    std::fs::write(
        &schedule,
        r#"{"mode":"increment_index","boundaries":[300],"intervals":["1*BA","1*RAND"]}"#,
    )
    .unwrap();
    let stars = dir.path().join("sw.stars");
    ok(&[
        "generate", "--schedule", s(&schedule), "--m", "3", "--increments", "600", "--seed", "5",
        "--out", s(&stars),
    ]);
    let mut args = vec!["fit-changepoint"];
    args.extend(data(&stars));
    args.extend(["--pre", "1*BA", "--post", "1*RAND", "--changepoint-grid", "200:400:1"]);
    let out = ok(&args);
    let t = num(&out, "T");
    assert!((t - 300.0).abs() <= 40.0, "T = {t}");
}

#[test]
fn stats_and_merge() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for seed in ["1", "2", "3"] {
        let stars = generate(dir.path(), &format!("{seed}.stars"), "1*BA", "300", seed);
        let csv = dir.path().join(format!("{seed}.csv"));
        let mut args = vec!["stats"];
        args.extend(data(&stars));
        args.extend(["--stride", "50", "--out", s(&csv)]);
        ok(&args);
        csvs.push(csv);
    }
    let text = std::fs::read_to_string(&csvs[0]).unwrap();
    assert!(text.lines().next().unwrap().contains("assortativity"));
    let merged = dir.path().join("merged.csv");
    let mut args = vec!["stats", "--merge"];
    args.extend(csvs.iter().map(|p| s(p)));
    args.extend(["--out", s(&merged)]);
    let out = ok(&args);
    assert_eq!(num(&out, "runs"), 3.0);
    let text = std::fs::read_to_string(&merged).unwrap();
    assert!(text.lines().next().unwrap().contains("_lo"));
}

#[test]
fn similarity_of_a_model_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let stars = generate(dir.path(), "g.stars", "1*BA", "200", "6");
    let out = ok(&[
        "similarity", "--data", s(&stars), "--format", "stars", "--at", "100", "--model", "1*BA",
        "--other", "1*BA",
    ]);
    assert!((num(&out, "sigma") - 1.0).abs() < 1e-12);
}

#[test]
fn ingest_cleans_an_edge_file() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("e.tsv");
    std::fs::write(&edges, "a\tb\t1\nb\tc\t2\nc\tc\t2\nb\ta\t3\nc\td\t3\nd\ta\t4\n").unwrap();
    let stars = dir.path().join("e.stars");
    let ops = dir.path().join("ops.json");
    let out = ok(&["ingest", "--data", s(&edges), "--out", s(&stars), "--operations-out", s(&ops)]);
    assert_eq!(num(&out, "nodes"), 4.0);
    assert!(ops.exists());
    let score = ok(&[
        "score", "--data", s(&stars), "--format", "stars", "--seed-through", "1", "--model", "1*RAND",
    ]);
    assert_eq!(num(&score, "c0"), 1.0);
}

#[test]
fn bad_input_is_reported_with_a_category() {
    let r = run(&["fit", "--no-such-flag"]);
    assert!(!r.ok);
    assert!(r.stderr.contains("--no-such-flag"));

    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("bad.tsv");
    std::fs::write(&edges, "a b 1\n").unwrap();
    let r = run(&["score", "--data", s(&edges), "--model", "1*BA"]);
    assert!(!r.ok);
    assert!(r.stderr.contains("error[parse]"), "{}", r.stderr);

    let stars = generate(dir.path(), "x.stars", "1*BA", "100", "1");
    let r = run(&["score", "--data", s(&stars), "--format", "stars", "--model", "1*XYZ"]);
    assert!(!r.ok);
    assert!(r.stderr.contains("error[model-spec]"), "{}", r.stderr);
}
