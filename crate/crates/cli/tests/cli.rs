use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const INSTANCE: &str = r#"{"arms": [
    {"tau": 0.1, "penalty": 0.5, "dist": {"kind": "deterministic", "params": {"value": 0.9}}},
    {"tau": 0.1, "penalty": 0.5, "dist": {"kind": "gaussian", "params": {"mean": 0.5, "variance": 0.01}}},
    {"tau": 0.1, "penalty": 0.5, "dist": {"kind": "beta", "params": {"alpha": 2.0, "beta": 8.0}}}
]}"#;

fn penband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penband"))
        .args(args)
        .env_remove("PENBAND_OUT")
        .env_remove("PENBAND_MOVIELENS_RATINGS")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> serde_json::Value {
    let out = penband(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write_instance(dir: &Path) -> String {
    let path = dir.join("inst.json");
    fs::write(&path, INSTANCE).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn prophet_reports_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_instance(dir.path());
    let v = ok_json(&["prophet", "--config", &cfg, "--T", "100"]);
    let y: Vec<f64> = serde_json::from_value(v["y"].clone()).unwrap();
    assert!((y[0] - 0.9).abs() < 1e-12 && y[1] == 0.1 && y[2] == 0.0);
    assert!((v["l_star"].as_f64().unwrap() - 9.0).abs() < 1e-9);
    assert_eq!(v["class"][1], "cr");
    assert_eq!(v["class"][2], "non-cr");
}

#[test]
fn bounds_reports_all_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_instance(dir.path());
    let v = ok_json(&["bounds", "--config", &cfg, "--T", "1000"]);
    assert!(v["gap_dependent"]["value"].as_f64().unwrap() > 0.0);
    assert!(v["gap_independent"].as_f64().unwrap() > 0.0);
    assert_eq!(v["maximal_deficit"].as_array().unwrap().len(), 2);
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_instance(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut summaries = Vec::new();
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let v = ok_json(&[
            "run",
            "--config",
            &cfg,
            "--policy",
            "soft-ucb",
            "--T",
            "500",
            "--trace-deficits",
            "--replications",
            "5",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(v["seed"], 42);
        summaries.push(v);
    }
    assert_eq!(summaries[0], summaries[1]);
    for name in ["trajectory.csv", "summary.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let trajectory = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(trajectory.lines().count(), 501);
    assert!(trajectory
        .starts_with("config_hash,seed,replication,t,arm,reward,deficit_0,deficit_1,deficit_2\n"));
    assert_eq!(
        fs::read_to_string(a.join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        6
    );

    let other_seed = dir.path().join("c");
    ok_json(&[
        "run",
        "--config",
        &cfg,
        "--policy",
        "soft-ucb",
        "--T",
        "500",
        "--trace-deficits",
        "--seed",
        "7",
        "--out",
        other_seed.to_str().unwrap(),
    ]);
    assert_ne!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(other_seed.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let status = penband(&[
        "sweep",
        "--setting",
        "2a",
        "--T",
        "400",
        "--replications",
        "2",
        "--eta-grid",
        "0.5,1",
        "--policies",
        "ht-ucb",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let csv = out.join("unfairness.csv");
    assert_eq!(
        fs::read_to_string(&csv).unwrap().lines().count(),
        1 + 2 * 2 * 8
    );
    assert!(out.join("manifest.json").is_file());

    let svg = dir.path().join("plots/u.svg");
    let plot = penband(&[
        "plot",
        "--csv",
        csv.to_str().unwrap(),
        "--kind",
        "unfairness-path",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(
        plot.status.success(),
        "{}",
        String::from_utf8_lossy(&plot.stderr)
    );
    assert!(String::from_utf8_lossy(&plot.stderr).contains("8 series"));
    assert!(svg.is_file());

    let bad = penband(&[
        "plot",
        "--csv",
        csv.to_str().unwrap(),
        "--kind",
        "regret-vs-T",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("schema"));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let unknown = penband(&["sweep", "--setting", "6", "--out", out.to_str().unwrap()]);
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown setting"));
    assert!(!out.exists());

    let no_ratings = penband(&["sweep", "--setting", "3", "--out", out.to_str().unwrap()]);
    assert!(!no_ratings.status.success());

    let cfg = write_instance(dir.path());
    let bad_policy = penband(&["run", "--config", &cfg, "--policy", "greedy", "--T", "10"]);
    assert!(!bad_policy.status.success());
    let short = penband(&[
        "run",
        "--config",
        &cfg,
        "--policy",
        "ucb1",
        "--T",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!short.status.success());
}

#[test]
fn ingest_writes_a_loadable_instance() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("ratings.dat");
    let mut text = String::new();
    for user in 0..4 {
        text.push_str(&format!("{user}::1::5::1\n{user}::2::{}::1\n", user + 1));
    }
    text.push_str("9::3::5::1\n");
    fs::write(&ratings, text).unwrap();
    let out = dir.path().join("ml.json");
    let v = ok_json(&[
        "ingest-movielens",
        "--ratings",
        ratings.to_str().unwrap(),
        "--min-count",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--penalty",
        "0.2",
    ]);
    assert_eq!(v["arms"], 2);
    assert_eq!(v["movie_ids"], serde_json::json!([1, 2]));
    let p = ok_json(&["prophet", "--config", out.to_str().unwrap()]);
    assert_eq!(p["k"], 2);
    assert_eq!(p["mu_star"], 1.0);

    let at_least = ok_json(&[
        "ingest-movielens",
        "--ratings",
        ratings.to_str().unwrap(),
        "--min-count",
        "4",
        "--at-least",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(at_least["arms"], 2);
    let strict = penband(&[
        "ingest-movielens",
        "--ratings",
        ratings.to_str().unwrap(),
        "--min-count",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!strict.status.success());
}
