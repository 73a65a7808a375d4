//! End-to-end runs of the `dper` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const IRIS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/iris.csv");

fn dper(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dper"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim_end()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_complete_iris_pooled() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("est.json");
    let out = dper(&[
        "estimate",
        "--input",
        IRIS,
        "--label-col",
        "class",
        "--regime",
        "multi-equal",
        "--output",
        path_str(&out_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["regime"], "multi_equal");
    assert_eq!(doc["diagnostics"]["fallback_count"], 0);
    assert_eq!(doc["means"].as_array().unwrap().len(), 3);
    let cov = doc["covariances"][0].as_array().unwrap();
    assert_eq!(cov.len(), 4);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(cov[i][j], cov[j][i]);
        }
    }
    assert!(doc["timing"]["estimate_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn fully_missing_column_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gap.csv");
    fs::write(&input, "width,height,y\n1,,a\n2,,b\n3,,a\n").unwrap();
    let out = dper(&["estimate", "--input", path_str(&input), "--label-col", "y"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "no_observed_data");
    assert_eq!(err["column"], "height");
}

#[test]
fn parse_errors_and_usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "a,b\n1,2\n3,oops\n").unwrap();
    let out = dper(&["estimate", "--input", path_str(&input)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "parse");
    assert_eq!(err["line"], 3);

    let out = dper(&["estimate", "--regime", "bogus", "--input", path_str(&input)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn mask_rate_zero_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let masked = dir.path().join("m.csv");
    let out = dper(&[
        "mask",
        "--input",
        IRIS,
        "--label-col",
        "class",
        "--rate",
        "0",
        "--seed",
        "1",
        "--output",
        path_str(&masked),
    ]);
    assert!(out.status.success());
    let parse = |text: &str| -> Vec<Vec<String>> {
        text.lines()
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    };
    let original = parse(&fs::read_to_string(IRIS).unwrap());
    let written = parse(&fs::read_to_string(&masked).unwrap());
    assert_eq!(original.len(), written.len());
    for (a, b) in original.iter().zip(&written).skip(1) {
        for (x, y) in a.iter().zip(b) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(u), Ok(v)) => assert_eq!(u, v),
                _ => assert_eq!(x, y),
            }
        }
    }
}

#[test]
fn mask_is_reproducible_and_near_the_rate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = dper(&[
            "mask",
            "--input",
            IRIS,
            "--label-col",
            "class",
            "--rate",
            "0.5",
            "--seed",
            "7",
            "--output",
            path_str(p),
        ]);
        assert!(out.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let cells: Vec<&str> = text.lines().skip(1).flat_map(|l| l.split(',').take(4)).collect();
    let missing = cells.iter().filter(|c| c.is_empty()).count() as f64;
    let n = cells.len() as f64;
    let sd = (n * 0.25).sqrt();
    assert!((missing - 0.5 * n).abs() <= 3.0 * sd, "{missing} of {n}");
    assert!(
        text.lines().skip(1).all(|l| !l.ends_with(',')),
        "labels stay intact"
    );
}

#[test]
fn mask_rejects_data_with_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gap.csv");
    fs::write(&input, "a,b\n1,\n2,3\n").unwrap();
    let out = dper(&[
        "mask",
        "--input",
        path_str(&input),
        "--rate",
        "0.2",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "invalid_input");
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("bench.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn bench_at_rate_zero_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "datasets = [\"iris\"]\nrates = [0.0]\nseeds = [1]\nmethods = [\"dper\", \"listwise\", \"mean-impute\"]\nregime = \"multi_unequal\"\n",
    );
    let out_dir = dir.path().join("out");
    let out = dper(&[
        "bench",
        "--config",
        path_str(&config),
        "--output-dir",
        path_str(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let r: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
        assert!(r < 1e-9, "{row}");
    }
    for name in ["report.json", "summary.txt", "timings.csv"] {
        assert!(out_dir.join(name).exists());
    }
}

#[test]
fn bench_reports_are_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "datasets = [\"iris\", \"wine\"]\nrates = [0.2, 0.8]\nseeds = [0, 1, 2]\nmethods = [\"dper\", \"listwise\", \"mean-impute\"]\nregime = \"multi-equal\"\n",
    );
    let run = |threads: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = dper(&[
            "bench",
            "--config",
            path_str(&config),
            "--output-dir",
            path_str(&out_dir),
            "--threads",
            threads,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        ["report.csv", "report.json", "summary.txt"].map(|f| fs::read(out_dir.join(f)).unwrap())
    };
    let one = run("1", "one");
    assert_eq!(one, run("1", "again"));
    assert_eq!(one, run("0", "all"));
    assert_eq!(one, run("4", "four"));
}

#[test]
fn bench_keeps_going_after_failures() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "datasets = [\"wine\"]\nrates = [0.8]\nseeds = [0]\nmethods = [\"listwise\", \"dper\"]\nregime = \"multi_unequal\"\n",
    );
    let out_dir = dir.path().join("out");
    let out = dper(&[
        "bench",
        "--config",
        path_str(&config),
        "--output-dir",
        path_str(&out_dir),
    ]);
    assert!(out.status.success());
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(
        report.contains("listwise,multi_unequal,NA,NA: insufficient_complete_rows"),
        "{report}"
    );
    assert!(report.contains("dper,multi_unequal,0."), "{report}");
}

#[test]
fn bench_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "datasets = [\"iris\"]\nrates = [0.2]\nseeds = [0]\nmethods = [\"dper\"]\nregime = \"single\"\ncolour = 1\n");
    let out = dper(&[
        "bench",
        "--config",
        path_str(&config),
        "--output-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "config");
}
