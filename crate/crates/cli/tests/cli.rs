use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn orderstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orderstat"))
        .args(args)
        .env_remove("ORDERSTAT_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = orderstat(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every output file except the run manifest, which records wall-clock times.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run_manifest.json")
        .map(|p| (p.clone(), std::fs::read(&p).unwrap()))
        .map(|(p, b)| (p.strip_prefix(dir).unwrap().to_path_buf(), b))
        .collect()
}

#[test]
fn zero_hours_exits_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    let res = orderstat(&["weather", "synth", "--hours", "0", "--seed", "1", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.join("weather.csv").exists());
}

#[test]
fn single_run_per_design_point_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let res = orderstat(&["trainset", "--n", "5", "--m", "1", "--seed", "1", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn non_empty_output_requires_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    ok(&["weather", "synth", "--hours", "10", "--seed", "1", "--out", s(&out)]);
    let again = orderstat(&["weather", "synth", "--hours", "10", "--seed", "2", "--out", s(&out)]);
    assert_eq!(again.status.code(), Some(2));
    ok(&["weather", "synth", "--hours", "10", "--seed", "2", "--out", s(&out), "--force"]);
}

#[test]
fn weather_rerun_is_byte_identical_and_loadable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&["weather", "synth", "--hours", "219000", "--seed", "7", "--out", s(&a)]);
    ok(&["weather", "synth", "--hours", "219000", "--seed", "7", "--out", s(&b)]);
    assert_eq!(snapshot(&a), snapshot(&b));
    let csv = std::fs::read_to_string(a.join("weather.csv")).unwrap();
    assert_eq!(csv.lines().count(), 219_001);
    assert!(a.join("run_manifest.json").exists());
    ok(&["weather", "load", "--input", s(&a.join("weather.csv")), "--out", s(&c)]);
    assert_eq!(std::fs::read(c.join("weather.csv")).unwrap(), csv.as_bytes());
}

#[test]
fn missing_model_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("q");
    let res = orderstat(&[
        "qoi", "--source", "surrogate", "--model", s(&tmp.path().join("nope")), "--hours", "24",
        "--k", "1", "--m", "1", "--seed", "1", "--out", s(&out),
    ]);
    assert!(!res.status.success());
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name);
    ok(&["trainset", "--n", "40", "--m", "3", "--seed", "2", "--out", s(&d("table"))]);
    let table = d("table").join("training_table.csv");
    ok(&[
        "train", "--table", s(&table), "--family", "weibull", "--seed", "3", "--restarts", "1",
        "--out", s(&d("model")),
    ]);
    let models = std::fs::read_dir(d("model"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("weibull_") || n == "l.json")
        .count();
    assert_eq!(models, 3);
    assert!(d("model").join("manifest.json").exists());

    ok(&["eval", "--table", s(&table), "--model", s(&d("model")), "--include-noise", "--out", s(&d("eval"))]);
    assert!(d("eval").join("eval.json").exists());

    let qoi = |out: &str| {
        ok(&[
            "qoi", "--source", "surrogate", "--model", s(&d("model")), "--hours", "24", "--k", "1",
            "--m", "1", "--seed", "5", "--out", s(&d(out)),
        ])
    };
    qoi("q1");
    qoi("q2");
    assert_eq!(snapshot(&d("q1")), snapshot(&d("q2")));
    for f in ["yk_samples.csv", "ranks.csv", "summary.json", "run_manifest.json"] {
        assert!(d("q1").join(f).exists(), "{f}");
    }

    ok(&["compare", s(&d("q1")), s(&d("q2")), "--out", s(&d("cmp"))]);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d("cmp").join("report.json")).unwrap()).unwrap();
    assert_eq!(report["relative_mean_difference"], 0.0);
}
