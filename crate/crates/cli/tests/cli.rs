use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn qht_writes_curve_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmc(&["qht", "--graph", "complete:5", "--marked", "first:1", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("qht_curve.csv")).unwrap();
    assert!(csv.starts_with("T,F,threshold,crossed\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("qht_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "qht");
    assert_eq!(summary["config"]["graph"], "complete:5");
    assert_eq!(summary["result"]["summary"]["within_bound"], true);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    for args in [
        vec!["qht", "--graph", "cycle:4", "--out", &out],
        vec!["qht", "--graph", "complete:4", "--marked", "7", "--out", &out],
        vec!["dqht", "--graph", "complete:6", "--p", "0.1", "--out", &out],
        vec!["dqht", "--p", "1.5", "--out", &out],
    ] {
        let o = qmc(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"graph\": \"complete:3\", \"nope\": 1}").unwrap();
    assert_eq!(code(&qmc(&["qht", "--config", &bad.display().to_string(), "--out", &out])), 2);
}

#[test]
fn verify_flags_a_non_stochastic_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    fs::write(&m, "[[0.5, 0.6], [1.0, 0.0]]").unwrap();
    let o = qmc(&["verify", "--matrix", &m.display().to_string(), "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("row-stochastic transition matrix"));
}

#[test]
fn verify_default_fixtures_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmc(&["verify", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{\"graph\": \"complete:4\", \"percolation\": {\"p\": 0.2}, \"mode\": \"mc\", \"samples\": 500}")
        .unwrap();
    let out = dir.path().join("run");
    let o = qmc(&["dqht", "--config", &cfg.display().to_string(), "--seed", "3", "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("dqht_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 3);
    assert_eq!(summary["config"]["samples"], 500);
    assert_eq!(summary["result"]["rows"][0]["p"], 0.2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    // Same output directory both times: the embedded config records it.
    let run = || {
        let out = dir.path().join("detect");
        let args = [
            "detect",
            "--graph",
            "complete:4",
            "--marked",
            "first:1",
            "--p",
            "0.05",
            "--trials",
            "300",
            "--seed",
            "11",
            "--out",
        ];
        let mut v: Vec<&str> = args.to_vec();
        let o = out_arg(&out);
        v.push(&o);
        assert_eq!(code(&qmc(&v)), 0);
        let mc = dir.path().join("mc");
        let o = out_arg(&mc);
        let args = [
            "dqht",
            "--graph",
            "complete:5",
            "--p",
            "0.01",
            "--mode",
            "mc",
            "--samples",
            "400",
            "--seed",
            "5",
            "--dump-operator",
            "--out",
            &o,
        ];
        assert_eq!(code(&qmc(&args)), 0);
        let mut bytes = fs::read(out.join("detect_report.json")).unwrap();
        for f in ["dqht_summary.json", "dqht_curve.csv", "ubar.csv", "ubar.json"] {
            bytes.extend(fs::read(mc.join(f)).unwrap());
        }
        bytes
    };
    let first = run();
    assert_eq!(first, run());
}
