use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dpmargin::data::{load_dataset, Format};

fn dpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpm")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = dpm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_two_cluster(dir: &Path) -> std::path::PathBuf {
    ok(&["gen", "--kind", "two_cluster", "--m", "60", "--dim", "2", "--separation", "1.0", "--spread", "0.2", "--seed", "3", "--out", s(dir)]);
    dir.join("dataset.csv")
}

#[test]
fn one_dimensional_dataset_has_the_expected_loss_at_ten() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--kind", "appendix_e", "--gamma", "0.1", "--m", "10000", "--seed", "7", "--out", s(dir.path())]);
    let data = load_dataset(&dir.path().join("dataset.csv"), Format::Csv).unwrap();
    assert_eq!(data.len(), 10_000);
    let wrong = data.linear_scores(&[10.0]).iter().filter(|&&u| u <= 0.0).count() as f64 / 1e4;
    assert!((wrong - 0.05).abs() <= 0.01, "{wrong}");
    assert!(dir.path().join("manifest.txt").exists());
}

#[test]
fn oversized_cover_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_two_cluster(dir.path());
    let out = dpm(&["train", "--algo", "pure-linear", "--data", s(&data), "--lambda", "100", "--rho", "0.01", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cover too large"));

    let out = dpm(&["train", "--algo", "nn", "--data", s(&data), "--layers", "3", "--width", "4", "--rho", "0.01", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn parameter_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_two_cluster(dir.path());
    assert_eq!(dpm(&["train", "--algo", "svm", "--data", s(&data)]).status.code(), Some(2));
    assert_eq!(dpm(&["train", "--algo", "pure-linear", "--data", s(&data), "--eps", "-1"]).status.code(), Some(2));
    assert_eq!(dpm(&["gen", "--kind", "spiral"]).status.code(), Some(2));
    assert_eq!(dpm(&["audit", "--mechanism", "laplace"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_and_manifest_replays_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_two_cluster(dir.path());
    let d = s(&data);
    let runs: [&[&str]; 5] = [
        &["--algo", "pure-linear", "--rho", "0.5", "--k", "2"],
        &["--algo", "eff-linear", "--rho", "0.2", "--delta", "1e-4"],
        &["--algo", "kernel", "--rho", "0.2", "--delta", "1e-4", "--features", "50"],
        &["--algo", "nn", "--rho", "0.2", "--k", "2", "--gamma", "1.0", "--eta", "4"],
        &["--algo", "label-dp", "--rho", "0.5", "--fat-dim", "1"],
    ];
    for (i, extra) in runs.iter().enumerate() {
        let a = dir.path().join(format!("a{i}"));
        let b = dir.path().join(format!("b{i}"));
        let c = dir.path().join(format!("c{i}"));
        for out in [&a, &b] {
            let mut args = vec!["train", "--data", d, "--seed", "11", "--out", s(out)];
            args.extend_from_slice(extra);
            ok(&args);
        }
        ok(&["--config", s(&a.join("manifest.txt")), "--out", s(&c)]);
        for name in ["model.txt", "report.md", "manifest.txt"] {
            let first = fs::read(a.join(name)).unwrap();
            assert_eq!(first, fs::read(b.join(name)).unwrap(), "{extra:?} {name} repeat");
            assert_eq!(first, fs::read(c.join(name)).unwrap(), "{extra:?} {name} replay");
        }
    }
}

#[test]
fn select_margin_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_two_cluster(dir.path());
    let sel = dir.path().join("sel");
    ok(&["select-margin", "--kind", "F1", "--data", s(&data), "--k", "2", "--nonprivate", "--seed", "2", "--out", s(&sel)]);
    let report = fs::read_to_string(sel.join("report.md")).unwrap();
    assert!(report.contains("NON-PRIVATE"));
    assert!(report.contains("= 2 (delta 0)"), "{report}");
    let bounds = fs::read_to_string(sel.join("bounds.csv")).unwrap();
    assert!(bounds.starts_with("rho,F,sensitivity,selected\n"));
    assert_eq!(bounds.lines().filter(|l| l.ends_with(",1")).count(), 1);
    assert!(fs::read_to_string(sel.join("manifest.txt")).unwrap().contains("\nnonprivate=true\n"));

    let rep = dir.path().join("rep");
    ok(&["report", "--model", s(&sel.join("model.txt")), "--data", s(&data), "--bounds", s(&sel.join("bounds.csv")), "--out", s(&rep)]);
    let text = fs::read_to_string(rep.join("report.md")).unwrap();
    assert!(text.contains("# Model report: pure-linear") && text.contains("## Margin bounds"));
}

#[test]
fn audit_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["audit", "--mechanism", "randomized-response", "--trials", "20000", "--seed", "1", "--out", s(dir.path())]);
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    assert!(csv.starts_with("bucket,count_S,count_S',log_ratio\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(fs::read_to_string(dir.path().join("report.md")).unwrap().contains("within"));
}

#[test]
fn thread_cap_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_two_cluster(dir.path());
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_dpm"))
            .env("DPM_THREADS", threads)
            .args(["train", "--algo", "nn", "--data", s(&data), "--rho", "0.2", "--k", "2", "--gamma", "1.0", "--out", s(&out)])
            .status()
            .unwrap();
        assert!(status.success());
        outs.push(fs::read(out.join("model.txt")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let bad = Command::new(env!("CARGO_BIN_EXE_dpm")).env("DPM_THREADS", "zero").args(["gen", "--kind", "appendix_e"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
