use std::fs;
use std::path::Path;
use std::process::Command;

use ethdyn_cli::records::{Manifest, ResultRecord, Status};
use serde_json::Value;

const SMALL: &str = r#"
[model]
geometry = "ladder"
n_left = 2
delta = 0.3
j_c = 0.3

[estimator]
n_samples = 3
t_min = 1.0
t_max = 10.0

[mod]
t_max = 5.0
n_times = 11

[sweep]
e_centers = [-1.0, 0.0, 1.0]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ethdyn"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).env("ETHDYN_THREADS", "1").output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn record(dir: &Path, file: &str) -> ResultRecord {
    serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join("records"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn validate_config_accepts_and_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (code, stdout, _) = run(&["validate-config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("n_left = 2"));

    let (code, _, stderr) = run(&["validate-config", cfg.to_str().unwrap(), "--filter.sigmaa=1"]);
    assert_eq!(code, 1, "{stderr}");
    let bad = write_config(tmp.path(), "[model]\ngeometry = \"ring\"\nn_left = 2\n");
    assert_eq!(run(&["validate-config", bad.to_str().unwrap()]).0, 1);
    let bad = write_config(tmp.path(), "[model]\ngeometry = \"lattice2d\"\nn_left = 1\n");
    assert_eq!(run(&["validate-config", bad.to_str().unwrap()]).0, 1);
    assert_eq!(run(&["validate-config", "/nonexistent.toml"]).0, 1);
}

#[test]
fn estimate_writes_records_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let (code, stdout, stderr) = run(&["estimate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let m = manifest(&out);
    assert_eq!(m.records.len(), 1);
    let rec = record(&out, &m.records[0].file);
    assert_eq!(rec.schema, "ethdyn.record/1");
    assert_eq!(rec.status, Status::Ok);
    let report = &rec.payload["report"];
    for key in ["d_eff", "a_bar", "sigma2", "slope", "sigma_prime", "delta2", "v"] {
        assert!(report[key]["value"].is_number() && report[key]["stderr"].is_number(), "{key}");
    }
    assert!(out.join("config.resolved.toml").exists());
    let before = snapshot(&out);

    let (code, stdout, _) = run(&["estimate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0 records written, 1 resumed"), "{stdout}");
    assert_eq!(before, snapshot(&out));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let (code, _, e) = run(&["relax", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--threads", threads]);
        assert_eq!(code, 0, "{e}");
    }
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn empty_sweep_succeeds_without_records() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}n_left = []\n"));
    let out = tmp.path().join("out");
    let (code, _, e) = run(&["estimate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{e}");
    assert!(manifest(&out).records.is_empty());
}

#[test]
fn failed_points_give_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}n_left = [2, 5]\n"));
    let out = tmp.path().join("out");
    // five-spin-left ladders exceed the oracle's size cap
    let (code, _, _) = run(&["oracle", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let m = manifest(&out);
    let statuses: Vec<Status> = m.records.iter().map(|r| r.status).collect();
    assert_eq!(statuses.iter().filter(|s| **s == Status::Failed).count(), 1);
    let failed = m.records.iter().find(|r| r.status == Status::Failed).unwrap();
    let rec = record(&out, &failed.file);
    assert!(rec.payload["error"].as_str().unwrap().contains("limited to 14 spins"));
}

#[test]
fn oracle_reports_have_zero_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert_eq!(run(&["oracle", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 0);
    let m = manifest(&out);
    let rec = record(&out, &m.records[0].file);
    assert_eq!(rec.payload["report"]["a_bar"]["stderr"], Value::from(0.0));
    assert!(rec.payload["sigma2_block"].is_number());
}

#[test]
fn decoupled_relaxation_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let (code, _, e) = run(&["relax", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--model.j_c=0.0"]);
    assert_eq!(code, 0, "{e}");
    let m = manifest(&out);
    let traces: Vec<_> = m.records.iter().filter(|r| r.file.contains("trace-")).collect();
    assert_eq!(traces.len(), 2);
    for t in traces {
        let csv = fs::read_to_string(out.join(t.table.as_ref().unwrap())).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,d_t,r_t"));
        for l in lines {
            let r: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
            assert!((r - 1.0).abs() < 1e-10);
        }
    }
    let summary = m.records.iter().find(|r| r.file.contains("relax-")).unwrap();
    let rec = record(&out, &summary.file);
    assert_eq!(rec.payload["signs"].as_array().unwrap().len(), 2);
    assert!(rec.payload["max_sign_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn equipartition_of_mirror_model_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let (code, _, e) = run(&[
        "equipartition",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--model.n_right=2",
        "--estimator.n_samples=8",
    ]);
    assert_eq!(code, 0, "{e}");
    let m = manifest(&out);
    let rec = record(&out, &m.records[0].file);
    assert_eq!(rec.payload["prediction_coefficient"], Value::from(0.0));
    for p in rec.payload["points"].as_array().unwrap() {
        let (v, s) = (p["a_bar"]["value"].as_f64().unwrap(), p["a_bar"]["stderr"].as_f64().unwrap());
        assert!(v.abs() <= 3.0 * s + 1e-12, "{v} ± {s}");
    }
    assert!(m.records[0].table.is_some());
}

#[test]
fn scaling_emits_points_and_refuses_short_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}n_left = [1, 2]\n"));
    let out = tmp.path().join("out");
    let (code, _, e) = run(&["scaling", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{e}");
    let m = manifest(&out);
    let fit = m.records.iter().find(|r| r.file.contains("scaling-")).unwrap();
    let rec = record(&out, &fit.file);
    assert_eq!(rec.payload["points"].as_array().unwrap().len(), 2);
    assert!(rec.payload["fit"].is_null());
    assert!(rec.payload["fit_error"].as_str().unwrap().contains("3"));
}

#[test]
fn disorder_average_keeps_error_sources_apart() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}W = [1.0]\ndisorder_realizations = 3\n"));
    let out = tmp.path().join("out");
    let (code, _, e) = run(&["estimate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{e}");
    let m = manifest(&out);
    assert_eq!(m.records.len(), 4);
    let avg = m.records.iter().find(|r| r.id.ends_with("-average")).unwrap();
    let rec = record(&out, &avg.file);
    assert_eq!(rec.payload["realizations"], Value::from(3));
    let a = &rec.payload["quantities"]["a_bar"];
    assert!(a["realization_spread"].as_f64().unwrap() > 0.0);
    assert!(a["typicality_stderr"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    assert_eq!(run(&["estimate", cfg.to_str().unwrap()]).0, 1);
}
