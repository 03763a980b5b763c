use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dslt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dslt"))
        .current_dir(dir)
        .args(args)
        .env_remove("DSLT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).expect("stderr ends with JSON")
}

#[test]
fn clt_runs_are_byte_identical() {
    let args = [
        "clt", "--t", "1", "--eps-ladder", "1e-2,1e-3", "--n-paths", "100", "--n-steps", "256", "--seed", "7",
        "--rel-tol", "1e-4", "--output", "report.json",
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(dslt(a.path(), &args).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_dslt"))
        .current_dir(b.path())
        .args(args)
        .env("DSLT_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    for f in ["report.json", "report.json.paths.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["spec"]["n_paths"], 100);
    assert_eq!(report["result"]["samples"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(a.path().join("report.json.paths.csv")).unwrap();
    assert!(csv.starts_with("# version: "));
    assert!(csv.contains("# seed: 7\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 200);
}

#[test]
fn invalid_hurst_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dslt(dir.path(), &["second-moment", "--H", "1.5", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"]["field"], "H");
    assert!(err["error"]["message"].as_str().unwrap().contains("1.5"));
    assert!(out.stdout.is_empty());
}

#[test]
fn other_validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (args, field) in [
        (&["second-moment", "--d", "2", "--k", "1"][..], "k"),
        (&["second-moment", "--eps", "-1"][..], "eps"),
        (&["estimate", "--n-paths", "ten"][..], "n-paths"),
        (&["holder", "--variable", "diagonal"][..], "variable"),
        (&["simulate", "--format", "bin"][..], "output"),
        (&["clt", "--unknown", "1"][..], "unknown"),
    ] {
        let out = dslt(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_json(&out)["error"]["field"], field, "{args:?}");
    }
}

#[test]
fn second_moment_regions_sum_to_total() {
    let dir = tempfile::tempdir().unwrap();
    let out = dslt(dir.path(), &["second-moment", "--H", "0.5", "--d", "1", "--k", "1", "--eps", "0.1", "--eta", "0.1"]);
    let doc = stdout_json(&out);
    let r = &doc["result"];
    let parts: f64 = ["D1", "D2", "D3"].iter().map(|c| r["per_region"][c]["value"].as_f64().unwrap()).sum();
    let total = r["value"].as_f64().unwrap();
    assert!((parts - total).abs() <= 1e-14 * total.abs(), "{parts} vs {total}");
    let evals: u64 = ["D1", "D2", "D3"].iter().map(|c| r["per_region"][c]["n_evals"].as_u64().unwrap()).sum();
    assert_eq!(evals, r["n_evals"].as_u64().unwrap());
    assert!(r["error"].as_f64().unwrap() <= 1e-4 * total);
    assert_eq!(r["regime"]["l2_exists"], true);
    assert_eq!(doc["spec"]["cfg"]["hurst"], 0.5);
}

#[test]
fn outside_regime_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dslt(dir.path(), &["estimate", "--H", "0.7", "--n-paths", "20", "--n-steps", "64", "--seed", "1"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["warnings"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn flags_override_config_file_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# test\nH = 0.4\nn-steps = 32\nseed = 11\n").unwrap();
    let out = dslt(
        dir.path(),
        &["estimate", "--config", "run.cfg", "--H", "0.3", "--n-paths", "10"],
    );
    let spec = &stdout_json(&out)["spec"];
    assert_eq!(spec["cfg"]["hurst"], 0.3);
    assert_eq!(spec["n_steps"], 32);
    assert_eq!(spec["seed"], 11);
    assert_eq!(spec["cfg"]["epsilon"], 0.01);

    std::fs::write(dir.path().join("bad.cfg"), "hurst = 0.4\n").unwrap();
    let out = dslt(dir.path(), &["estimate", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["field"], "hurst");
}

#[test]
fn simulate_binary_round_trips_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dslt(
        dir.path(),
        &["simulate", "--H", "0.3", "--d", "2", "--n-paths", "3", "--n-steps", "16", "--seed", "5", "--format", "bin", "--output", "p.bin"],
    );
    assert!(out.status.success());
    let batch = dslt::fbm_sim::read_paths(std::fs::File::open(dir.path().join("p.bin")).unwrap()).unwrap();
    assert_eq!((batch.n_paths, batch.n_steps, batch.dim, batch.seed), (3, 16, 2, 5));
    let cfg = dslt::fbm_sim::ModelConfig::new(0.3, vec![1, 0], 1.0, 0.01).unwrap();
    assert_eq!(batch, dslt::fbm_sim::sample_paths(&cfg, 16, 3, 5).unwrap());
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("p.bin.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["spec"]["subcommand"], "simulate");
}

#[test]
fn bounds_check_csv_has_all_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dslt(dir.path(), &["bounds-check", "--n-draws", "50", "--seed", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "case,H,point,exact,bound,ratio");
    // 3 regions x 4 Hurst values x 50, plus 50 pair-integral draws
    assert_eq!(rows.len() - 1, 3 * 4 * 50 + 50);
    for r in rows.iter().skip(1).filter(|r| r.starts_with('D')) {
        let ratio: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ratio > 0.0 && ratio.is_finite(), "{r}");
    }
}

#[test]
fn holder_csv_reports_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dslt(
        dir.path(),
        &["holder", "--H", "0.3", "--n-paths", "100", "--n-steps", "128", "--seed", "4", "--format", "csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# fit: slope = "));
    assert!(text.contains("lag,moment,fitted_moment,log_residual\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);
}
