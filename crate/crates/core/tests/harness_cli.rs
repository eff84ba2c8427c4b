use periodic_mv::engine::io;
use periodic_mv::harness::{emit_report, load_config, run_experiment, ExperimentConfig, Metric, Verdict};
use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn small_ou(workers: usize) -> ExperimentConfig {
    cfg(&format!(
        r#"{{"scenario": "ou-periodic", "n": 200, "dt": 0.01, "periods": 5, "eps_fix": 0.8,
            "coupling": "synchronous", "seed": 7, "workers": {workers}}}"#
    ))
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let (one, four) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run_experiment(&small_ou(1)).unwrap();
    let b = run_experiment(&small_ou(4)).unwrap();
    assert_eq!(a.report.distances, b.report.distances);
    emit_report(&a, one.path()).unwrap();
    emit_report(&b, four.path()).unwrap();
    let (fa, fb) = (files_under(one.path()), files_under(four.path()));
    let pick = |f: &[(String, Vec<u8>)]| -> Vec<(String, Vec<u8>)> {
        f.iter().filter(|(n, _)| n != "report.json" && n != "config.json").cloned().collect()
    };
    assert_eq!(pick(&fa), pick(&fb));
    assert!(fa.iter().any(|(n, _)| n == "distances.csv"));
    assert_eq!(fa.iter().filter(|(n, _)| n.starts_with("snapshots/test/")).count(), 6);
    assert_eq!(fa.iter().filter(|(n, _)| n.starts_with("snapshots/reference/")).count(), 6);
}

#[test]
fn seeds_change_the_run() {
    let a = run_experiment(&small_ou(1)).unwrap();
    let mut c = small_ou(1);
    c.seed = 8;
    let b = run_experiment(&c).unwrap();
    assert_ne!(a.report.distances, b.report.distances);
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let exp = run_experiment(&small_ou(2)).unwrap();
    emit_report(&exp, dir.path()).unwrap();
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for key in ["scenario", "metric", "predicted", "distances", "fit", "verdict", "tolerance", "fixed_point", "environment", "config"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["environment"]["seed"], 7);
    // the stored config reloads to the same run
    let again = load_config(&dir.path().join("config.json")).unwrap();
    assert_eq!(again, exp.report.config);
    let rows: Vec<String> = std::fs::read_to_string(dir.path().join("distances.csv")).unwrap().lines().map(String::from).collect();
    assert_eq!(rows[0], "period,distance");
    assert_eq!(rows.len(), exp.report.distances.len() + 1);
    for (n, snap) in exp.test.iter().enumerate() {
        let path = dir.path().join(format!("snapshots/test/snapshot_{n:04}.bin"));
        let back = io::read_binary(&path, snap.dim).unwrap();
        assert_eq!(back.positions, snap.positions);
        assert_eq!(back.reflection, snap.reflection);
    }
}

#[test]
fn independent_coupling_reports_a_noise_floor() {
    let exp = run_experiment(&cfg(
        r#"{"scenario": "ou-periodic", "n": 200, "dt": 0.01, "periods": 4, "eps_fix": 0.8}"#,
    ))
    .unwrap();
    let floor = exp.report.noise_floor.expect("independent runs carry a floor");
    assert!(floor > 0.0);
    // every fitted point clears the floor margin
    for &n in &exp.report.fitted_periods {
        assert!(exp.report.distances[n] > exp.report.tolerance.floor_multiple * floor);
    }
}

#[test]
fn trend_metrics_report_a_sign_test() {
    let exp = run_experiment(&cfg(
        r#"{"scenario": "ou-periodic", "n": 300, "dt": 0.01, "periods": 5, "eps_fix": 0.8,
            "metric": "entropy", "coupling": "synchronous"}"#,
    ))
    .unwrap();
    let r = &exp.report;
    assert!(Metric::Entropy.trend_only());
    assert!(r.trend.is_some());
    assert!(matches!(r.verdict, Verdict::TrendPass | Verdict::TrendFail | Verdict::PassDegenerate));
}

#[test]
fn weighted_metric_runs_on_the_nondissipative_scenario() {
    let exp = run_experiment(&cfg(
        r#"{"scenario": "nondissipative-periodic", "n": 128, "dt": 0.01, "periods": 3, "eps_fix": 5.0,
            "metric": "wpsiv", "coupling": "synchronous"}"#,
    ))
    .unwrap();
    let p = exp.report.predicted.as_ref().expect("rate is available");
    assert!(p.lambda < 0.0);
    assert_eq!(exp.report.verdict, Verdict::NoContractionPredicted);
    assert!(exp.report.distances.iter().all(|d| d.is_finite() && *d >= 0.0));
}

fn pmv(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pmv"))
        .args(args)
        .env("PMV_OUT_DIR", out)
        .output()
        .unwrap()
}

fn stdout(o: &std::process::Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cli_catalog_and_psi() {
    let dir = tempfile::tempdir().unwrap();
    let cat = stdout(&pmv(&["catalog"], dir.path()));
    for name in ["ou-periodic", "granular-periodic", "double-well-periodic", "nondissipative-periodic", "ou-periodic-ball"] {
        assert!(cat.contains(name), "{name} missing from catalog");
    }
    let table = dir.path().join("psi.csv");
    let out = stdout(&pmv(
        &["psi", "eigen", "--d0", "0", "--l", "1.5707963267948966", "--table", table.to_str().unwrap()],
        dir.path(),
    ));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["params"]["d1"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("r,psi,dpsi,d2psi"));
}

#[test]
fn cli_simulate_then_measure() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&pmv(&["simulate", "ou-periodic", "--periods", "2", "--n", "50", "--dt", "0.01"], dir.path()));
    let csv = dir.path().join("snapshots.csv");
    let snaps = io::read_csv(&csv).unwrap();
    assert_eq!(snaps.len(), 3);
    assert_eq!(snaps[0].len(), 50);
    assert!(dir.path().join("snapshots/snapshot_0002.bin").is_file());
    let c = csv.to_str().unwrap();
    let same: Value = serde_json::from_str(&stdout(&pmv(&["metrics", c, c, "--period", "1"], dir.path()))).unwrap();
    assert_eq!(same["value"].as_f64().unwrap(), 0.0);
    let costs = dir.path().join("costs.csv");
    let moved: Value = serde_json::from_str(&stdout(&pmv(
        &["metrics", c, c, "--metric", "w1", "--period", "0", "--dump-costs", costs.to_str().unwrap()],
        dir.path(),
    )))
    .unwrap();
    assert_eq!(moved["metric"], "w1");
    assert!(costs.is_file());
}

#[test]
fn cli_rates_flag_the_closed_form_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_str(&stdout(&pmv(&["rates", "double-well-periodic"], dir.path()))).unwrap();
    assert_eq!(v["wpsi"]["closed_form_mismatch"], true);
    assert!(v["w2"]["unavailable"].is_string());
    let v: Value = serde_json::from_str(&stdout(&pmv(&["rates", "ou-periodic"], dir.path()))).unwrap();
    assert!((v["w2"]["lambda_w2_squared"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn cli_experiment_writes_a_report_and_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(
        &good,
        r#"{"scenario": "ou-periodic", "n": 100, "dt": 0.02, "periods": 3, "eps_fix": 1.0, "coupling": "synchronous"}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = Command::new(env!("CARGO_BIN_EXE_pmv"))
        .args(["experiment", good.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    let text = stdout(&o);
    assert!(text.contains("verdict"));
    assert!(out.join("report.json").is_file());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"scenario\": \"ou-periodic\",\n \"metric\": \"w7\",\n \"n\": -3}").unwrap();
    let o = pmv(&["experiment", bad.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("metric") && err.contains("line 2"), "{err}");
    assert!(err.contains("n") && err.contains("line 3"), "{err}");
}
