use std::process::{Command, Output};

use lpcrit::format::{read_boundary_csv, read_trials_csv, write_boundary_csv, write_trials_csv};
use lpcrit_core::replica::worst_case_holds;
use serde_json::Value;

fn lpcrit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpcrit")).args(args).env_remove("LPCRIT_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn l1_boundary_is_increasing() {
    let o = lpcrit(&["boundary", "--norm", "l1", "--rho", "0.1:0.9:17"]);
    assert_eq!(o.status.code(), Some(0));
    let pts = read_boundary_csv(o.stdout.as_slice()).unwrap();
    assert_eq!(pts.len(), 17);
    for w in pts.windows(2) {
        assert!(w[0].alpha_c.unwrap() < w[1].alpha_c.unwrap());
    }
    let mut again = Vec::new();
    write_boundary_csv(&mut again, &pts).unwrap();
    assert_eq!(again, o.stdout);
}

#[test]
fn l2_boundary_is_flat() {
    let o = lpcrit(&["boundary", "--norm", "l2", "--rho", "0.05:1:8"]);
    assert_eq!(o.status.code(), Some(0));
    let pts = read_boundary_csv(o.stdout.as_slice()).unwrap();
    assert!(pts.iter().all(|p| p.alpha_c == Some(1.0)));
}

#[test]
fn worst_case_rows_without_a_point_are_nan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wc.csv");
    let o = lpcrit(&["boundary", "--norm", "l1", "--method", "worst-case", "--rho", "0.0005:0.01:20", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().skip(1).any(|l| l.split(',').nth(1) == Some("nan")));
    let pts = read_boundary_csv(text.as_bytes()).unwrap();
    let c = 2f64.powf(0.25) - 1.0;
    for p in &pts {
        match p.alpha_c {
            Some(a) => assert!(a > 2.0 * p.rho / (c * c) && worst_case_holds(a, p.rho)),
            None => assert!(!worst_case_holds(1.0, p.rho)),
        }
    }
}

#[test]
fn boundary_usage_errors() {
    assert_eq!(lpcrit(&["boundary", "--norm", "l1", "--rho", "0.9:0.1:5"]).status.code(), Some(1));
    assert_eq!(lpcrit(&["boundary", "--norm", "l2", "--method", "worst-case", "--rho", "0.1:0.2:2"]).status.code(), Some(1));
    assert_eq!(lpcrit(&["boundary", "--norm", "l3", "--rho", "0.1:0.2:2"]).status.code(), Some(1));
    assert_eq!(lpcrit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lpcrit(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_above_and_below_the_l1_curve() {
    let o = lpcrit(&["solve", "--alpha", "0.9", "--rho", "0.5", "--norm", "l1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["is_success"], true);
    assert!(v["mse"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["qhat"], "inf");

    let v = json(&lpcrit(&["solve", "--alpha", "0.7", "--rho", "0.5", "--norm", "l1"]));
    assert_eq!(v["is_success"], false);
    for key in ["q", "chi", "m", "qhat", "chihat", "mhat", "free_energy", "mse", "residual"] {
        assert!(v[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert_eq!(v["at_stable"], true);
}

#[test]
fn solve_overdetermined_l2() {
    let v = json(&lpcrit(&["solve", "--alpha", "1.5", "--rho", "1.0", "--norm", "l2"]));
    assert_eq!(v["is_success"], true);
    assert_eq!(v["q"].as_f64(), Some(1.0));
    assert_eq!(v["m"].as_f64(), Some(1.0));
    assert!(v["chihat"].as_f64().unwrap().is_finite());
}

#[test]
fn solve_errors_have_distinct_statuses() {
    assert_eq!(lpcrit(&["solve", "--alpha", "-1", "--rho", "0.5", "--norm", "l1"]).status.code(), Some(1));
    assert_eq!(lpcrit(&["solve", "--alpha", "0.5", "--rho", "1.5", "--norm", "l1"]).status.code(), Some(1));
    let o = lpcrit(&["solve", "--alpha", "0.5", "--rho", "0.5", "--norm", "l2", "--max-iter", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["error"], "non_convergence");
}

#[test]
fn experiment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let csv = dir.path().join(format!("{name}.csv"));
        let summary = dir.path().join(format!("{name}.json"));
        let o = lpcrit(&[
            "experiment", "--rho", "0.5", "--n", "8:2:12", "--trials", "40", "--seed", "7", "--workers", workers,
            "--out", csv.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(csv).unwrap(), std::fs::read(summary).unwrap())
    };
    let (a_csv, a_sum) = run("a", "1");
    let (b_csv, b_sum) = run("b", "3");
    assert_eq!(a_csv, b_csv);
    assert_eq!(a_sum, b_sum);

    let recs = read_trials_csv(a_csv.as_slice()).unwrap();
    assert_eq!(recs.len(), 120);
    assert!(recs.iter().all(|r| r.rho == 0.5 && r.p_critical <= r.n + 1 && 2 * r.p_critical >= r.n));
    let mut again = Vec::new();
    write_trials_csv(&mut again, &recs).unwrap();
    assert_eq!(again, a_csv);

    let v: Value = serde_json::from_slice(&a_sum).unwrap();
    assert_eq!(v["per_n"].as_array().unwrap().len(), 3);
    assert!(v["extrapolated_alpha_c"].as_f64().is_some());
    assert!((v["l1_alpha_c"].as_f64().unwrap() - 0.83129).abs() < 1e-4);
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn experiment_reports_the_ensemble() {
    let o = lpcrit(&["experiment", "--rho", "0.5", "--n", "8,10,12", "--trials", "10", "--ensemble", "rotinv:unit"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["ensemble"], "rotinv:unit");
    assert!(stdout(&o).contains("\"design\": \"nested\""));
}

#[test]
fn experiment_usage_errors() {
    assert_eq!(lpcrit(&["experiment", "--rho", "0.5", "--n", "10,12", "--trials", "5"]).status.code(), Some(1));
    assert_eq!(lpcrit(&["experiment", "--rho", "0.01", "--n", "10:2:14", "--trials", "5"]).status.code(), Some(1));
    assert_eq!(lpcrit(&["experiment", "--rho", "0.5", "--n", "10:2:14", "--ensemble", "rotinv:uniform:0:1"]).status.code(), Some(1));
}
