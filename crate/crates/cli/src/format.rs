//! CSV for curves and trials, JSON for single results and summaries.
//! Non-finite numbers are written `nan`, `inf` and `-inf` in both.

use std::io::{Read, Write};

use lpcrit_core::{BoundaryPoint, SaddleSolution, TrialBatch, TrialOutcome};
use serde_json::{json, Value};

pub const BOUNDARY_HEADER: [&str; 3] = ["rho", "alpha_c", "at_valid"];
pub const TRIALS_HEADER: [&str; 4] = ["N", "rho", "P_c", "seed"];

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|_| format!("not a number: `{s}`"))
}

/// Finite numbers as JSON numbers, the rest as strings.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_f64(x))
    }
}

pub fn write_boundary_csv(out: impl Write, points: &[BoundaryPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUNDARY_HEADER)?;
    for p in points {
        w.write_record([fmt_f64(p.rho), fmt_f64(p.alpha_c.unwrap_or(f64::NAN)), p.at_valid.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_boundary_csv(input: impl Read) -> Result<Vec<BoundaryPoint>, String> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &BOUNDARY_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            let alpha = parse_f64(&rec[1])?;
            Ok(BoundaryPoint {
                rho: parse_f64(&rec[0])?,
                alpha_c: (!alpha.is_nan()).then_some(alpha),
                at_valid: rec[2].parse().map_err(|_| format!("not a boolean: `{}`", &rec[2]))?,
            })
        })
        .collect()
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub rho: f64,
    pub p_critical: usize,
    pub seed: u64,
}

impl TrialRecord {
    pub fn new(rho: f64, o: &TrialOutcome) -> Self {
        Self { n: o.n, rho, p_critical: o.p_critical, seed: o.seed }
    }
}

pub fn write_trials_csv(out: impl Write, records: &[TrialRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for t in records {
        w.write_record([t.n.to_string(), fmt_f64(t.rho), t.p_critical.to_string(), t.seed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv(input: impl Read) -> Result<Vec<TrialRecord>, String> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &TRIALS_HEADER)?;
    let int = |s: &str| s.trim().parse::<u64>().map_err(|_| format!("not an integer: `{s}`"));
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            Ok(TrialRecord {
                n: int(&rec[0])? as usize,
                rho: parse_f64(&rec[1])?,
                p_critical: int(&rec[2])? as usize,
                seed: int(&rec[3])?,
            })
        })
        .collect()
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), String> {
    let h = r.headers().map_err(|e| e.to_string())?;
    if h.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(format!("unexpected header {h:?}, expected {expected:?}"))
    }
}

pub fn solution_json(sol: &SaddleSolution, at: Option<f64>) -> Value {
    let t = &sol.theta;
    json!({
        "alpha": json_num(sol.params.alpha),
        "rho": json_num(sol.params.rho),
        "norm": sol.params.norm.to_string(),
        "branch": sol.branch,
        "q": json_num(t.q),
        "chi": json_num(t.chi),
        "m": json_num(t.m),
        "qhat": json_num(t.qhat),
        "chihat": json_num(t.chihat),
        "mhat": json_num(t.mhat),
        "free_energy": json_num(sol.free_energy),
        "mse": json_num(sol.mse),
        "is_success": sol.is_success,
        "at_stable": sol.at_stable,
        "at_condition": at.map(json_num),
        "residual": json_num(sol.residual),
        "iterations": sol.iterations,
    })
}

/// Settings echoed into the experiment summary.
#[derive(Debug, Clone)]
pub struct ExperimentInfo {
    pub ensemble: String,
    pub design: String,
    pub nonzeros: String,
    pub trials_per_n: usize,
    pub seed: u64,
    pub recovery_tol: f64,
    /// Replica prediction for the same density.
    pub l1_alpha_c: Option<f64>,
}

pub fn summary_json(batch: &TrialBatch, estimate: Option<&lpcrit_core::CriticalEstimate>, info: &ExperimentInfo) -> Value {
    let total = batch.outcomes.len() + batch.failures.len();
    let per_n = lpcrit_core::experiment::per_n_stats(&batch.outcomes);
    json!({
        "rho": json_num(batch.rho),
        "ensemble": info.ensemble,
        "design": info.design,
        "nonzeros": info.nonzeros,
        "trials_per_n": info.trials_per_n,
        "seed": info.seed,
        "recovery_tol": json_num(info.recovery_tol),
        "per_n": per_n.iter().map(|s| json!({
            "n": s.n,
            "alpha_hat": json_num(s.alpha_hat),
            "stderr": json_num(s.stderr),
            "trials": s.trials,
        })).collect::<Vec<_>>(),
        "fit": estimate.map(|e| json!({
            "a": json_num(e.fit_coeffs[0]),
            "b": json_num(e.fit_coeffs[1]),
            "c": json_num(e.fit_coeffs[2]),
            "residual": json_num(e.fit_residual),
        })),
        "extrapolated_alpha_c": estimate.map(|e| json_num(e.extrapolated_alpha_c)),
        "l1_alpha_c": info.l1_alpha_c.map(json_num),
        "failures": batch.failures,
        "aborted_fraction": if total == 0 { 0.0 } else { batch.failures.len() as f64 / total as f64 },
    })
}
