use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpcrit::format::{self, ExperimentInfo, TrialRecord};
use lpcrit::grid::{NList, RhoGrid};
use lpcrit_core::replica::{solve_saddle_with, SolverOptions};
use lpcrit_core::scalar_maps::DEFAULT_ORDER;
use lpcrit_core::{
    at_condition, l1_alpha_c, run_trials, summarize, trace_boundary, BoundaryMethod, BoundaryPoint, Design,
    EnsembleKind, Error, ModelParams, NonZeroDist, Norm, OrderParameters, QuadratureRule, TrialOptions,
};
use serde_json::json;

const USAGE: u8 = 1;
const FAILURE: u8 = 2;

/// Reconstruction limits of sparse signals under Lp minimisation.
///
/// Exit status: 0 on success, 1 for usage errors, 2 for computational failures.
#[derive(Parser)]
#[command(name = "lpcrit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical compression rate over a grid of densities, as CSV `rho,alpha_c,at_valid`.
    Boundary(BoundaryArgs),
    /// One saddle point of the replica-symmetric free energy, as JSON.
    Solve(SolveArgs),
    /// Basis-pursuit Monte Carlo estimate of the L1 critical rate.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct BoundaryArgs {
    /// l0, l1 or l2.
    #[arg(long)]
    norm: Norm,
    /// typical-rs or worst-case (l1 only).
    #[arg(long, default_value = "typical-rs")]
    method: BoundaryMethod,
    /// Density grid `min:max:count`, 0 < min < max <= 1.
    #[arg(long)]
    rho: RhoGrid,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long)]
    norm: Norm,
    /// Convergence threshold on the stationarity residual.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Gauss-Hermite order.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum NonZeros {
    Gaussian,
    Uniform,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    /// System sizes `start:step:stop` or `a,b,c` (at least 3 distinct).
    #[arg(long)]
    n: NList,
    /// Trials per system size.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// gaussian, rotinv:unit, rotinv:uniform:LO:HI or rotinv:values:A,B,...
    #[arg(long, default_value = "gaussian")]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "LPCRIT_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Reconstruction fails when the L1 error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    recovery_tol: f64,
    /// Draw a fresh matrix for every P instead of nesting rows.
    #[arg(long)]
    redraw: bool,
    #[arg(long, value_enum, default_value = "gaussian")]
    nonzeros: NonZeros,
    /// Per-trial CSV `N,rho,P_c,seed`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON path (stdout when absent).
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// Failure with its exit status; the message goes to stderr.
struct Exit(u8, String);

impl Exit {
    fn usage(msg: impl Into<String>) -> Self {
        Exit(USAGE, msg.into())
    }

    fn failure(msg: impl Into<String>) -> Self {
        Exit(FAILURE, msg.into())
    }

    fn from_core(e: Error) -> Self {
        match e {
            Error::Domain(_) => Exit::usage(e.to_string()),
            _ => Exit::failure(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Boundary(a) => boundary(a),
        Command::Solve(a) => solve(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, msg)) => {
            eprintln!("lpcrit: {msg}");
            ExitCode::from(code)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Exit> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Exit::failure(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn boundary(a: BoundaryArgs) -> Result<(), Exit> {
    if !(a.tol > 0.0) {
        return Err(Exit::usage(format!("--tol must be positive, got {}", a.tol)));
    }
    if a.method == BoundaryMethod::WorstCase && a.norm != Norm::L1 {
        return Err(Exit::usage("the worst-case method is defined for --norm l1 only"));
    }
    let grid = a.rho.0;
    let mut failed = 0;
    let points = match trace_boundary(a.norm, a.method, &grid, a.tol) {
        Ok(b) => b.points,
        // Retry point by point so one bad density costs one row.
        Err(_) => grid
            .iter()
            .map(|&rho| match trace_boundary(a.norm, a.method, &[rho], a.tol) {
                Ok(b) => b.points[0],
                Err(e) => {
                    eprintln!("lpcrit: {e}");
                    failed += 1;
                    BoundaryPoint { rho, alpha_c: None, at_valid: false }
                }
            })
            .collect(),
    };
    let out = output(a.out.as_deref())?;
    format::write_boundary_csv(out, &points).map_err(|e| Exit::failure(format!("writing CSV: {e}")))?;
    if failed > 0 {
        return Err(Exit::failure(format!("{failed} of {} grid points failed", grid.len())));
    }
    Ok(())
}

fn solve(a: SolveArgs) -> Result<(), Exit> {
    if !(a.tol > 0.0) || a.max_iter == 0 {
        return Err(Exit::usage("--tol and --max-iter must be positive"));
    }
    let params = ModelParams::new(a.alpha, a.rho, a.norm).map_err(Exit::from_core)?;
    let rule = QuadratureRule::gauss_hermite(a.order).map_err(Exit::from_core)?;
    let opts = SolverOptions { tol: a.tol, max_iter: a.max_iter, ..SolverOptions::default() };
    match solve_saddle_with(&params, &OrderParameters::initial(a.rho), &rule, &opts) {
        Ok(sol) => {
            let at = at_condition(&sol, &rule).ok();
            println!("{:#}", format::solution_json(&sol, at));
            Ok(())
        }
        Err(e @ Error::NonConvergence { .. }) => {
            let Error::NonConvergence { iterations, residual, theta } = &e else { unreachable!() };
            let body = json!({
                "error": "non_convergence",
                "message": e.to_string(),
                "iterations": iterations,
                "residual": format::json_num(*residual),
                "last": {
                    "q": format::json_num(theta.q),
                    "chi": format::json_num(theta.chi),
                    "m": format::json_num(theta.m),
                    "qhat": format::json_num(theta.qhat),
                    "chihat": format::json_num(theta.chihat),
                    "mhat": format::json_num(theta.mhat),
                },
            });
            println!("{body:#}");
            Err(Exit::failure(e.to_string()))
        }
        Err(e) => Err(Exit::from_core(e)),
    }
}

fn experiment(a: ExperimentArgs) -> Result<(), Exit> {
    let mut distinct = a.n.0.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Exit::usage("--n needs at least 3 distinct sizes for the 1/N fit"));
    }
    if a.trials == 0 {
        return Err(Exit::usage("--trials must be positive"));
    }
    let opts = TrialOptions {
        recovery_tol: a.recovery_tol,
        design: if a.redraw { Design::Redraw } else { Design::Nested },
        nonzeros: match a.nonzeros {
            NonZeros::Gaussian => NonZeroDist::Gaussian,
            NonZeros::Uniform => NonZeroDist::Uniform,
        },
    };
    let batch = run_trials(a.rho, &distinct, a.trials, &a.ensemble, &opts, a.seed, a.workers).map_err(Exit::from_core)?;

    if let Some(path) = &a.out {
        let records: Vec<TrialRecord> = batch.outcomes.iter().map(|o| TrialRecord::new(a.rho, o)).collect();
        format::write_trials_csv(output(Some(path))?, &records).map_err(|e| Exit::failure(format!("writing CSV: {e}")))?;
    }
    let estimate = summarize(a.rho, &batch.outcomes);
    let info = ExperimentInfo {
        ensemble: a.ensemble.to_string(),
        design: if a.redraw { "redraw" } else { "nested" }.into(),
        nonzeros: match a.nonzeros {
            NonZeros::Gaussian => "gaussian",
            NonZeros::Uniform => "uniform",
        }
        .into(),
        trials_per_n: a.trials,
        seed: a.seed,
        recovery_tol: a.recovery_tol,
        l1_alpha_c: l1_alpha_c(a.rho, 1e-9).ok(),
    };
    let summary = format::summary_json(&batch, estimate.as_ref().ok(), &info);
    let mut out = output(a.summary.as_deref())?;
    writeln!(out, "{summary:#}").map_err(|e| Exit::failure(format!("writing summary: {e}")))?;
    out.flush().map_err(|e| Exit::failure(format!("writing summary: {e}")))?;

    for f in &batch.failures {
        eprintln!("lpcrit: aborted trial n = {} seed = {}: {}", f.n, f.seed, f.message);
    }
    let total = batch.outcomes.len() + batch.failures.len();
    let (num, den) = lpcrit_core::experiment::MAX_ABORTED_SHARE;
    if batch.failures.len() * den > total * num {
        return Err(Exit::failure(format!("{} of {total} trials aborted", batch.failures.len())));
    }
    estimate.map(|_| ()).map_err(|e| Exit::failure(format!("fit failed: {e}")))
}
