//! `osa`: simulate the one-state decoder, predict its long-run bit error rate
//! and check the contraction conditions.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 numerical non-convergence.

mod output;
mod settings;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use osa_core::chain::{monte_carlo_mse, run_trial, trial_rng};
use osa_core::kernel::{exact_tree_mse, predicted_mse, Grid};
use osa_core::{ContractionReport, DiscreteSystem, MseCurve, MseRow};

use output::Sink;
use settings::{Overrides, Settings};

#[derive(Parser)]
#[command(
    name = "osa",
    version,
    about = "One-state binary input reconstruction: simulation and analytic prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo bit error rate at each SNR point.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write the per-step trace of run 0 at each SNR point to this CSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Analytic long-run bit error rate at one SNR point.
    Predict {
        #[command(flatten)]
        common: Common,
    },
    /// Contraction conditions and numerical diagnostics at one SNR point.
    Check {
        #[command(flatten)]
        common: Common,
        /// Number of random state pairs for the empirical contraction ratio.
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
    },
    /// Analytic curve over the SNR list.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Exact finite-horizon bit error rate by enumerating all paths.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Horizon (at most 14).
        #[arg(long = "K", visible_alias = "k", default_value_t = 10)]
        k: usize,
    },
    /// Simulated and analytic curves side by side.
    Compare {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment manifest with [system], [run], [grid], [sweep] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs per SNR point.
    #[arg(long)]
    runs: Option<usize>,
    /// Bits per run.
    #[arg(long)]
    bits: Option<usize>,
    /// SNR points in dB: "a..b step s" or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Initial decoder error for the analytic prediction.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    /// Stopping tolerance (W1) of the stationary iteration.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        Settings::load(
            self.config.as_deref(),
            &Overrides {
                seed: self.seed,
                runs: self.runs,
                bits: self.bits,
                snr: self.snr.clone(),
                alpha: self.alpha,
                grid_n: self.grid_n,
                tol: self.tol,
                max_iter: self.max_iter,
                a: self.a,
                b: self.b,
                c: self.c,
                tau: self.tau,
                q: self.q,
                w: self.w,
                sigma: self.sigma,
            },
        )
    }

    fn sink(&self, default: Format) -> Result<Sink> {
        Sink::open(self.out.as_deref(), self.format.unwrap_or(default))
    }
}

#[derive(Serialize)]
struct SimRow {
    snr_db: f64,
    mse: f64,
    stderr: f64,
    num_runs: usize,
    num_bits: usize,
    seed: u64,
}

#[derive(Serialize)]
struct TraceRow {
    snr_db: f64,
    k: usize,
    u: u8,
    u_hat: u8,
    error: u8,
    d: f64,
}

#[derive(Serialize)]
struct PredictRow {
    snr_db: f64,
    q: f64,
    w: f64,
    c: f64,
    sigma: f64,
    alpha: f64,
    regime: &'static str,
    predicted_mse: f64,
    iterations: usize,
    w1_residual: f64,
    grid_n: usize,
}

#[derive(Serialize)]
struct OracleRow {
    #[serde(rename = "K")]
    k: usize,
    alpha: f64,
    exact_mse: f64,
    atom_count: usize,
}

#[derive(Serialize)]
struct CompareRow {
    snr_db: f64,
    sim_mse: Option<f64>,
    sim_stderr: Option<f64>,
    pred_mse: Option<f64>,
    regime: Option<&'static str>,
}

impl From<&MseRow> for CompareRow {
    fn from(r: &MseRow) -> Self {
        CompareRow {
            snr_db: r.snr_db,
            sim_mse: r.sim_mse,
            sim_stderr: r.sim_stderr,
            pred_mse: r.pred_mse,
            regime: r.regime.map(|g| g.as_str()),
        }
    }
}

fn predict_row(s: &Settings, snr_db: f64, sys: &DiscreteSystem) -> Result<PredictRow> {
    let grid = Grid::state_space(sys, s.grid.n)?;
    let p = predicted_mse(sys, s.grid.alpha, &grid, s.grid.tol, s.grid.max_iter)?;
    Ok(PredictRow {
        snr_db,
        q: sys.q(),
        w: sys.w(),
        c: sys.c(),
        sigma: sys.sigma(),
        alpha: s.grid.alpha,
        regime: p.regime.as_str(),
        predicted_mse: p.value,
        iterations: p.iterations,
        w1_residual: p.w1_residual,
        grid_n: s.grid.n,
    })
}

fn simulate(common: &Common, trace: Option<&std::path::Path>) -> Result<()> {
    let s = common.settings()?;
    let points = s.sweep_points()?;
    let mut rows = Vec::with_capacity(points.len());
    for (db, sys) in &points {
        let est = monte_carlo_mse(sys, &s.run)?;
        rows.push(SimRow {
            snr_db: *db,
            mse: est.mean,
            stderr: est.stderr,
            num_runs: est.num_runs,
            num_bits: est.num_bits,
            seed: s.run.seed,
        });
    }
    if let Some(path) = trace {
        let mut traces = Vec::new();
        for (db, sys) in &points {
            let t = run_trial(sys, &s.run, &mut trial_rng(s.run.seed, 0), true);
            let (u, uh, e, d) = (
                t.input.unwrap_or_default(),
                t.decoded.unwrap_or_default(),
                t.error_trace.unwrap_or_default(),
                t.d_trace.unwrap_or_default(),
            );
            for k in 0..u.len() {
                traces.push(TraceRow {
                    snr_db: *db,
                    k: k + 1,
                    u: u[k],
                    u_hat: uh[k],
                    error: e[k],
                    d: d[k + 1],
                });
            }
        }
        Sink::open(Some(path), Format::Csv)?.rows(&traces)?;
    }
    common.sink(Format::Csv)?.rows(&rows)
}

fn predict(common: &Common) -> Result<()> {
    let s = common.settings()?;
    let (db, sys) = s.single_point()?;
    let row = predict_row(&s, db, &sys)?;
    common.sink(Format::Json)?.one(&row)
}

fn check(common: &Common, pairs: usize) -> Result<()> {
    let s = common.settings()?;
    let (_, sys) = s.single_point()?;
    let grid = Grid::state_space(&sys, s.grid.n)?;
    let mut rng = trial_rng(s.run.seed, 0);
    let report = ContractionReport::diagnose(&sys, &grid, Some((pairs, 64, &mut rng)));
    common.sink(Format::Json)?.one(&report)?;
    eprintln!("{}", report.verdict());
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    let s = common.settings()?;
    let rows = s
        .sweep_points()?
        .iter()
        .map(|(db, sys)| predict_row(&s, *db, sys))
        .collect::<Result<Vec<_>>>()?;
    common.sink(Format::Csv)?.rows(&rows)
}

fn oracle(common: &Common, k: usize) -> Result<()> {
    let s = common.settings()?;
    let (_, sys) = s.single_point()?;
    let t = exact_tree_mse(&sys, s.grid.alpha, k)?;
    common.sink(Format::Json)?.one(&OracleRow {
        k,
        alpha: s.grid.alpha,
        exact_mse: t.mse,
        atom_count: t.atom_count,
    })
}

fn compare(common: &Common) -> Result<()> {
    let s = common.settings()?;
    let mut rows = Vec::new();
    for (db, sys) in s.sweep_points()? {
        let est = monte_carlo_mse(&sys, &s.run)?;
        let grid = Grid::state_space(&sys, s.grid.n)?;
        let p = predicted_mse(&sys, s.grid.alpha, &grid, s.grid.tol, s.grid.max_iter)?;
        rows.push(MseRow {
            pred_mse: Some(p.value),
            regime: Some(p.regime),
            ..MseRow::simulated(db, &est)
        });
    }
    let curve = MseCurve::new(rows)?;
    let out: Vec<CompareRow> = curve.rows().iter().map(CompareRow::from).collect();
    common.sink(Format::Csv)?.rows(&out)?;

    let mut err = std::io::stderr().lock();
    writeln!(
        err,
        "max |sim - pred| = {:.6}",
        curve.max_gap().unwrap_or(0.0)
    )?;
    let flagged: Vec<&MseRow> = curve
        .rows()
        .iter()
        .filter(|r| r.exceeds(0.01, 3.0))
        .collect();
    if flagged.is_empty() {
        writeln!(err, "all points within max(0.01, 3 stderr)")?;
    }
    for r in flagged {
        writeln!(
            err,
            "flagged: snr_db = {} sim = {:.6} pred = {:.6} stderr = {:.6}",
            r.snr_db,
            r.sim_mse.unwrap_or(f64::NAN),
            r.pred_mse.unwrap_or(f64::NAN),
            r.sim_stderr.unwrap_or(f64::NAN)
        )?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { common, trace } => simulate(common, trace.as_deref()),
        Command::Predict { common } => predict(common),
        Command::Check { common, pairs } => {
            if *pairs == 0 {
                bail!(osa_core::Error::Config {
                    key: "pairs".into(),
                    reason: "must be at least 1".into()
                });
            }
            check(common, *pairs)
        }
        Command::Sweep { common } => sweep(common),
        Command::Oracle { common, k } => oracle(common, *k),
        Command::Compare { common } => compare(common),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err
        .chain()
        .find_map(|e| e.downcast_ref::<osa_core::Error>())
    {
        Some(osa_core::Error::NotConverged { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err
                .chain()
                .find_map(|e| e.downcast_ref::<osa_core::Error>())
                .map(|e| e.kind())
                .unwrap_or("Io");
            eprintln!("error [{kind}]: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
