//! Encoder/channel simulation, the one-state decoder, and the Monte Carlo
//! error-rate harness.
//!
//! Every trial draws from its own ChaCha stream selected by the trial index,
//! so a Monte Carlo estimate is a pure function of `(system, RunConfig)` no
//! matter how many threads run it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{MseCurve, MseRow};
use crate::error::{Error, Result};
use crate::model::DiscreteSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub num_bits: usize,
    pub num_runs: usize,
    pub seed: u64,
    pub x0: f64,
    pub xhat0: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            num_bits: 320,
            num_runs: 2000,
            seed: 0,
            x0: 0.0,
            xhat0: 0.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bits == 0 {
            return Err(Error::invalid("num_bits", "must be at least 1"));
        }
        if self.num_runs == 0 {
            return Err(Error::invalid("num_runs", "must be at least 1"));
        }
        if !self.x0.is_finite() || !self.xhat0.is_finite() {
            return Err(Error::invalid("x0", "initial states must be finite"));
        }
        Ok(())
    }
}

/// Outcome of one transmission of `num_bits` bits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialResult {
    pub bit_errors: usize,
    pub num_bits: usize,
    /// `error_trace[k]` is 1 when bit `k` was decoded wrongly.
    pub error_trace: Option<Vec<u8>>,
    /// `d_trace[k] = xhat_k - x_k` for `k = 0..=num_bits`.
    pub d_trace: Option<Vec<f64>>,
    /// Transmitted bits, retained together with the traces.
    pub input: Option<Vec<u8>>,
    /// Decoded bits, retained together with the traces.
    pub decoded: Option<Vec<u8>>,
}

impl TrialResult {
    pub fn error_rate(&self) -> f64 {
        self.bit_errors as f64 / self.num_bits as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub num_runs: usize,
    pub num_bits: usize,
}

impl MseEstimate {
    /// Mean and standard error of independent per-run error rates.
    pub fn from_rates(rates: &[f64], num_bits: usize) -> Self {
        let n = rates.len();
        let mean = rates.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MseEstimate {
            mean,
            stderr,
            num_runs: n,
            num_bits,
        }
    }
}

/// Generator for trial `index` under master `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Independent fair bits.
pub fn generate_input<R: RngCore + ?Sized>(rng: &mut R, k: usize) -> Vec<u8> {
    (0..k).map(|_| rng.random::<bool>() as u8).collect()
}

#[inline]
pub fn evolve_state(sys: &DiscreteSystem, x_prev: f64, u_prev: u8) -> f64 {
    sys.q() * x_prev + sys.w() * f64::from(u_prev)
}

#[inline]
pub fn observe<R: RngCore + ?Sized>(sys: &DiscreteSystem, x: f64, rng: &mut R) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    sys.c() * x + sys.sigma() * n
}

/// One decoder step: picks the bit whose noiseless prediction is closer to
/// `y`, ties going to 0, then advances the state estimate.
#[inline]
pub fn osa_step(sys: &DiscreteSystem, xhat_prev: f64, y: f64) -> (u8, f64) {
    let pred0 = sys.c() * sys.q() * xhat_prev;
    let pred1 = pred0 + sys.c() * sys.w();
    let uhat = if (y - pred0).abs() <= (y - pred1).abs() {
        0
    } else {
        1
    };
    (uhat, evolve_state(sys, xhat_prev, uhat))
}

/// Simulates and decodes one transmission. Bits are drawn first, then one
/// noise sample per step, all from `rng`.
pub fn run_trial<R: RngCore + ?Sized>(
    sys: &DiscreteSystem,
    cfg: &RunConfig,
    rng: &mut R,
    keep_traces: bool,
) -> TrialResult {
    let k = cfg.num_bits;
    let input = generate_input(rng, k);
    let mut x = cfg.x0;
    let mut xhat = cfg.xhat0;
    let mut bit_errors = 0;

    let mut error_trace = keep_traces.then(|| Vec::with_capacity(k));
    let mut decoded = keep_traces.then(|| Vec::with_capacity(k));
    let mut d_trace = keep_traces.then(|| {
        let mut v = Vec::with_capacity(k + 1);
        v.push(xhat - x);
        v
    });

    for &u in &input {
        x = evolve_state(sys, x, u);
        let y = observe(sys, x, rng);
        let (uhat, next) = osa_step(sys, xhat, y);
        xhat = next;
        let wrong = (uhat != u) as u8;
        bit_errors += wrong as usize;
        if let Some(t) = error_trace.as_mut() {
            t.push(wrong);
        }
        if let Some(t) = decoded.as_mut() {
            t.push(uhat);
        }
        if let Some(t) = d_trace.as_mut() {
            t.push(xhat - x);
        }
    }

    TrialResult {
        bit_errors,
        num_bits: k,
        error_trace,
        d_trace,
        input: keep_traces.then_some(input),
        decoded,
    }
}

/// Average per-run bit error rate over `cfg.num_runs` independent trials.
pub fn monte_carlo_mse(sys: &DiscreteSystem, cfg: &RunConfig) -> Result<MseEstimate> {
    cfg.validate()?;
    let rates: Vec<f64> = (0..cfg.num_runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            run_trial(sys, cfg, &mut rng, false).error_rate()
        })
        .collect();
    Ok(MseEstimate::from_rates(&rates, cfg.num_bits))
}

/// Monte Carlo estimate at each SNR in `snr_db`, keeping `c`, `q`, `w` fixed.
///
/// All points share the trial streams of `cfg.seed`, so neighbouring points
/// see the same bits and noise shapes.
pub fn sweep_snr(sys: &DiscreteSystem, snr_db: &[f64], cfg: &RunConfig) -> Result<MseCurve> {
    let rows = snr_db
        .iter()
        .map(|&db| {
            let est = monte_carlo_mse(&sys.with_snr_db(db)?, cfg)?;
            Ok(MseRow::simulated(db, &est))
        })
        .collect::<Result<Vec<_>>>()?;
    MseCurve::new(rows)
}
