//! Average-contraction diagnostics for the error process viewed as an
//! iterated random function
//!
//! ```text
//! D_{k+1} = q D_k + w 1{N > |c| q D_k + |c| w (1/2 - U)} - w U.
//! ```
//!
//! For `x > y` with `q (x - y) < w`, the expected distance after one step is
//! bounded by `F(x) - F(y)`, so `sup F' < 1` certifies contraction. The closed
//! form branch conditions follow from bounding `F'` on the state space.

use std::f64::consts::{E, PI, SQRT_2};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::kernel::Grid;
use crate::model::DiscreteSystem;

/// `sqrt(2 / (e pi))`, the peak of `t exp(-t^2)` scaled into the `F'` bound.
pub fn gaussian_peak_factor() -> f64 {
    (2.0 / (E * PI)).sqrt()
}

/// Largest `q` certified at high SNR (`c^2 w^2 / sigma^2 > 4`), strict.
pub fn q_threshold_high_snr() -> f64 {
    1.0 / (3.0 + gaussian_peak_factor())
}

/// Largest `q` certified at low SNR (`c^2 w^2 / sigma^2 <= 4`), inclusive.
pub fn q_threshold_low_snr() -> f64 {
    1.0 / (1.0 + gaussian_peak_factor())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    ContractiveHighSnr,
    ContractiveLowSnr,
    Unverified,
}

impl Branch {
    pub fn is_contractive(&self) -> bool {
        !matches!(self, Branch::Unverified)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionReport {
    pub snr_ratio: f64,
    pub q_threshold_high_snr: f64,
    pub q_threshold_low_snr: f64,
    pub branch: Branch,
    pub numeric_sup_fprime: Option<f64>,
    pub empirical_ratio: Option<f64>,
    /// Set when the closed-form branch is `Unverified` but the numerical
    /// supremum of `F'` is below one.
    pub numeric_certificate: bool,
}

impl ContractionReport {
    /// Branch plus the numerical `sup F'` on `grid` and, when `pairs` is
    /// given, the empirical contraction ratio.
    pub fn diagnose<R: RngCore + ?Sized>(
        sys: &DiscreteSystem,
        grid: &Grid,
        pairs: Option<(usize, usize, &mut R)>,
    ) -> Self {
        let mut report = sufficient_condition(sys);
        let sup = numeric_sup_fprime(sys, grid);
        report.numeric_sup_fprime = Some(sup);
        report.numeric_certificate = !report.branch.is_contractive() && sup < 1.0;
        if let Some((num_pairs, num_noise, rng)) = pairs {
            report.empirical_ratio =
                Some(empirical_contraction(sys, num_pairs, num_noise, rng).max_ratio);
        }
        report
    }

    pub fn verdict(&self) -> String {
        let what = match (self.branch, self.numeric_certificate) {
            (Branch::ContractiveHighSnr, _) => "contractive (high-SNR condition)".to_string(),
            (Branch::ContractiveLowSnr, _) => "contractive (low-SNR condition)".to_string(),
            (Branch::Unverified, true) => format!(
                "contractive by numerical bound sup F' = {:.6} < 1 (closed-form condition not met)",
                self.numeric_sup_fprime.unwrap_or(f64::NAN)
            ),
            (Branch::Unverified, false) => {
                "unverified: limit may depend on the initial error".to_string()
            }
        };
        format!("snr_ratio = {:.6}: {what}", self.snr_ratio)
    }
}

/// Closed-form branch and thresholds.
pub fn sufficient_condition(sys: &DiscreteSystem) -> ContractionReport {
    let snr_ratio = sys.snr_ratio();
    let high = q_threshold_high_snr();
    let low = q_threshold_low_snr();
    let q = sys.q();
    let branch = if snr_ratio > 4.0 && q < high {
        Branch::ContractiveHighSnr
    } else if snr_ratio <= 4.0 && q <= low {
        Branch::ContractiveLowSnr
    } else {
        Branch::Unverified
    };
    ContractionReport {
        snr_ratio,
        q_threshold_high_snr: high,
        q_threshold_low_snr: low,
        branch,
        numeric_sup_fprime: None,
        empirical_ratio: None,
        numeric_certificate: false,
    }
}

struct Shape {
    c: f64,
    q: f64,
    w: f64,
    sigma: f64,
}

impl Shape {
    fn of(sys: &DiscreteSystem) -> Self {
        Shape {
            c: sys.abs_c(),
            q: sys.q(),
            w: sys.w(),
            sigma: sys.sigma(),
        }
    }

    /// Centres `c q x +- c w / 2` of the two Gaussian bumps.
    fn arms(&self, x: f64) -> (f64, f64) {
        let lean = self.c * self.q * x;
        let half = 0.5 * self.c * self.w;
        (lean + half, lean - half)
    }

    fn bump(&self, t: f64) -> f64 {
        (-t * t / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn amplitude(&self) -> f64 {
        self.c * self.w * self.q / (2.0 * self.sigma * (2.0 * PI).sqrt())
    }
}

/// `F(x) = q x - (w/4) erfc((c q x + c w/2)/(sigma sqrt 2)) - (w/4) erfc((c q x - c w/2)/(sigma sqrt 2))`.
pub fn f(sys: &DiscreteSystem, x: f64) -> f64 {
    let s = Shape::of(sys);
    let (plus, minus) = s.arms(x);
    let scale = s.sigma * SQRT_2;
    s.q * x - 0.25 * s.w * (libm::erfc(plus / scale) + libm::erfc(minus / scale))
}

pub fn f_prime(sys: &DiscreteSystem, x: f64) -> f64 {
    let s = Shape::of(sys);
    let (plus, minus) = s.arms(x);
    s.q + s.amplitude() * (s.bump(plus) + s.bump(minus))
}

pub fn f_second(sys: &DiscreteSystem, x: f64) -> f64 {
    let s = Shape::of(sys);
    let (plus, minus) = s.arms(x);
    let slope = s.c * s.q / (s.sigma * s.sigma);
    -s.amplitude() * slope * (plus * s.bump(plus) + minus * s.bump(minus))
}

/// Upper bound on `F'` over the state space when `q < 1/3`:
/// `q + (c w q / (sigma sqrt(2 pi))) exp(-c^2 w^2 (1-3q)^2 / (8 sigma^2 (1-q)^2))`.
pub fn high_snr_fprime_bound(sys: &DiscreteSystem) -> f64 {
    let s = Shape::of(sys);
    let ratio = (1.0 - 3.0 * s.q) / (1.0 - s.q);
    let cw = s.c * s.w;
    s.q + cw * s.q / (s.sigma * (2.0 * PI).sqrt())
        * (-(cw * cw) * ratio * ratio / (8.0 * s.sigma * s.sigma)).exp()
}

/// Maximum of `F'` over the grid interval: a node scan followed by
/// golden-section refinement in the cells around the best node.
pub fn numeric_sup_fprime(sys: &DiscreteSystem, grid: &Grid) -> f64 {
    let fp = |x: f64| f_prime(sys, x);
    let (best_i, best) =
        grid.nodes()
            .map(fp)
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    let a = grid.node(best_i.saturating_sub(1));
    let b = grid.node((best_i + 1).min(grid.len() - 1));
    let (_, refined) = golden_max(fp, a, b, 1e-13 * (grid.hi() - grid.lo()));
    best.max(refined)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    [(a, f(a)), (b, f(b)), (x1, f1), (x2, f2)]
        .into_iter()
        .fold(
            (a, f64::NEG_INFINITY),
            |acc, p| if p.1 > acc.1 { p } else { acc },
        )
}

/// One step of the random map driving the error process.
pub fn irf_step(sys: &DiscreteSystem, x: f64, u: u8, noise: f64) -> f64 {
    let c = sys.abs_c();
    let threshold = c * sys.q() * x + c * sys.w() * (0.5 - f64::from(u));
    let flip = if noise > threshold { sys.w() } else { 0.0 };
    sys.q() * x + flip - sys.w() * f64::from(u)
}

/// Probability `I_u` that the noise falls between the decision thresholds
/// of the two starting points, for `x > y`.
pub fn threshold_gap_probability(sys: &DiscreteSystem, x: f64, y: f64, u: u8) -> f64 {
    let c = sys.abs_c();
    let scale = sys.sigma() * SQRT_2;
    let shift = sys.w() * (0.5 - f64::from(u));
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    0.5 * libm::erfc(c * (sys.q() * lo + shift) / scale)
        - 0.5 * libm::erfc(c * (sys.q() * hi + shift) / scale)
}

/// `E |w_I(x) - w_I(y)|` in closed form:
/// `(1/2) sum_u |q d - w| I_u + q d (1 - I_u)` with `d = |x - y|`.
pub fn expected_pair_distance(sys: &DiscreteSystem, x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    let qd = sys.q() * d;
    0.5 * [0u8, 1]
        .into_iter()
        .map(|u| {
            let i_u = threshold_gap_probability(sys, x, y, u);
            (qd - sys.w()).abs() * i_u + qd * (1.0 - i_u)
        })
        .sum::<f64>()
}

/// Monte Carlo estimate of `E |w_I(x) - w_I(y)|` with its standard error.
pub fn mc_pair_distance<R: RngCore + ?Sized>(
    sys: &DiscreteSystem,
    x: f64,
    y: f64,
    num_noise: usize,
    rng: &mut R,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..num_noise {
        let u = rng.random::<bool>() as u8;
        let n: f64 = rng.sample::<f64, _>(StandardNormal) * sys.sigma();
        let d = (irf_step(sys, x, u, n) - irf_step(sys, y, u, n)).abs();
        sum += d;
        sum_sq += d * d;
    }
    let n = num_noise as f64;
    let mean = sum / n;
    let var = if num_noise > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalContraction {
    /// Largest closed-form ratio `E|w(x) - w(y)| / |x - y|` over the sampled pairs.
    pub max_ratio: f64,
    pub worst_pair: (f64, f64),
    /// Largest Monte Carlo ratio over the same pairs.
    pub mc_max_ratio: f64,
}

/// Minimum separation of a sampled pair.
pub const MIN_PAIR_GAP: f64 = 1e-6;

/// Samples `num_pairs` pairs uniformly from the state space and reports the
/// worst one-step expected distance ratio.
pub fn empirical_contraction<R: RngCore + ?Sized>(
    sys: &DiscreteSystem,
    num_pairs: usize,
    num_noise: usize,
    rng: &mut R,
) -> EmpiricalContraction {
    let (lo, hi) = sys.state_space_bounds();
    let mut out = EmpiricalContraction {
        max_ratio: f64::NEG_INFINITY,
        worst_pair: (0.0, 0.0),
        mc_max_ratio: f64::NEG_INFINITY,
    };
    let mut taken = 0;
    while taken < num_pairs.max(1) {
        let x = rng.random_range(lo..=hi);
        let y = rng.random_range(lo..=hi);
        let d = (x - y).abs();
        if d < MIN_PAIR_GAP {
            continue;
        }
        taken += 1;
        let ratio = expected_pair_distance(sys, x, y) / d;
        if ratio > out.max_ratio {
            out.max_ratio = ratio;
            out.worst_pair = (x, y);
        }
        let (mc, _) = mc_pair_distance(sys, x, y, num_noise.max(1), rng);
        out.mc_max_ratio = out.mc_max_ratio.max(mc / d);
    }
    out
}
