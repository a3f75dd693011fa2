//! Transition kernel of the decoder error process `D_k = xhat_k - x_k` and
//! the numerics built on it.
//!
//! Given `D_{k-1} = z`, the next error is `q z` (correct decision), `q z + w`
//! (decoded 1, sent 0) or `q z - w` (decoded 0, sent 1) with
//!
//! ```text
//! P(z, qz + w) = erfc((|c| q z + |c| w / 2) / (sigma sqrt 2)) / 4
//! P(z, qz - w) = erfc((-|c| q z + |c| w / 2) / (sigma sqrt 2)) / 4
//! ```
//!
//! The expected bit error rate over `K` bits started from `D_0 = alpha` is the
//! Cesàro average `(1/K) sum_k (P^k g)(alpha)` with `g = P(., qz+w) + P(., qz-w)`.
//! Measures are represented on a uniform grid over the state space and pushed
//! forward with linear-interpolation deposition, which preserves mass and the
//! first moment.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::contraction;
use crate::error::{Error, Result};
use crate::model::DiscreteSystem;

/// Default number of grid nodes over the state space.
pub const DEFAULT_GRID_N: usize = 4001;
/// Default cap on kernel applications in [`stationary_measure`].
pub const DEFAULT_MAX_ITER: usize = 1 << 20;
/// Largest horizon accepted by [`exact_tree_mse`].
pub const MAX_TREE_HORIZON: usize = 14;
/// Atoms of the exact law closer than this are merged.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_stay: f64,
}

pub fn transition_probs(sys: &DiscreteSystem, z: f64) -> KernelRow {
    let c = sys.abs_c();
    let scale = sys.sigma() * SQRT_2;
    let lean = c * sys.q() * z;
    let half = 0.5 * c * sys.w();
    let p_plus = 0.25 * libm::erfc((lean + half) / scale);
    let p_minus = 0.25 * libm::erfc((-lean + half) / scale);
    KernelRow {
        p_plus,
        p_minus,
        p_stay: 1.0 - (p_plus + p_minus),
    }
}

/// Probability of a wrong decision given the current error state `z`.
pub fn error_rate_g(sys: &DiscreteSystem, z: f64) -> f64 {
    let row = transition_probs(sys, z);
    row.p_plus + row.p_minus
}

/// Uniform grid of `n` nodes on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::invalid(
                "grid_n",
                format!("must be odd and at least 3, got {n}"),
            ));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(
                "grid",
                format!("need lo < hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(Grid { lo, hi, n })
    }

    /// Grid over exactly `[-w/(1-q), w/(1-q)]`.
    pub fn state_space(sys: &DiscreteSystem, n: usize) -> Result<Self> {
        let (lo, hi) = sys.state_space_bounds();
        Grid::new(lo, hi, n)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    /// Node `i`, computed about the midpoint so that symmetric grids are
    /// exactly antisymmetric and contain 0.
    pub fn node(&self, i: usize) -> f64 {
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo);
        let m = (self.n - 1) as f64;
        mid + half * ((2 * i) as f64 - m) / m
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }

    /// Grid with `2n - 1` nodes over the same interval.
    pub fn refined(&self) -> Self {
        Grid {
            n: 2 * self.n - 1,
            ..*self
        }
    }

    /// Left bracketing node and the interpolation weight of its right
    /// neighbour. Points within a rounding slack of the ends are clamped.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let slack = 1e-9 * (self.hi - self.lo);
        if !(x >= self.lo - slack && x <= self.hi + slack) {
            return Err(Error::OutOfDomain {
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let s = ((x - self.lo) / self.spacing()).clamp(0.0, (self.n - 1) as f64);
        let i = (s.floor() as usize).min(self.n - 2);
        Ok((i, s - i as f64))
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.lo == other.lo && self.hi == other.hi
    }
}

/// Probability measure supported on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Grid,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights", "must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("sum to {total}, not 1")));
        }
        Ok(DiscreteMeasure { grid, weights })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(|(i, &m)| m * f(self.grid.node(i)))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x| x)
    }

    /// Image under `z -> -z`; only meaningful on a symmetric grid.
    pub fn reflected(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.reverse();
        DiscreteMeasure {
            grid: self.grid,
            weights,
        }
    }
}

/// Unit mass at `alpha`, split linearly between the two bracketing nodes.
pub fn delta_measure(grid: &Grid, alpha: f64) -> Result<DiscreteMeasure> {
    if !(alpha >= grid.lo() && alpha <= grid.hi()) {
        return Err(Error::OutOfDomain {
            value: alpha,
            lo: grid.lo(),
            hi: grid.hi(),
        });
    }
    let mut weights = vec![0.0; grid.len()];
    let (i, frac) = grid.locate(alpha)?;
    weights[i] += 1.0 - frac;
    weights[i + 1] += frac;
    Ok(DiscreteMeasure {
        grid: *grid,
        weights,
    })
}

/// Deposit of one kernel branch: mass fraction `p` split between nodes `i`
/// and `i + 1` with right weight `frac`.
#[derive(Debug, Clone, Copy)]
struct Deposit {
    i: u32,
    left: f64,
    right: f64,
}

/// The kernel restricted to a grid, precomputed once for repeated pushes.
#[derive(Debug, Clone)]
pub struct GridKernel {
    grid: Grid,
    deposits: Vec<[Deposit; 3]>,
    g: Vec<f64>,
}

impl GridKernel {
    pub fn new(sys: &DiscreteSystem, grid: &Grid) -> Result<Self> {
        let mut deposits = Vec::with_capacity(grid.len());
        let mut g = Vec::with_capacity(grid.len());
        for z in grid.nodes() {
            let row = transition_probs(sys, z);
            let qz = sys.q() * z;
            let branch = |target: f64, p: f64| -> Result<Deposit> {
                let (i, frac) = grid.locate(target)?;
                Ok(Deposit {
                    i: i as u32,
                    left: p * (1.0 - frac),
                    right: p * frac,
                })
            };
            deposits.push([
                branch(qz, row.p_stay)?,
                branch(qz + sys.w(), row.p_plus)?,
                branch(qz - sys.w(), row.p_minus)?,
            ]);
            g.push(row.p_plus + row.p_minus);
        }
        Ok(GridKernel {
            grid: *grid,
            deposits,
            g,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `g` at the grid nodes.
    pub fn g_values(&self) -> &[f64] {
        &self.g
    }

    /// `∫ g dmu`.
    pub fn expected_error(&self, mu: &DiscreteMeasure) -> f64 {
        self.g.iter().zip(&mu.weights).map(|(g, m)| g * m).sum()
    }

    /// Writes `mu P` into `out`, in source-index order.
    pub fn push_into(&self, mu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, deps) in mu.iter().zip(&self.deposits) {
            if *m == 0.0 {
                continue;
            }
            for d in deps {
                let i = d.i as usize;
                out[i] += m * d.left;
                out[i + 1] += m * d.right;
            }
        }
    }

    pub fn push(&self, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if !self.grid.same_as(&mu.grid) {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![0.0; self.grid.len()];
        self.push_into(&mu.weights, &mut out);
        Ok(DiscreteMeasure {
            grid: self.grid,
            weights: out,
        })
    }
}

/// One application of the kernel: `mu -> mu P`.
pub fn push_forward(sys: &DiscreteSystem, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    GridKernel::new(sys, mu.grid())?.push(mu)
}

/// `(1/N) sum_{k<N} ∫ g d(delta_alpha P^k)`: the expected error rate of an
/// `N`-bit transmission started at `D_0 = alpha`, up to grid error.
pub fn cesaro_mse(sys: &DiscreteSystem, alpha: f64, n_steps: usize, grid: &Grid) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    let kernel = GridKernel::new(sys, grid)?;
    let mut mu = delta_measure(grid, alpha)?.weights;
    let mut next = vec![0.0; grid.len()];
    let mut total = 0.0;
    for k in 0..n_steps {
        total += kernel.g.iter().zip(&mu).map(|(g, m)| g * m).sum::<f64>();
        if k + 1 < n_steps {
            kernel.push_into(&mu, &mut next);
            std::mem::swap(&mut mu, &mut next);
        }
    }
    Ok(total / n_steps as f64)
}

#[derive(Debug, Clone)]
pub struct Stationary {
    pub measure: DiscreteMeasure,
    /// Kernel applications performed.
    pub iterations: usize,
    /// W1 distance between the last two averaging windows.
    pub final_gap: f64,
}

/// Long-run law of the error process started at `alpha`.
///
/// Averages the iterates over doubling windows `[N, 2N)`, `N = 1, 2, 4, ...`
/// and stops once two consecutive window averages are within `tol` in W1.
/// Each window average converges to the same limit as the plain Cesàro mean
/// `(1/N) sum_{k<N} mu_k` (it equals `2 nu_{2N} - nu_N`), but the transient
/// `O(1/N)` term of the plain mean is cancelled.
pub fn stationary_measure(
    sys: &DiscreteSystem,
    grid: &Grid,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Stationary> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(
            "tol",
            format!("must be positive, got {tol}"),
        ));
    }
    let kernel = GridKernel::new(sys, grid)?;
    stationary_with(&kernel, alpha, tol, max_iter)
}

pub fn stationary_with(
    kernel: &GridKernel,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Stationary> {
    let grid = *kernel.grid();
    let n = grid.len();
    let mut mu = delta_measure(&grid, alpha)?.weights;
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut previous: Option<DiscreteMeasure> = None;
    let mut last_gap = f64::INFINITY;

    kernel.push_into(&mu, &mut next);
    std::mem::swap(&mut mu, &mut next);
    let mut iterations = 1;
    let mut window = 1usize;

    loop {
        if iterations + window > max_iter {
            return Err(Error::NotConverged {
                iterations,
                last_gap,
            });
        }
        // mu holds mu_window; accumulate mu_window .. mu_{2 window - 1}
        acc.copy_from_slice(&mu);
        for _ in 1..window {
            kernel.push_into(&mu, &mut next);
            std::mem::swap(&mut mu, &mut next);
            acc.iter_mut().zip(&mu).for_each(|(a, m)| *a += m);
        }
        kernel.push_into(&mu, &mut next);
        std::mem::swap(&mut mu, &mut next);
        iterations += window;

        let inv = 1.0 / window as f64;
        let avg = DiscreteMeasure {
            grid,
            weights: acc.iter().map(|a| a * inv).collect(),
        };
        if let Some(prev) = &previous {
            last_gap = wasserstein1(prev, &avg)?;
            if last_gap < tol {
                return Ok(Stationary {
                    measure: avg,
                    iterations,
                    final_gap: last_gap,
                });
            }
        }
        previous = Some(avg);
        window *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Average contraction holds: the limit does not depend on the start.
    Contractive,
    /// No contraction certificate; the limit is reported for the given start.
    Unverified,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Contractive => "Contractive",
            Regime::Unverified => "Unverified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub value: f64,
    pub regime: Regime,
    /// True when only the numerical bound on `F'` certifies contraction.
    pub numeric_certificate: bool,
    pub iterations: usize,
    /// `W1(nu P, nu)` for the returned measure.
    pub w1_residual: f64,
    pub final_gap: f64,
}

/// Long-run bit error rate `∫ g dnu` from `D_0 = alpha`.
pub fn predicted_mse(
    sys: &DiscreteSystem,
    alpha: f64,
    grid: &Grid,
    tol: f64,
    max_iter: usize,
) -> Result<Prediction> {
    let report = contraction::sufficient_condition(sys);
    let sup = contraction::numeric_sup_fprime(sys, grid);
    let (regime, numeric_certificate) = match (report.branch.is_contractive(), sup < 1.0) {
        (true, _) => (Regime::Contractive, false),
        (false, true) => (Regime::Contractive, true),
        (false, false) => (Regime::Unverified, false),
    };

    let kernel = GridKernel::new(sys, grid)?;
    let st = stationary_with(&kernel, alpha, tol, max_iter)?;
    let pushed = kernel.push(&st.measure)?;
    Ok(Prediction {
        value: kernel.expected_error(&st.measure),
        regime,
        numeric_certificate,
        iterations: st.iterations,
        w1_residual: wasserstein1(&pushed, &st.measure)?,
        final_gap: st.final_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeOracle {
    pub mse: f64,
    /// Atoms in the law of `D_{K-1}`.
    pub atom_count: usize,
}

/// Exact `K`-bit error rate by enumerating the finitely supported law of
/// `D_0, ..., D_{K-1}` started at `alpha`.
pub fn exact_tree_mse(sys: &DiscreteSystem, alpha: f64, k: usize) -> Result<TreeOracle> {
    if k > MAX_TREE_HORIZON {
        return Err(Error::HorizonTooLarge {
            k,
            max: MAX_TREE_HORIZON,
        });
    }
    if k == 0 {
        return Err(Error::invalid("K", "must be at least 1"));
    }
    if !alpha.is_finite() {
        return Err(Error::invalid("alpha", "must be finite"));
    }

    let mut atoms = vec![(alpha, 1.0)];
    let mut total = 0.0;
    for step in 0..k {
        total += atoms
            .iter()
            .map(|&(z, p)| p * error_rate_g(sys, z))
            .sum::<f64>();
        if step + 1 == k {
            break;
        }
        let mut next = Vec::with_capacity(3 * atoms.len());
        for &(z, p) in &atoms {
            let row = transition_probs(sys, z);
            let qz = sys.q() * z;
            for (v, pv) in [
                (qz, row.p_stay),
                (qz + sys.w(), row.p_plus),
                (qz - sys.w(), row.p_minus),
            ] {
                if pv * p > 0.0 {
                    next.push((v, p * pv));
                }
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms.clear();
        for (v, p) in next {
            match atoms.last_mut() {
                Some((lv, lp)) if (v - *lv).abs() <= ATOM_MERGE_TOL => *lp += p,
                _ => atoms.push((v, p)),
            }
        }
    }
    Ok(TreeOracle {
        mse: total / k as f64,
        atom_count: atoms.len(),
    })
}

/// Exact W1 between two measures on the same grid: `h sum_i |F_mu - F_nu|`.
pub fn wasserstein1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if !mu.grid.same_as(&nu.grid) {
        return Err(Error::GridMismatch);
    }
    let mut cdf_gap = 0.0;
    let mut sum = 0.0;
    let last = mu.weights.len() - 1;
    for (a, b) in mu.weights[..last].iter().zip(&nu.weights[..last]) {
        cdf_gap += a - b;
        sum += cdf_gap.abs();
    }
    Ok(sum * mu.grid.spacing())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(q: f64, w: f64, c: f64, sigma: f64) -> DiscreteSystem {
        DiscreteSystem::new(q, w, c, sigma).unwrap()
    }

    /// Standard normal upper tail by Simpson quadrature of the density.
    fn q_tail(x: f64) -> f64 {
        let upper = x + 12.0;
        let n = 20_000;
        let h = (upper - x) / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(x) + pdf(upper);
        for i in 1..n {
            let t = x + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(t);
        }
        s * h / 3.0
    }

    #[test]
    fn quadrature_oracle_matches_table() {
        assert!((q_tail(1.0) - 0.158655).abs() < 1e-6);
    }

    #[test]
    fn row_at_zero() {
        // c w / sigma = 2
        let s = sys(0.5, 1.0, 1.0, 0.5);
        let row = transition_probs(&s, 0.0);
        let expect = 0.5 * q_tail(1.0);
        assert!((row.p_plus - expect).abs() < 1e-10);
        assert!((row.p_minus - expect).abs() < 1e-10);
        assert!((row.p_plus - 0.0793276).abs() < 1e-7);
        assert_eq!(row.p_plus + row.p_minus + row.p_stay, 1.0);
    }

    #[test]
    fn row_at_singular_point() {
        let s = sys(0.6, 0.9, 1.7, 0.01);
        let z = s.w() / (2.0 * s.q());
        let row = transition_probs(&s, z);
        assert!((row.p_minus - 0.25).abs() < 1e-12);
        // Given U = 1 (probability 1/2) the decoder errs with probability 1/2.
        assert!((row.p_minus / 0.5 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn row_limits() {
        let s = sys(0.5, 1.0, 1.0, 1.0);
        let row = transition_probs(&s, 1e3);
        assert!(row.p_plus < 1e-100);
        assert!((row.p_minus - 0.5).abs() < 1e-12);
    }

    #[test]
    fn high_snr_tail_keeps_relative_precision() {
        let s = sys(0.2, 1.0, 1.0, 0.05);
        let p = transition_probs(&s, 0.0).p_plus;
        // erfc(7.0710678) / 4 = Q(10) / 2
        assert!((p / (7.619853024160527e-24 / 2.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn g_examples() {
        let s = sys(0.5, 1.0, 1.0, 0.5);
        assert!((error_rate_g(&s, 0.0) - 0.158655).abs() < 1e-6);
        for i in 0..50 {
            let z = -2.0 + 0.08 * i as f64;
            assert!((error_rate_g(&s, z) - error_rate_g(&s, -z)).abs() < 1e-15);
        }
        let noisy = sys(0.5, 1.0, 1.0, 1e6);
        for i in 0..=10 {
            let z = -2.0 + 0.4 * i as f64;
            assert!((error_rate_g(&noisy, z) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_validation_and_nodes() {
        assert!(Grid::new(-1.0, 1.0, 4).is_err());
        assert!(Grid::new(-1.0, 1.0, 1).is_err());
        assert!(Grid::new(1.0, 1.0, 5).is_err());
        let g = Grid::new(-2.0, 2.0, 9).unwrap();
        assert_eq!(g.node(4), 0.0);
        assert_eq!(g.node(0), -2.0);
        assert_eq!(g.node(8), 2.0);
        for i in 0..9 {
            assert_eq!(g.node(i), -g.node(8 - i));
        }
        assert!(g.locate(2.5).is_err());
        assert_eq!(g.locate(2.0).unwrap(), (7, 1.0));
    }

    #[test]
    fn delta_examples() {
        let g = Grid::new(-2.0, 2.0, 9).unwrap();
        let d = delta_measure(&g, 0.0).unwrap();
        assert_eq!(d.weights()[4], 1.0);
        assert_eq!(d.weights().iter().filter(|&&w| w != 0.0).count(), 1);
        let d = delta_measure(&g, 0.25).unwrap();
        assert!((d.weights()[4] - 0.5).abs() < 1e-15);
        assert!((d.weights()[5] - 0.5).abs() < 1e-15);
        for &a in &[-1.9, -0.3, 0.123, 1.77, 2.0] {
            assert!((delta_measure(&g, a).unwrap().mean() - a).abs() < 1e-15);
        }
        assert!(matches!(
            delta_measure(&g, 2.1),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn push_of_delta_zero() {
        let s = sys(0.5, 1.0, 1.0, 0.7);
        let g = Grid::state_space(&s, 9).unwrap(); // nodes at -2, -1.5, ..., 2
        let mu = push_forward(&s, &delta_measure(&g, 0.0).unwrap()).unwrap();
        let row = transition_probs(&s, 0.0);
        assert!((mu.weights()[4] - row.p_stay).abs() < 1e-15);
        assert!((mu.weights()[6] - row.p_plus).abs() < 1e-15);
        assert!((mu.weights()[2] - row.p_minus).abs() < 1e-15);
    }

    #[test]
    fn push_conserves_mass_over_many_steps() {
        let s = sys(0.7, 0.8, 1.0, 0.3);
        let g = Grid::state_space(&s, 801).unwrap();
        let kernel = GridKernel::new(&s, &g).unwrap();
        let mut mu = delta_measure(&g, 0.0).unwrap();
        for _ in 0..10_000 {
            mu = kernel.push(&mu).unwrap();
        }
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        assert!(mu.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn push_mean_identity() {
        let s = sys(0.45, 1.2, -0.8, 0.5);
        let g = Grid::state_space(&s, 1001).unwrap();
        let mut mu = delta_measure(&g, 0.4 * g.hi()).unwrap();
        for _ in 0..20 {
            let next = push_forward(&s, &mu).unwrap();
            let drift = mu.integrate(|z| {
                let r = transition_probs(&s, z);
                r.p_plus - r.p_minus
            });
            let expect = s.q() * mu.mean() + s.w() * drift;
            assert!((next.mean() - expect).abs() < 1e-12);
            mu = next;
        }
    }

    #[test]
    fn push_rejects_grid_smaller_than_state_space() {
        let s = sys(0.5, 1.0, 1.0, 1.0);
        let g = Grid::new(-1.0, 1.0, 11).unwrap();
        assert!(matches!(
            push_forward(&s, &delta_measure(&g, 0.0).unwrap()),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn w1_examples() {
        let g = Grid::new(-1.0, 1.0, 21).unwrap();
        let a = delta_measure(&g, -0.4).unwrap();
        let b = delta_measure(&g, 0.7).unwrap();
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        assert!((wasserstein1(&a, &b).unwrap() - 1.1).abs() < 1e-12);
        let other = Grid::new(-1.0, 1.0, 23).unwrap();
        assert!(matches!(
            wasserstein1(&a, &delta_measure(&other, 0.0).unwrap()),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn cesaro_single_step_is_g() {
        let s = sys(0.5, 1.0, 1.0, 0.6);
        let g = Grid::state_space(&s, 401).unwrap();
        for &a in &[0.0, 0.5, -1.5] {
            let v = cesaro_mse(&s, a, 1, &g).unwrap();
            assert!((v - error_rate_g(&s, a)).abs() < 1e-12);
        }
        assert!(cesaro_mse(&s, 0.0, 0, &g).is_err());
    }

    #[test]
    fn cesaro_increases_with_noise() {
        let base = sys(0.6, 0.8, 1.0, 1.0);
        let mut prev = 0.0;
        for &db in &[15.0, 10.0, 6.0, 3.0, 0.0, -5.0] {
            let s = base.with_snr_db(db).unwrap();
            let g = Grid::state_space(&s, 801).unwrap();
            let v = cesaro_mse(&s, 0.0, 50, &g).unwrap();
            assert!(v > prev, "{db} dB: {v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn tree_examples() {
        let s = sys(0.55, 0.9, 1.0, 0.4);
        let one = exact_tree_mse(&s, 0.3, 1).unwrap();
        assert_eq!(one.mse, error_rate_g(&s, 0.3));
        assert_eq!(one.atom_count, 1);
        assert!(matches!(
            exact_tree_mse(&s, 0.0, 15),
            Err(Error::HorizonTooLarge { k: 15, .. })
        ));
        assert!(exact_tree_mse(&s, 0.0, 0).is_err());
    }

    #[test]
    fn tree_law_is_normalized() {
        // Recompute the law by hand and check conservation at K = 8.
        let s = sys(0.45, 0.7, 1.0, 0.5);
        let mut atoms = vec![(0.0f64, 1.0f64)];
        for _ in 0..8 {
            let mut next = Vec::new();
            for &(z, p) in &atoms {
                let r = transition_probs(&s, z);
                next.push((s.q() * z, p * r.p_stay));
                next.push((s.q() * z + s.w(), p * r.p_plus));
                next.push((s.q() * z - s.w(), p * r.p_minus));
            }
            atoms = next;
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Unmerged brute force and merged oracle agree.
        let brute: f64 = {
            let mut atoms = vec![(0.0f64, 1.0f64)];
            let mut acc = 0.0;
            for k in 0..9 {
                acc += atoms
                    .iter()
                    .map(|&(z, p)| p * error_rate_g(&s, z))
                    .sum::<f64>();
                if k == 8 {
                    break;
                }
                let mut next = Vec::new();
                for &(z, p) in &atoms {
                    let r = transition_probs(&s, z);
                    next.push((s.q() * z, p * r.p_stay));
                    next.push((s.q() * z + s.w(), p * r.p_plus));
                    next.push((s.q() * z - s.w(), p * r.p_minus));
                }
                atoms = next;
            }
            acc / 9.0
        };
        let oracle = exact_tree_mse(&s, 0.0, 9).unwrap();
        assert!((oracle.mse - brute).abs() < 1e-13);
        assert!(oracle.atom_count <= 3usize.pow(8));
    }

    #[test]
    fn cesaro_matches_tree() {
        let s = sys(0.5, 1.0, 1.0, 0.5);
        let g = Grid::state_space(&s, DEFAULT_GRID_N).unwrap();
        let grid_value = cesaro_mse(&s, 0.0, 10, &g).unwrap();
        let exact = exact_tree_mse(&s, 0.0, 10).unwrap().mse;
        assert!((grid_value - exact).abs() < 1e-3, "{grid_value} vs {exact}");
    }

    #[test]
    fn stationary_is_fixed_point_and_symmetric() {
        let s = sys(0.2, 1.0, 1.0, 1.0);
        let g = Grid::state_space(&s, 1001).unwrap();
        let tol = 1e-6;
        let st = stationary_measure(&s, &g, 0.0, tol, DEFAULT_MAX_ITER).unwrap();
        let pushed = push_forward(&s, &st.measure).unwrap();
        assert!(wasserstein1(&pushed, &st.measure).unwrap() < 5.0 * tol);
        assert!(wasserstein1(&st.measure, &st.measure.reflected()).unwrap() < tol);
        assert!(st.final_gap < tol);

        let other = stationary_measure(&s, &g, 0.6 * g.hi(), tol, DEFAULT_MAX_ITER).unwrap();
        assert!(wasserstein1(&st.measure, &other.measure).unwrap() < 10.0 * tol);
    }

    #[test]
    fn stationary_reports_non_convergence() {
        let s = sys(0.9, 1.0, 1.0, 0.2);
        let g = Grid::state_space(&s, 401).unwrap();
        match stationary_measure(&s, &g, 0.0, 1e-15, 8) {
            Err(Error::NotConverged { iterations, .. }) => assert!(iterations <= 8),
            other => panic!("expected NotConverged, got {other:?}"),
        }
        assert!(stationary_measure(&s, &g, 0.0, 0.0, 8).is_err());
    }

    #[test]
    fn prediction_limits() {
        let q = (-2f64).exp();
        let base = sys(q, 0.5 * (1.0 - q), 1.0, 1.0);
        let low = base.with_snr_db(-20.0).unwrap();
        let g = Grid::state_space(&low, DEFAULT_GRID_N).unwrap();
        let p = predicted_mse(&low, 0.0, &g, 1e-6, DEFAULT_MAX_ITER).unwrap();
        assert!((0.45..=0.5).contains(&p.value), "{}", p.value);

        let high = base.with_snr_db(20.0).unwrap();
        let p = predicted_mse(&high, 0.0, &g, 1e-6, DEFAULT_MAX_ITER).unwrap();
        assert!(p.value < 0.02, "{}", p.value);
        assert_eq!(p.regime, Regime::Contractive);
        let p2 = predicted_mse(&high, 0.5 * g.hi(), &g, 1e-6, DEFAULT_MAX_ITER).unwrap();
        assert!((p.value - p2.value).abs() < 1e-5);
    }

    mod prop {
        use super::super::*;
        use proptest::prelude::*;

        fn measure(grid: Grid, raw: &[f64]) -> DiscreteMeasure {
            let total: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let drift: f64 = 1.0 - w.iter().sum::<f64>();
            w[0] = (w[0] + drift).max(0.0);
            DiscreteMeasure::new(grid, w).unwrap()
        }

        proptest! {
            #[test]
            fn w1_triangle_inequality(
                a in proptest::collection::vec(0.01f64..1.0, 41),
                b in proptest::collection::vec(0.01f64..1.0, 41),
                c in proptest::collection::vec(0.01f64..1.0, 41),
            ) {
                let g = Grid::new(-3.0, 3.0, 41).unwrap();
                let (a, b, c) = (measure(g, &a), measure(g, &b), measure(g, &c));
                let ab = wasserstein1(&a, &b).unwrap();
                let bc = wasserstein1(&b, &c).unwrap();
                let ac = wasserstein1(&a, &c).unwrap();
                prop_assert!(ac <= ab + bc + 1e-12);
                prop_assert!((ab - wasserstein1(&b, &a).unwrap()).abs() < 1e-12);
            }

            #[test]
            fn kernel_reflection_symmetry(
                q in 0.01f64..0.99,
                w in 0.1f64..3.0,
                c in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
                sigma in 0.01f64..5.0,
                z in -50.0f64..50.0,
            ) {
                let s = DiscreteSystem::new(q, w, c, sigma).unwrap();
                let r = transition_probs(&s, z);
                let m = transition_probs(&s, -z);
                prop_assert_eq!(r.p_plus, m.p_minus);
                prop_assert_eq!(r.p_plus + r.p_minus + r.p_stay, 1.0);
                prop_assert!(r.p_plus <= 0.5 && r.p_minus <= 0.5);
                prop_assert!(r.p_plus + r.p_minus <= 0.5 + 1e-15);
                // a single branch reaches 1/4 at the singular points +-w/(2q)
                let singular = w / (2.0 * q);
                if z > -singular * (1.0 - 1e-12) {
                    prop_assert!(r.p_plus <= 0.25 + 1e-15);
                }
                if z < singular * (1.0 - 1e-12) {
                    prop_assert!(r.p_minus <= 0.25 + 1e-15);
                }
            }
        }
    }
}
