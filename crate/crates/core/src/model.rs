//! System parameters and the conversions shared by the simulator and the
//! analytic predictor.
//!
//! The continuous model `x' = a x + b u`, `y = c x + n` sampled with period
//! `tau` under a piecewise-constant input becomes
//!
//! ```text
//! x_k = q x_{k-1} + w u_{k-1},    y_k = c x_k + n_k,
//! q = exp(tau a),                 w = -(b / a) (1 - q).
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous-time parameters. Only used as an input to [`discretize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSystem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub tau: f64,
}

impl ContinuousSystem {
    pub fn new(a: f64, b: f64, c: f64, tau: f64) -> Result<Self> {
        let sys = ContinuousSystem { a, b, c, tau };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a < 0.0) {
            return Err(Error::invalid(
                "a",
                format!("must be finite and negative, got {}", self.a),
            ));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(
                "tau",
                format!("must be finite and positive, got {}", self.tau),
            ));
        }
        if !self.b.is_finite() {
            return Err(Error::invalid("b", "must be finite"));
        }
        if !self.c.is_finite() || self.c == 0.0 {
            return Err(Error::invalid(
                "c",
                format!("must be finite and non-zero, got {}", self.c),
            ));
        }
        Ok(())
    }
}

/// Sampled system `(q, w, c, sigma)`.
///
/// Invariants: `0 < q < 1`, `w > 0`, `c != 0`, `sigma > 0`, all finite.
/// A negative `c` is allowed; the decoder and the analysis only depend on
/// `|c|` through the symmetry of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteSystem {
    q: f64,
    w: f64,
    c: f64,
    sigma: f64,
}

impl DiscreteSystem {
    pub fn new(q: f64, w: f64, c: f64, sigma: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0 && q < 1.0) {
            return Err(Error::invalid("q", format!("must lie in (0, 1), got {q}")));
        }
        if !w.is_finite() {
            return Err(Error::invalid("w", "must be finite"));
        }
        if w <= 0.0 {
            return Err(Error::NonPositiveW { w });
        }
        if !c.is_finite() || c == 0.0 {
            return Err(Error::invalid(
                "c",
                format!("must be finite and non-zero, got {c}"),
            ));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(
                "sigma",
                format!("must be finite and positive, got {sigma}"),
            ));
        }
        Ok(DiscreteSystem { q, w, c, sigma })
    }

    /// Discretizes `sys` and attaches the noise level.
    pub fn from_continuous(sys: &ContinuousSystem, sigma: f64) -> Result<Self> {
        let (q, w) = discretize(sys)?;
        DiscreteSystem::new(q, w, sys.c, sigma)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `|c|`, the gain seen by the error process.
    pub fn abs_c(&self) -> f64 {
        self.c.abs()
    }

    /// Same system with another noise level.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        DiscreteSystem::new(self.q, self.w, self.c, sigma)
    }

    /// Same system with the noise level set so that `snr_db` equals `target_db`.
    pub fn with_snr_db(&self, target_db: f64) -> Result<Self> {
        self.with_sigma(sigma_for_snr(self, target_db)?)
    }

    /// Linear signal-to-noise ratio `c^2 w^2 / sigma^2`.
    pub fn snr_ratio(&self) -> f64 {
        let s = self.c * self.w / self.sigma;
        s * s
    }

    pub fn snr_db(&self) -> f64 {
        snr_db(self)
    }

    pub fn state_space_bounds(&self) -> (f64, f64) {
        state_space_bounds(self)
    }
}

/// Maps continuous parameters to `(q, w)`.
///
/// Fails with [`Error::NonPositiveW`] when `b <= 0`.
pub fn discretize(sys: &ContinuousSystem) -> Result<(f64, f64)> {
    sys.validate()?;
    let q = (sys.tau * sys.a).exp();
    // -expm1 keeps 1 - q accurate when tau * a is tiny.
    let one_minus_q = -(sys.tau * sys.a).exp_m1();
    let w = -(sys.b / sys.a) * one_minus_q;
    if w.is_nan() || w <= 0.0 {
        return Err(Error::NonPositiveW { w });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(
            "a",
            format!("tau * a = {} gives q = {q} outside (0, 1)", sys.tau * sys.a),
        ));
    }
    Ok((q, w))
}

/// `10 log10(c^2 w^2 / sigma^2)`.
pub fn snr_db(sys: &DiscreteSystem) -> f64 {
    20.0 * (sys.c.abs() * sys.w / sys.sigma).log10()
}

/// Noise standard deviation giving `target_db`: `|c w| / 10^(target_db / 20)`.
pub fn sigma_for_snr(sys: &DiscreteSystem, target_db: f64) -> Result<f64> {
    if !target_db.is_finite() {
        return Err(Error::invalid(
            "snr_db",
            format!("must be finite, got {target_db}"),
        ));
    }
    Ok((sys.c * sys.w).abs() / 10f64.powf(target_db / 20.0))
}

/// The compact interval `[-w/(1-q), w/(1-q)]` on which the error process lives
/// once it starts at zero.
pub fn state_space_bounds(sys: &DiscreteSystem) -> (f64, f64) {
    let hi = sys.w / (1.0 - sys.q);
    (-hi, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn discretize_unit_decay() {
        let (q, w) = discretize(&ContinuousSystem::new(-1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(close(q, 0.367879, 1e-6));
        assert!(close(w, 0.632121, 1e-6));
        assert!(close(q, (-1f64).exp(), 1e-15));
    }

    #[test]
    fn discretize_faster_decay() {
        let (q, w) = discretize(&ContinuousSystem::new(-2.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(close(q, 0.135335, 1e-6));
        assert!(close(w, 0.432332, 1e-6));
    }

    #[test]
    fn discretize_fast_limit() {
        let (q, w) = discretize(&ContinuousSystem::new(-200.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(q < 1e-80);
        assert!(w > 0.0 && w < 0.006);
    }

    #[test]
    fn discretize_rejects_non_positive_b() {
        let sys = ContinuousSystem::new(-1.0, -1.0, 1.0, 1.0).unwrap();
        assert!(matches!(discretize(&sys), Err(Error::NonPositiveW { .. })));
        let sys = ContinuousSystem::new(-1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(discretize(&sys), Err(Error::NonPositiveW { .. })));
    }

    #[test]
    fn continuous_validation() {
        assert!(ContinuousSystem::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ContinuousSystem::new(-1.0, 1.0, 1.0, 0.0).is_err());
        assert!(ContinuousSystem::new(-1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn discrete_validation() {
        assert!(DiscreteSystem::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(DiscreteSystem::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(matches!(
            DiscreteSystem::new(0.5, -1.0, 1.0, 1.0),
            Err(Error::NonPositiveW { .. })
        ));
        assert!(DiscreteSystem::new(0.5, 1.0, 0.0, 1.0).is_err());
        assert!(DiscreteSystem::new(0.5, 1.0, 1.0, 0.0).is_err());
        assert!(DiscreteSystem::new(0.5, 1.0, -1.0, 1.0).is_ok());
    }

    #[test]
    fn snr_examples() {
        let s = DiscreteSystem::new(0.5, 1.0, 1.0, 1.0).unwrap();
        assert!(close(snr_db(&s), 0.0, 1e-15));
        let s = DiscreteSystem::new(0.5, 1.0, 1.0, 0.5).unwrap();
        assert!(close(snr_db(&s), 6.020599913279624, 1e-12));
        let s = DiscreteSystem::new(0.5, 0.5, 2.0, 1.0).unwrap();
        assert!(close(snr_db(&s), 0.0, 1e-15));
    }

    #[test]
    fn sigma_for_snr_examples() {
        let s = DiscreteSystem::new(0.5, 1.0, 1.0, 1.0).unwrap();
        assert!(close(sigma_for_snr(&s, 0.0).unwrap(), 1.0, 1e-15));
        assert!(close(sigma_for_snr(&s, 20.0).unwrap(), 0.1, 1e-15));
        let s = DiscreteSystem::new(0.5, 0.632121, 1.0, 1.0).unwrap();
        assert!(close(sigma_for_snr(&s, 6.0).unwrap(), 0.316811, 1e-6));
        assert!(sigma_for_snr(&s, f64::NAN).is_err());
    }

    #[test]
    fn bounds_examples() {
        let s = DiscreteSystem::new(0.5, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(state_space_bounds(&s), (-2.0, 2.0));
        let q = (-1f64).exp();
        let s = DiscreteSystem::new(q, 1.0 - q, 1.0, 1.0).unwrap();
        let (lo, hi) = state_space_bounds(&s);
        assert!(close(hi, 1.0, 1e-15));
        assert_eq!(lo, -hi);
    }

    #[test]
    fn discretize_is_monotone_in_a() {
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let a = -0.05 * i as f64;
            let (q, _) = discretize(&ContinuousSystem::new(a, 1.0, 1.0, 1.0).unwrap()).unwrap();
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn unit_gain_bounds_are_inverse_decay() {
        for &a in &[-0.3, -0.5, -1.0, -2.0, -7.5] {
            let sys = DiscreteSystem::from_continuous(
                &ContinuousSystem::new(a, 1.0, 1.0, 1.0).unwrap(),
                1.0,
            )
            .unwrap();
            let (lo, hi) = sys.state_space_bounds();
            assert!(close(hi, 1.0 / a.abs(), 1e-12));
            assert_eq!(lo, -hi);
        }
    }

    mod prop {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn snr_round_trip(
                q in 0.01f64..0.99,
                w in 0.01f64..10.0,
                c in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0],
                target in -40.0f64..40.0,
            ) {
                let sys = DiscreteSystem::new(q, w, c, 1.0).unwrap();
                let tuned = sys.with_snr_db(target).unwrap();
                let got = tuned.snr_db();
                prop_assert!((got - target).abs() <= 1e-12 * target.abs().max(1.0));
            }
        }
    }
}
