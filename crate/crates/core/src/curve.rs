//! Error-rate curves over SNR: simulated, predicted, or both.

use serde::{Deserialize, Serialize};

use crate::chain::MseEstimate;
use crate::error::{Error, Result};
use crate::kernel::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub snr_db: f64,
    pub sim_mse: Option<f64>,
    pub sim_stderr: Option<f64>,
    pub pred_mse: Option<f64>,
    pub regime: Option<Regime>,
}

impl MseRow {
    pub fn simulated(snr_db: f64, est: &MseEstimate) -> Self {
        MseRow {
            snr_db,
            sim_mse: Some(est.mean),
            sim_stderr: Some(est.stderr),
            pred_mse: None,
            regime: None,
        }
    }

    pub fn predicted(snr_db: f64, value: f64, regime: Regime) -> Self {
        MseRow {
            snr_db,
            sim_mse: None,
            sim_stderr: None,
            pred_mse: Some(value),
            regime: Some(regime),
        }
    }

    /// `|sim - pred|` when both columns are present.
    pub fn gap(&self) -> Option<f64> {
        Some((self.sim_mse? - self.pred_mse?).abs())
    }

    /// True when the simulated and predicted values differ by more than
    /// `max(floor, k * stderr)`.
    pub fn exceeds(&self, floor: f64, k: f64) -> bool {
        match (self.gap(), self.sim_stderr) {
            (Some(gap), Some(se)) => gap > floor.max(k * se),
            _ => false,
        }
    }
}

/// Rows with strictly increasing SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseCurve {
    rows: Vec<MseRow>,
}

impl MseCurve {
    pub fn new(rows: Vec<MseRow>) -> Result<Self> {
        validate_snr_list(&rows.iter().map(|r| r.snr_db).collect::<Vec<_>>())?;
        for r in &rows {
            for v in [r.sim_mse, r.pred_mse].into_iter().flatten() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid("mse", format!("{v} outside [0, 1]")));
                }
            }
        }
        Ok(MseCurve { rows })
    }

    pub fn rows(&self) -> &[MseRow] {
        &self.rows
    }

    /// Joins a simulated and a predicted curve over the same SNR points.
    pub fn join(sim: &MseCurve, pred: &MseCurve) -> Result<Self> {
        if sim.rows.len() != pred.rows.len() {
            return Err(Error::invalid("snr_db", "curves have different lengths"));
        }
        let rows = sim
            .rows
            .iter()
            .zip(&pred.rows)
            .map(|(s, p)| {
                if s.snr_db != p.snr_db {
                    return Err(Error::invalid("snr_db", "curves sampled at different SNRs"));
                }
                Ok(MseRow {
                    pred_mse: p.pred_mse,
                    regime: p.regime,
                    ..*s
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MseCurve::new(rows)
    }

    pub fn max_gap(&self) -> Option<f64> {
        self.rows.iter().filter_map(MseRow::gap).reduce(f64::max)
    }
}

/// SNR lists must be non-empty, finite and strictly increasing.
pub fn validate_snr_list(snr_db: &[f64]) -> Result<()> {
    if snr_db.is_empty() {
        return Err(Error::invalid("snr_db", "empty SNR list"));
    }
    if let Some(bad) = snr_db.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("snr_db", format!("non-finite value {bad}")));
    }
    if snr_db.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "snr_db",
            "values must be strictly increasing",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_empty() {
        assert!(MseCurve::new(vec![]).is_err());
        let r = |db| MseRow::predicted(db, 0.1, Regime::Contractive);
        assert!(MseCurve::new(vec![r(1.0), r(1.0)]).is_err());
        assert!(MseCurve::new(vec![r(2.0), r(1.0)]).is_err());
        assert!(MseCurve::new(vec![r(1.0), r(2.0)]).is_ok());
        assert!(MseCurve::new(vec![MseRow::predicted(0.0, 1.5, Regime::Unverified)]).is_err());
    }

    #[test]
    fn join_and_flag() {
        let est = MseEstimate {
            mean: 0.2,
            stderr: 0.001,
            num_runs: 10,
            num_bits: 10,
        };
        let sim = MseCurve::new(vec![MseRow::simulated(0.0, &est)]).unwrap();
        let pred = MseCurve::new(vec![MseRow::predicted(0.0, 0.215, Regime::Unverified)]).unwrap();
        let joined = MseCurve::join(&sim, &pred).unwrap();
        let row = joined.rows()[0];
        assert!((row.gap().unwrap() - 0.015).abs() < 1e-12);
        assert!(row.exceeds(0.01, 3.0));
        assert!(!row.exceeds(0.02, 3.0));
        assert!((joined.max_gap().unwrap() - 0.015).abs() < 1e-12);
    }
}
