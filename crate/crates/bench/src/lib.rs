//! Benchmark fixtures shared by the criterion targets.

use osa_core::{ContinuousSystem, DiscreteSystem};

/// The unit-decay system `a = -1`, `b = c = tau = 1` at `snr_db`.
pub fn unit_decay(snr_db: f64) -> DiscreteSystem {
    let cont = ContinuousSystem::new(-1.0, 1.0, 1.0, 1.0).expect("valid system");
    DiscreteSystem::from_continuous(&cont, 1.0)
        .and_then(|s| s.with_snr_db(snr_db))
        .expect("valid SNR")
}
