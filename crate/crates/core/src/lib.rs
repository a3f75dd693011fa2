//! Online reconstruction of the binary input of a stable scalar linear
//! system from noisy outputs, with an analytic prediction of the decoder's
//! long-run bit error rate.
//!
//! * [`model`]: parameters, discretization and SNR arithmetic.
//! * [`chain`]: encoder/channel simulation, the one-state decoder and the
//!   Monte Carlo harness.
//! * [`kernel`]: the Markov kernel of the decoder error, grid measures,
//!   Cesàro and stationary predictions, and the exact enumeration oracle.
//! * [`contraction`]: average-contraction conditions and diagnostics.
//! * [`curve`] and [`config`]: shared output rows and experiment manifests.

pub mod chain;
pub mod config;
pub mod contraction;
pub mod curve;
pub mod error;
pub mod kernel;
pub mod model;

pub use chain::{monte_carlo_mse, run_trial, sweep_snr, MseEstimate, RunConfig, TrialResult};
pub use contraction::{Branch, ContractionReport};
pub use curve::{MseCurve, MseRow};
pub use error::{Error, Result};
pub use kernel::{
    cesaro_mse, exact_tree_mse, predicted_mse, stationary_measure, wasserstein1, DiscreteMeasure,
    Grid, GridKernel, KernelRow, Prediction, Regime,
};
pub use model::{ContinuousSystem, DiscreteSystem};
