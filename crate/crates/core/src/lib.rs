//! Heterogeneous multiscale simulation of scalar slow-fast SDEs with a
//! seed-coupled control-variate estimator for the averaged drift.
//!
//! Layout:
//! - [`models`]: slow-fast systems and their analytic references
//! - [`micro`]: seeded Euler–Maruyama / MALA chains of the fast equation
//! - [`estimators`]: HMM, CPI and variance-reduced estimators, initialization
//! - [`macrosolver`]: forward Euler driver and trajectories
//! - [`analysis`]: linear-case predictors, ensemble statistics, KDE

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod macrosolver;
pub mod micro;
pub mod models;

pub use error::{Error, Result};
