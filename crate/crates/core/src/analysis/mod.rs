//! Linear-case predictors and cross-realization statistics.

mod kde;
mod linear;

pub use kde::{kernel_density, silverman_bandwidth, Density};
pub use linear::{
    asymptotic_bias_linear, nobias_micro_step, tilde_constants, vr_estimator_path_linear, vr_growth_factor,
    vr_variance_prediction, TildeConstants,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;

/// Pointwise mean and unbiased (`J − 1`) variance over realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub realizations: usize,
}

impl EnsembleStats {
    /// Standard error of the mean at index `i`.
    pub fn standard_error(&self, i: usize) -> f64 {
        (self.variance[i] / self.realizations as f64).sqrt()
    }
}

/// Statistics over equally long series, one per realization.
pub fn ensemble_stats<S: AsRef<[f64]>>(series: &[S]) -> Result<EnsembleStats> {
    let j = series.len();
    if j < 2 {
        return Err(Error::InsufficientRealizations { needed: 2, got: j });
    }
    let len = series[0].as_ref().len();
    if series.iter().any(|s| s.as_ref().len() != len) {
        return Err(Error::invalid("realizations have different lengths"));
    }
    let mut mean = vec![0.0; len];
    let mut variance = vec![0.0; len];
    for i in 0..len {
        let (m, v) = mean_variance(series.iter().map(|s| s.as_ref()[i]));
        mean[i] = m;
        variance[i] = v;
    }
    Ok(EnsembleStats {
        mean,
        variance,
        realizations: j,
    })
}

/// Statistics of one scalar per realization.
pub fn scalar_stats(values: &[f64]) -> Result<EnsembleStats> {
    let series: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
    ensemble_stats(&series)
}

/// Two-pass mean and unbiased variance.
fn mean_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss = values.map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).max(0.0))
}

/// `(1/J) Σ F(X¹_j)`: the mean an unbiased estimator at the realized states would have.
pub fn exact_mean_reference(model: &Model, x_values: &[f64]) -> Result<f64> {
    if x_values.is_empty() {
        return Err(Error::InsufficientRealizations { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for &x in x_values {
        total += model.exact_f_bar(x)?;
    }
    Ok(total / x_values.len() as f64)
}
