use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Density {
    /// Gaussian kernel density evaluated on the requested grid.
    Curve { bandwidth: f64, values: Vec<f64> },
    /// All samples coincide; the distribution is a point mass.
    PointMass { location: f64 },
}

/// Silverman's rule of thumb `1.06 σ̂ n^{−1/5}` with the unbiased sample deviation.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientRealizations { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(1.06 * var.sqrt() * (n as f64).powf(-0.2))
}

pub fn kernel_density(samples: &[f64], grid: &[f64]) -> Result<Density> {
    let bandwidth = silverman_bandwidth(samples)?;
    if samples.iter().all(|&s| s == samples[0]) || !(bandwidth > 0.0) {
        return Ok(Density::PointMass { location: samples[0] });
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    let values = grid
        .iter()
        .map(|&x| {
            norm * samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(Density::Curve { bandwidth, values })
}
