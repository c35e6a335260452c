//! Micro solver: Euler–Maruyama chains of the fast equation at frozen slow state.
//!
//! A chain of length `M` started at `y⁰` takes `M` steps
//!
//! ```text
//! y^{m+1} = y^m + (δt/ε) g(X, y^m) + √(δt/ε) β(X, y^m) ξ^m
//! ```
//!
//! and returns the samples `y⁰ … y^{M−1}` together with the final state `y^M`,
//! which warm-starts the next chain. Two chains started from the same state
//! with the same seed therefore share their first sample exactly.

mod stream;

pub use stream::{mix, GaussianStream, Noise, ScriptedNoise, SeedSchedule, REALIZATION_TAG};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;

/// Slack on the Euler–Maruyama stability bound `A δt/ε ≤ 2`; the no-bias step
/// `2ε/A` rounds to a hair above 2.
const STABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroConfig {
    pub delta_t: f64,
    pub samples: usize,
    pub use_mh: bool,
}

impl MicroConfig {
    pub fn new(delta_t: f64, samples: usize, use_mh: bool) -> Result<Self> {
        let cfg = MicroConfig {
            delta_t,
            samples,
            use_mh,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::invalid(format!("micro step must be positive, got {}", self.delta_t)));
        }
        if self.samples == 0 {
            return Err(Error::invalid("micro chain needs at least one sample"));
        }
        Ok(())
    }

    /// Validates against a model; for the linear built-in this also enforces
    /// the Euler–Maruyama stability bound `A δt/ε ≤ 2`.
    pub fn validate_for(&self, model: &Model) -> Result<()> {
        self.validate()?;
        if let Some(params) = model.linear_params() {
            let a_tilde = params.a * self.delta_t / model.epsilon();
            if a_tilde > 2.0 + STABILITY_SLACK {
                return Err(Error::invalid(format!(
                    "A·δt/ε = {a_tilde} exceeds the Euler–Maruyama stability bound 2"
                )));
            }
        }
        if self.use_mh && !model.has_invariant_density() {
            return Err(Error::UnsupportedModel(
                "Metropolis correction needs the invariant density".into(),
            ));
        }
        Ok(())
    }

    pub fn with_samples(self, samples: usize) -> Self {
        MicroConfig { samples, ..self }
    }

    pub fn with_mh(self, use_mh: bool) -> Self {
        MicroConfig { use_mh, ..self }
    }
}

/// Output of one micro chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// `y⁰ … y^{M−1}`
    pub samples: Vec<f64>,
    /// `y^M`
    pub y_final: f64,
    /// Accepted proposals (equals `M` for plain Euler–Maruyama).
    pub accepted: usize,
}

fn blowup(x: f64, y: f64) -> Error {
    Error::NumericalBlowup {
        location: "micro step".into(),
        x,
        y,
    }
}

/// One Euler–Maruyama step of the fast equation at frozen `x`.
#[inline]
pub fn em_step(model: &Model, x: f64, y: f64, xi: f64, delta_t: f64) -> Result<f64> {
    let h = delta_t / model.epsilon();
    let next = y + h.mul_add(model.fast_drift(x, y), h.sqrt() * model.diffusion(x, y) * xi);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(blowup(x, y))
    }
}

pub fn em_chain<N: Noise>(model: &Model, x: f64, y0: f64, cfg: &MicroConfig, noise: &mut N) -> Result<Chain> {
    cfg.validate()?;
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut y = y0;
    for m in 0..cfg.samples {
        samples.push(y);
        y = em_step(model, x, y, noise.next_normal(), cfg.delta_t).map_err(|e| e.at(format!("micro step {m}")))?;
    }
    Ok(Chain {
        samples,
        y_final: y,
        accepted: cfg.samples,
    })
}

/// Log of the Metropolis–Hastings ratio for moving `y → proposal` with the
/// Euler–Maruyama proposal kernel and the model's invariant density.
pub fn mala_log_ratio(model: &Model, x: f64, y: f64, proposal: f64, delta_t: f64) -> Result<f64> {
    let h = delta_t / model.epsilon();
    let log_target = model.invariant_log_density(x, proposal)? - model.invariant_log_density(x, y)?;
    let log_kernel = |from: f64, to: f64| -> Result<f64> {
        let sd = h.sqrt() * model.diffusion(x, from).abs();
        if !(sd > 0.0) {
            return Err(Error::UnsupportedModel(
                "Metropolis correction needs a nonzero diffusion".into(),
            ));
        }
        let mean = from + h * model.fast_drift(x, from);
        let z = (to - mean) / sd;
        Ok(-0.5 * z * z - sd.ln())
    };
    Ok(log_target + log_kernel(proposal, y)? - log_kernel(y, proposal)?)
}

/// Acceptance probability `min(1, exp(Λ))`.
pub fn mala_acceptance(model: &Model, x: f64, y: f64, proposal: f64, delta_t: f64) -> Result<f64> {
    let log_ratio = mala_log_ratio(model, x, y, proposal, delta_t)?;
    Ok(if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() })
}

/// Euler–Maruyama chain with a Metropolis accept/reject step.
///
/// Each step consumes exactly one normal and one uniform whether or not the
/// proposal is accepted, so the increment sequence never shifts.
pub fn mala_chain<N: Noise>(model: &Model, x: f64, y0: f64, cfg: &MicroConfig, noise: &mut N) -> Result<Chain> {
    cfg.validate()?;
    if !model.has_invariant_density() {
        return Err(Error::UnsupportedModel(
            "Metropolis correction needs the invariant density".into(),
        ));
    }
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut y = y0;
    let mut accepted = 0;
    for m in 0..cfg.samples {
        samples.push(y);
        let xi = noise.next_normal();
        let u = noise.next_uniform();
        let proposal = em_step(model, x, y, xi, cfg.delta_t).map_err(|e| e.at(format!("micro step {m}")))?;
        let log_ratio = mala_log_ratio(model, x, y, proposal, cfg.delta_t)?;
        if u < log_ratio.exp() {
            y = proposal;
            accepted += 1;
        }
    }
    Ok(Chain {
        samples,
        y_final: y,
        accepted,
    })
}

/// Runs [`mala_chain`] or [`em_chain`] depending on `cfg.use_mh`.
pub fn run_chain<N: Noise>(model: &Model, x: f64, y0: f64, cfg: &MicroConfig, noise: &mut N) -> Result<Chain> {
    if cfg.use_mh {
        mala_chain(model, x, y0, cfg, noise)
    } else {
        em_chain(model, x, y0, cfg, noise)
    }
}
