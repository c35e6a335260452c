//! Time-derivative estimators for the averaged equation.
//!
//! * [`hmm_estimate`]: time average of `f(X, y)` along one micro chain.
//! * [`cpi_estimate`]: ensemble slope of the slow variable after `K` steps of the full system.
//! * [`vr_estimate`]: the control-variate estimator
//!   `F̄ⁿ = F̂(Xⁿ; ωₙ) − (F̂(Xⁿ⁻¹; ωₙ) − F̄ⁿ⁻¹)`, where both HMM terms replay the
//!   same increments from the same starting state.
//! * [`initialize`]: the exact / estimated / averaged starting value for the recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro::{em_chain, run_chain, GaussianStream, MicroConfig, Noise, SeedSchedule};
use crate::models::Model;

/// The two coupled HMM estimates behind one variance-reduced value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledPair {
    /// `F̂(Xⁿ; ωₙ)`
    pub current: f64,
    /// `F̂(Xⁿ⁻¹; ωₙ)`
    pub previous: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub value: f64,
    pub seed: u64,
    /// Chain length `M` (zero for the exact initialization).
    pub samples: usize,
    /// Final micro state; warm-starts the next estimate.
    pub y_final: f64,
    pub used_mh: bool,
    /// Micro steps spent on this estimate.
    pub micro_steps: u64,
    pub pair: Option<CoupledPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    Exact,
    Estimated { samples: usize },
    Averaged { replicas: usize, samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    #[serde(flatten)]
    pub kind: InitKind,
    #[serde(default)]
    pub use_mh: bool,
}

impl InitSpec {
    pub fn exact() -> Self {
        InitSpec {
            kind: InitKind::Exact,
            use_mh: false,
        }
    }

    pub fn estimated(samples: usize, use_mh: bool) -> Self {
        InitSpec {
            kind: InitKind::Estimated { samples },
            use_mh,
        }
    }

    pub fn averaged(replicas: usize, samples: usize, use_mh: bool) -> Self {
        InitSpec {
            kind: InitKind::Averaged { replicas, samples },
            use_mh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            InitKind::Exact => Ok(()),
            InitKind::Estimated { samples } if samples >= 1 => Ok(()),
            InitKind::Averaged { replicas, samples } if replicas >= 1 && samples >= 1 => Ok(()),
            _ => Err(Error::invalid(format!("initialization needs positive sample counts: {self:?}"))),
        }
    }

    /// Micro steps this initialization costs.
    pub fn micro_steps(&self) -> u64 {
        match self.kind {
            InitKind::Exact => 0,
            InitKind::Estimated { samples } => samples as u64,
            InitKind::Averaged { replicas, samples } => (replicas * samples) as u64,
        }
    }
}

fn finite(value: f64, x: f64, y: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericalBlowup {
            location: what.into(),
            x,
            y,
        })
    }
}

fn chain_average<N: Noise>(model: &Model, x: f64, y0: f64, cfg: &MicroConfig, noise: &mut N) -> Result<(f64, f64)> {
    let chain = run_chain(model, x, y0, cfg, noise)?;
    let mean = chain.samples.iter().map(|&y| model.slow_drift(x, y)).sum::<f64>() / chain.samples.len() as f64;
    Ok((finite(mean, x, chain.y_final, "HMM average")?, chain.y_final))
}

/// `(1/M) Σ f(X, yᵐ)` over one micro chain seeded with `seed`.
pub fn hmm_estimate(model: &Model, x: f64, y0: f64, cfg: &MicroConfig, seed: u64) -> Result<EstimateRecord> {
    cfg.validate()?;
    let (value, y_final) = chain_average(model, x, y0, cfg, &mut GaussianStream::new(seed))?;
    Ok(EstimateRecord {
        value,
        seed,
        samples: cfg.samples,
        y_final,
        used_mh: cfg.use_mh,
        micro_steps: cfg.samples as u64,
        pair: None,
    })
}

/// Coarse projective integration estimate.
///
/// Each ensemble member `(X, yᵐ)` is advanced `K` Euler–Maruyama steps of the
/// full slow-fast system; member `m` uses normals `mK … mK + K − 1` of `seed`.
pub fn cpi_estimate(model: &Model, x: f64, ensemble_y: &[f64], k: usize, delta_t_micro: f64, seed: u64) -> Result<f64> {
    if ensemble_y.is_empty() {
        return Err(Error::invalid("CPI needs a nonempty ensemble"));
    }
    if k == 0 {
        return Err(Error::invalid("CPI needs at least one micro step"));
    }
    if !(delta_t_micro > 0.0) {
        return Err(Error::invalid(format!("micro step must be positive, got {delta_t_micro}")));
    }
    let h = delta_t_micro / model.epsilon();
    let horizon = k as f64 * delta_t_micro;
    let mut noise = GaussianStream::new(seed);
    let mut total = 0.0;
    for &y_start in ensemble_y {
        let (mut xs, mut ys) = (x, y_start);
        for _ in 0..k {
            let xi = noise.next_normal();
            let x_next = xs + delta_t_micro * model.slow_drift(xs, ys);
            let y_next = ys + h * model.fast_drift(xs, ys) + h.sqrt() * model.diffusion(xs, ys) * xi;
            xs = x_next;
            ys = finite(y_next, xs, ys, "CPI micro step")?;
        }
        total += (xs - x) / horizon;
    }
    finite(total / ensemble_y.len() as f64, x, 0.0, "CPI average")
}

/// Seed-coupled control-variate estimate at `x_cur`.
///
/// Both chains start from `y0` and replay the increments of `seed`; only the
/// chain at `x_cur` hands its final state on. Metropolis correction is
/// rejected here: independent accept/reject decisions would decouple the pair.
pub fn vr_estimate(
    model: &Model,
    x_prev: f64,
    x_cur: f64,
    f_bar_prev: f64,
    y0: f64,
    cfg: &MicroConfig,
    seed: u64,
) -> Result<EstimateRecord> {
    cfg.validate()?;
    if cfg.use_mh {
        return Err(Error::UnsupportedModel(
            "the coupled estimator runs plain Euler–Maruyama chains; Metropolis correction is only \
             available in (re)initialization"
                .into(),
        ));
    }
    let stream = GaussianStream::new(seed);
    let cur = em_chain(model, x_cur, y0, cfg, &mut stream.clone())?;
    let prev = em_chain(model, x_prev, y0, cfg, &mut stream.clone())?;
    let mean = |x: f64, samples: &[f64]| samples.iter().map(|&y| model.slow_drift(x, y)).sum::<f64>() / samples.len() as f64;
    let current = finite(mean(x_cur, &cur.samples), x_cur, cur.y_final, "coupled HMM average")?;
    let previous = finite(mean(x_prev, &prev.samples), x_prev, prev.y_final, "coupled HMM average")?;
    // Averaging the per-sample differences avoids cancelling two large sums.
    let shift = cur
        .samples
        .iter()
        .zip(&prev.samples)
        .map(|(&yc, &yp)| model.slow_drift(x_cur, yc) - model.slow_drift(x_prev, yp))
        .sum::<f64>()
        / cfg.samples as f64;
    let value = finite(f_bar_prev + shift, x_cur, cur.y_final, "variance-reduced estimate")?;
    Ok(EstimateRecord {
        value,
        seed,
        samples: cfg.samples,
        y_final: cur.y_final,
        used_mh: false,
        micro_steps: 2 * cfg.samples as u64,
        pair: Some(CoupledPair { current, previous }),
    })
}

/// Starting (or restarting) value of the variance-reduced recursion at macro step `step`.
///
/// `spec` overrides the sample count and Metropolis flag of `cfg`; the micro
/// step size is taken from `cfg`. Estimated uses seed `ω_step`, averaged uses
/// the replica seeds `ω_{step,1} … ω_{step,S}` with each replica warm-started
/// from the previous one.
pub fn initialize_at(
    model: &Model,
    x0: f64,
    y0: f64,
    spec: &InitSpec,
    cfg: &MicroConfig,
    seeds: &SeedSchedule,
    step: u64,
) -> Result<EstimateRecord> {
    spec.validate()?;
    match spec.kind {
        InitKind::Exact => Ok(EstimateRecord {
            value: model.exact_f_bar(x0)?,
            seed: seeds.step(step),
            samples: 0,
            y_final: y0,
            used_mh: false,
            micro_steps: 0,
            pair: None,
        }),
        InitKind::Estimated { samples } => {
            let cfg = cfg.with_samples(samples).with_mh(spec.use_mh);
            hmm_estimate(model, x0, y0, &cfg, seeds.step(step))
        }
        InitKind::Averaged { replicas, samples } => {
            let cfg = cfg.with_samples(samples).with_mh(spec.use_mh);
            let mut y = y0;
            let mut total = 0.0;
            for s in 1..=replicas as u64 {
                let rec = hmm_estimate(model, x0, y, &cfg, seeds.replica(step, s))?;
                total += rec.value;
                y = rec.y_final;
            }
            Ok(EstimateRecord {
                value: total / replicas as f64,
                seed: seeds.replica(step, 1),
                samples,
                y_final: y,
                used_mh: spec.use_mh,
                micro_steps: spec.micro_steps(),
                pair: None,
            })
        }
    }
}

/// Initialization at macro step 0.
pub fn initialize(
    model: &Model,
    x0: f64,
    y0: f64,
    spec: &InitSpec,
    cfg: &MicroConfig,
    seeds: &SeedSchedule,
) -> Result<EstimateRecord> {
    initialize_at(model, x0, y0, spec, cfg, seeds, 0)
}
