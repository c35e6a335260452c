//! Forward Euler integration of the averaged equation `dX/dt = F(X)` with a
//! stochastic estimate of `F` at every step.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{hmm_estimate, initialize_at, vr_estimate, EstimateRecord, InitSpec};
use crate::micro::{MicroConfig, SeedSchedule};
use crate::models::Model;

/// Consecutive expanding secant steps before the driver warns about macro instability.
const INSTABILITY_PATIENCE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroConfig {
    pub delta_t: f64,
    pub t_end: f64,
    pub x0: f64,
    pub y0: f64,
}

impl MacroConfig {
    pub fn new(delta_t: f64, t_end: f64, x0: f64, y0: f64) -> Result<Self> {
        let cfg = MacroConfig { delta_t, t_end, x0, y0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config covering exactly `steps` macro steps.
    pub fn with_steps(delta_t: f64, steps: usize, x0: f64, y0: f64) -> Result<Self> {
        MacroConfig::new(delta_t, steps as f64 * delta_t, x0, y0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::invalid(format!("macro step must be positive, got {}", self.delta_t)));
        }
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(Error::invalid("initial state must be finite"));
        }
        if self.steps() < 1 {
            return Err(Error::invalid(format!(
                "t_end = {} covers no macro step of size {}",
                self.t_end, self.delta_t
            )));
        }
        Ok(())
    }

    /// `N = floor(t_end/Δt + 1/2)`
    pub fn steps(&self) -> usize {
        let n = (self.t_end / self.delta_t + 0.5).floor();
        if n.is_finite() && n > 0.0 {
            n as usize
        } else {
            0
        }
    }
}

/// Reinitialize every `period` macro steps with `spec`; `None` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinitPolicy {
    pub period: Option<usize>,
    pub spec: InitSpec,
}

impl ReinitPolicy {
    pub fn none() -> Self {
        ReinitPolicy {
            period: None,
            spec: InitSpec::exact(),
        }
    }

    pub fn every(period: usize, spec: InitSpec) -> Self {
        ReinitPolicy {
            period: Some(period),
            spec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == Some(0) {
            return Err(Error::invalid("reinitialization period must be at least 1"));
        }
        self.spec.validate()
    }

    /// Whether macro step `n` (counted from the initialization at 0) is a reinitialization.
    pub fn applies_at(&self, n: usize) -> bool {
        matches!(self.period, Some(r) if n > 0 && n % r == 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `t⁰ … tᴺ`
    pub times: Vec<f64>,
    /// `X⁰ … Xᴺ`
    pub x_values: Vec<f64>,
    /// `F⁰ … Fᴺ⁻¹`
    pub f_values: Vec<f64>,
    pub micro_step_count: u64,
    pub records: Vec<EstimateRecord>,
    /// Time at which the forward Euler amplification was first flagged as persistently above one.
    pub instability: Option<f64>,
}

impl Trajectory {
    fn start(x0: f64, steps: usize) -> Self {
        let mut x_values = Vec::with_capacity(steps + 1);
        x_values.push(x0);
        Trajectory {
            times: vec![0.0],
            x_values,
            f_values: Vec::with_capacity(steps),
            micro_step_count: 0,
            records: Vec::with_capacity(steps),
            instability: None,
        }
    }

    fn push(&mut self, record: EstimateRecord, delta_t: f64) {
        let n = self.f_values.len();
        let x = fe_step(self.x_values[n], record.value, delta_t);
        self.f_values.push(record.value);
        self.x_values.push(x);
        self.times.push((n + 1) as f64 * delta_t);
        self.micro_step_count += record.micro_steps;
        self.records.push(record);
    }

    pub fn steps(&self) -> usize {
        self.f_values.len()
    }

    pub fn final_x(&self) -> f64 {
        *self.x_values.last().expect("trajectory has an initial state")
    }
}

/// `X + Δt F`
#[inline]
pub fn fe_step(x: f64, f: f64, delta_t: f64) -> f64 {
    x + delta_t * f
}

/// Watches the secant slope of the estimated drift and warns once when the
/// forward Euler amplification `|1 + Δt F′|` stays above one.
struct StabilityMonitor {
    delta_t: f64,
    streak: usize,
    warned: bool,
}

impl StabilityMonitor {
    fn new(delta_t: f64) -> Self {
        StabilityMonitor {
            delta_t,
            streak: 0,
            warned: false,
        }
    }

    /// Returns the flagged time the first time the streak reaches the patience.
    fn observe(&mut self, traj: &Trajectory) -> Option<f64> {
        let n = traj.f_values.len();
        if n < 2 || self.warned {
            return None;
        }
        let dx = traj.x_values[n - 1] - traj.x_values[n - 2];
        if dx == 0.0 {
            return None;
        }
        let slope = (traj.f_values[n - 1] - traj.f_values[n - 2]) / dx;
        if (1.0 + self.delta_t * slope).abs() > 1.0 {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        if self.streak >= INSTABILITY_PATIENCE {
            warn!(
                "forward Euler amplification |1 + Δt·F'| ≈ {:.3} has exceeded 1 for {} steps at t = {}",
                (1.0 + self.delta_t * slope).abs(),
                self.streak,
                traj.times[n - 1]
            );
            self.warned = true;
            return Some(traj.times[n - 1]);
        }
        None
    }
}

fn check_x(traj: &Trajectory, y: f64) -> Result<()> {
    let x = traj.final_x();
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalBlowup {
            location: format!("macro step {}", traj.steps()),
            x,
            y,
        })
    }
}

/// Plain HMM: an independent estimate with seed `ωₙ` at every step, chains warm-started.
pub fn run_hmm_trajectory(
    model: &Model,
    macro_cfg: &MacroConfig,
    micro: &MicroConfig,
    seeds: &SeedSchedule,
) -> Result<Trajectory> {
    macro_cfg.validate()?;
    micro.validate_for(model)?;
    let steps = macro_cfg.steps();
    let mut traj = Trajectory::start(macro_cfg.x0, steps);
    let mut monitor = StabilityMonitor::new(macro_cfg.delta_t);
    let mut y = macro_cfg.y0;
    for n in 0..steps {
        let rec = hmm_estimate(model, traj.x_values[n], y, micro, seeds.step(n as u64))
            .map_err(|e| e.at(format!("macro step {n}")))?;
        y = rec.y_final;
        traj.push(rec, macro_cfg.delta_t);
        check_x(&traj, y)?;
        if let Some(t) = monitor.observe(&traj) {
            traj.instability = Some(t);
        }
    }
    Ok(traj)
}

/// Variance-reduced HMM: `init` at step 0, the coupled estimator afterwards,
/// and `reinit.spec` instead of the coupled estimator at every multiple of the period.
pub fn run_vr_trajectory(
    model: &Model,
    macro_cfg: &MacroConfig,
    micro: &MicroConfig,
    init: &InitSpec,
    reinit: &ReinitPolicy,
    seeds: &SeedSchedule,
) -> Result<Trajectory> {
    macro_cfg.validate()?;
    micro.validate_for(model)?;
    init.validate()?;
    reinit.validate()?;
    let steps = macro_cfg.steps();
    let mut traj = Trajectory::start(macro_cfg.x0, steps);
    let mut monitor = StabilityMonitor::new(macro_cfg.delta_t);

    let first = initialize_at(model, macro_cfg.x0, macro_cfg.y0, init, micro, seeds, 0)
        .map_err(|e| e.at("initialization"))?;
    let mut y = first.y_final;
    traj.push(first, macro_cfg.delta_t);
    check_x(&traj, y)?;

    for n in 1..steps {
        let x_cur = traj.x_values[n];
        let rec = if reinit.applies_at(n) {
            initialize_at(model, x_cur, y, &reinit.spec, micro, seeds, n as u64)
        } else {
            let x_prev = traj.x_values[n - 1];
            let f_prev = traj.f_values[n - 1];
            vr_estimate(model, x_prev, x_cur, f_prev, y, micro, seeds.step(n as u64))
        }
        .map_err(|e| e.at(format!("macro step {n}")))?;
        y = rec.y_final;
        traj.push(rec, macro_cfg.delta_t);
        check_x(&traj, y)?;
        if let Some(t) = monitor.observe(&traj) {
            traj.instability = Some(t);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_linear_model, make_nonlinear_model, LinearParams};

    const EPS: f64 = 1e-3;

    fn linear() -> Model {
        make_linear_model(LinearParams::REFERENCE, EPS).unwrap()
    }

    #[test]
    fn forward_euler_arithmetic() {
        assert!((fe_step(1.0, -8.333_333_333_333_334, 0.02) - 0.833_333_333_333_333_3).abs() < 1e-15);
        assert_eq!(fe_step(0.3, 0.0, 0.1), 0.3);
        assert!((fe_step(0.5, -1.25, 0.05) - 0.4375).abs() < 1e-15);
    }

    #[test]
    fn step_count_rounds_to_nearest() {
        assert_eq!(MacroConfig::new(0.02, 1.0, 1.0, 1.0).unwrap().steps(), 50);
        assert_eq!(MacroConfig::new(0.05, 2.0, 1.0, 1.0).unwrap().steps(), 40);
        assert_eq!(MacroConfig::new(0.3, 1.0, 1.0, 1.0).unwrap().steps(), 3);
        assert_eq!(MacroConfig::new(0.4, 1.0, 1.0, 1.0).unwrap().steps(), 3);
        assert_eq!(MacroConfig::with_steps(0.001, 10, 1.0, 1.0).unwrap().steps(), 10);
        assert!(MacroConfig::new(0.5, 0.2, 1.0, 1.0).is_err());
        assert!(MacroConfig::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn deterministic_variant_follows_exact_forward_euler() {
        // With Aδt/ε = 2 and M even the lagging warm start averages out exactly.
        let m = linear().with_diffusion(|_, _| 0.0);
        let y_fixed = 0.5 / 1.2;
        let mc = MacroConfig::new(0.02, 0.4, 1.0, y_fixed).unwrap();
        let micro = MicroConfig::new(2.0 * EPS / 1.2, 50, false).unwrap();
        let traj = run_hmm_trajectory(&m, &mc, &micro, &SeedSchedule::new(3)).unwrap();
        let rate = LinearParams::REFERENCE.averaged_rate();
        let mut x = 1.0_f64;
        for (n, &xn) in traj.x_values.iter().enumerate() {
            assert!((xn - x).abs() <= 1e-12 * x.abs(), "step {n}: {xn} vs {x}");
            x *= 1.0 + 0.02 * rate;
        }
    }

    #[test]
    fn one_step_trajectory() {
        let m = linear();
        let mc = MacroConfig::new(0.5, 0.5, 1.0, 1.0).unwrap();
        let micro = MicroConfig::new(EPS, 10, false).unwrap();
        let traj = run_hmm_trajectory(&m, &mc, &micro, &SeedSchedule::new(3)).unwrap();
        assert_eq!(traj.f_values.len(), 1);
        assert_eq!(traj.x_values.len(), 2);
        assert_eq!(traj.times, vec![0.0, 0.5]);
        assert_eq!(traj.micro_step_count, 10);
    }

    #[test]
    fn stored_trajectory_identity_is_bitwise() {
        let m = make_nonlinear_model(EPS).unwrap();
        let mc = MacroConfig::new(0.05, 1.0, 0.5, 0.5).unwrap();
        let micro = MicroConfig::new(EPS, 20, false).unwrap();
        let traj = run_vr_trajectory(
            &m,
            &mc,
            &micro,
            &InitSpec::estimated(100, true),
            &ReinitPolicy::every(3, InitSpec::estimated(100, true)),
            &SeedSchedule::new(8),
        )
        .unwrap();
        for n in 0..traj.steps() {
            assert_eq!(traj.x_values[n + 1], traj.x_values[n] + 0.05 * traj.f_values[n]);
        }
    }

    #[test]
    fn trajectories_are_deterministic() {
        let m = make_nonlinear_model(EPS).unwrap();
        let mc = MacroConfig::new(0.05, 0.5, 0.5, 0.5).unwrap();
        let micro = MicroConfig::new(EPS, 20, false).unwrap();
        let run = |seed| {
            run_vr_trajectory(
                &m,
                &mc,
                &micro,
                &InitSpec::averaged(4, 20, true),
                &ReinitPolicy::none(),
                &SeedSchedule::new(seed),
            )
            .unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn reinit_every_step_never_couples() {
        let m = linear();
        let mc = MacroConfig::new(0.02, 0.2, 1.0, 1.0).unwrap();
        let micro = MicroConfig::new(EPS, 50, false).unwrap();
        let spec = InitSpec::estimated(80, false);
        let seeds = SeedSchedule::new(12);
        let traj = run_vr_trajectory(&m, &mc, &micro, &spec, &ReinitPolicy::every(1, spec), &seeds).unwrap();
        assert!(traj.records.iter().all(|r| r.pair.is_none() && r.samples == 80));
        assert_eq!(traj.micro_step_count, 80 * 10);
        // each step is the plain HMM estimate with the step's own seed
        let mut y = 1.0;
        for n in 0..traj.steps() {
            let rec = hmm_estimate(&m, traj.x_values[n], y, &micro.with_samples(80), seeds.step(n as u64)).unwrap();
            assert_eq!(rec.value, traj.f_values[n]);
            y = rec.y_final;
        }
    }

    #[test]
    fn reinit_schedule_and_cost() {
        let policy = ReinitPolicy::every(5, InitSpec::estimated(500, true));
        let hits: Vec<usize> = (0..20).filter(|&n| policy.applies_at(n)).collect();
        assert_eq!(hits, vec![5, 10, 15]);
        assert!(!ReinitPolicy::none().applies_at(5));
        assert!(ReinitPolicy::every(0, InitSpec::exact()).validate().is_err());

        let m = make_nonlinear_model(EPS).unwrap();
        let mc = MacroConfig::new(0.05, 1.0, 0.5, 0.5).unwrap();
        let micro = MicroConfig::new(EPS, 20, false).unwrap();
        let traj = run_vr_trajectory(&m, &mc, &micro, &InitSpec::estimated(500, true), &policy, &SeedSchedule::new(1))
            .unwrap();
        // 20 steps: init + reinits at 5, 10, 15 + 16 coupled steps
        assert_eq!(traj.micro_step_count, 500 + 3 * 500 + 16 * 2 * 20);
    }

    #[test]
    fn mh_in_coupled_steps_is_rejected() {
        let m = linear();
        let mc = MacroConfig::new(0.02, 0.1, 1.0, 1.0).unwrap();
        let micro = MicroConfig::new(EPS, 50, true).unwrap();
        let err = run_vr_trajectory(&m, &mc, &micro, &InitSpec::exact(), &ReinitPolicy::none(), &SeedSchedule::new(1))
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel(_)));
    }

    #[test]
    fn exact_init_requires_oracle() {
        let m = Model::new(|_, y| y, |x, y| x - y, |_, _| 1.0, EPS).unwrap();
        let mc = MacroConfig::new(0.02, 0.1, 1.0, 1.0).unwrap();
        let micro = MicroConfig::new(EPS, 50, false).unwrap();
        let err = run_vr_trajectory(&m, &mc, &micro, &InitSpec::exact(), &ReinitPolicy::none(), &SeedSchedule::new(1))
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel(_)));
    }

    #[test]
    fn unstable_macro_step_blows_up_cleanly() {
        // FE on dX/dt = −8.33 X with Δt = 1 amplifies by 7.3 per step
        let m = linear().with_diffusion(|_, _| 0.0);
        let mc = MacroConfig::new(1.0, 2000.0, 1.0, 0.5 / 1.2).unwrap();
        let micro = MicroConfig::new(EPS, 5, false).unwrap();
        let err = run_hmm_trajectory(&m, &mc, &micro, &SeedSchedule::new(1)).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { .. }), "{err:?}");
    }

    #[test]
    fn growing_forward_euler_is_flagged_once() {
        // amplification 1 − 8.33·0.3 ≈ −1.5 keeps growing without overflowing in 20 steps
        let m = linear().with_diffusion(|_, _| 0.0);
        let micro = MicroConfig::new(EPS, 5, false).unwrap();
        let unstable = MacroConfig::with_steps(0.3, 20, 1.0, 0.5 / 1.2).unwrap();
        let traj = run_hmm_trajectory(&m, &unstable, &micro, &SeedSchedule::new(1)).unwrap();
        let t = traj.instability.expect("flagged");
        assert!(t > 0.0 && t < 20.0 * 0.3, "{t}");
        let stable = MacroConfig::with_steps(0.02, 20, 1.0, 0.5 / 1.2).unwrap();
        let traj = run_hmm_trajectory(&m, &stable, &micro, &SeedSchedule::new(1)).unwrap();
        assert_eq!(traj.instability, None);
    }
}
