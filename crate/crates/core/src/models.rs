//! Scalar slow-fast systems
//!
//! ```text
//! dx = f(x, y) dt
//! dy = (1/ε) g(x, y) dt + (1/√ε) β(x, y) dW
//! ```
//!
//! together with the optional analytic references used for validation: the
//! averaged drift `F(X)`, the exact solution of `dX/dt = F(X)`, and the log
//! density of the fast process' invariant measure at frozen `X`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Drift = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type AveragedDrift = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type MacroSolution = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;
pub type LogDensity = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Distance to a pole of `tan` below which the nonlinear exact solution refuses to evaluate.
pub const POLE_GUARD: f64 = 1e-8;

/// A slow-fast system. Cheap to clone; all closures are shared.
#[derive(Clone)]
pub struct Model {
    slow_drift: Drift,
    fast_drift: Drift,
    diffusion: Drift,
    epsilon: f64,
    exact_f_bar: Option<AveragedDrift>,
    exact_macro_solution: Option<MacroSolution>,
    invariant_log_density: Option<LogDensity>,
    linear: Option<LinearParams>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("epsilon", &self.epsilon)
            .field("exact_f_bar", &self.exact_f_bar.is_some())
            .field("exact_macro_solution", &self.exact_macro_solution.is_some())
            .field("invariant_log_density", &self.invariant_log_density.is_some())
            .field("linear", &self.linear)
            .finish()
    }
}

impl Model {
    pub fn new<F, G, B>(slow_drift: F, fast_drift: G, diffusion: B, epsilon: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        check_epsilon(epsilon)?;
        Ok(Model {
            slow_drift: Arc::new(slow_drift),
            fast_drift: Arc::new(fast_drift),
            diffusion: Arc::new(diffusion),
            epsilon,
            exact_f_bar: None,
            exact_macro_solution: None,
            invariant_log_density: None,
            linear: None,
        })
    }

    pub fn with_exact_f_bar(mut self, f_bar: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.exact_f_bar = Some(Arc::new(f_bar));
        self
    }

    pub fn with_exact_macro_solution(
        mut self,
        solution: impl Fn(f64, f64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        self.exact_macro_solution = Some(Arc::new(solution));
        self
    }

    /// `log_density(X, y)` is the log of the invariant density of the fast
    /// process at frozen `X`, up to an additive constant.
    pub fn with_invariant_log_density(
        mut self,
        log_density: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.invariant_log_density = Some(Arc::new(log_density));
        self
    }

    /// Replaces the diffusion coefficient, keeping every oracle.
    ///
    /// Mostly useful for building deterministic (`β ≡ 0`) variants in tests.
    pub fn with_diffusion(mut self, diffusion: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.diffusion = Arc::new(diffusion);
        self
    }

    #[inline]
    pub fn slow_drift(&self, x: f64, y: f64) -> f64 {
        (self.slow_drift)(x, y)
    }

    #[inline]
    pub fn fast_drift(&self, x: f64, y: f64) -> f64 {
        (self.fast_drift)(x, y)
    }

    #[inline]
    pub fn diffusion(&self, x: f64, y: f64) -> f64 {
        (self.diffusion)(x, y)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Parameters of the built-in linear system, if this model is one.
    pub fn linear_params(&self) -> Option<&LinearParams> {
        self.linear.as_ref()
    }

    pub fn has_exact_f_bar(&self) -> bool {
        self.exact_f_bar.is_some()
    }

    pub fn has_invariant_density(&self) -> bool {
        self.invariant_log_density.is_some()
    }

    pub fn exact_f_bar(&self, x: f64) -> Result<f64> {
        self.exact_f_bar
            .as_ref()
            .map(|f| f(x))
            .ok_or_else(|| Error::UnsupportedModel("model has no exact averaged drift".into()))
    }

    pub fn exact_macro_solution(&self, x0: f64, t: f64) -> Result<f64> {
        match &self.exact_macro_solution {
            Some(sol) => sol(x0, t),
            None => Err(Error::UnsupportedModel("model has no exact macro solution".into())),
        }
    }

    pub fn invariant_log_density(&self, x: f64, y: f64) -> Result<f64> {
        self.invariant_log_density
            .as_ref()
            .map(|rho| rho(x, y))
            .ok_or_else(|| Error::UnsupportedModel("model has no invariant density".into()))
    }

    /// Largest relative mismatch between the central difference of the exact
    /// macro solution and the averaged drift evaluated on it, over `times`.
    pub fn oracle_consistency(&self, x0: f64, times: &[f64], h: f64) -> Result<f64> {
        let mut worst = 0.0_f64;
        for &t in times {
            let forward = self.exact_macro_solution(x0, t + h)?;
            let backward = self.exact_macro_solution(x0, t - h)?;
            let slope = (forward - backward) / (2.0 * h);
            let expected = self.exact_f_bar(self.exact_macro_solution(x0, t)?)?;
            let rel = (slope - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
        Ok(worst)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

/// Parameters of the linear test system
/// `dx = (λx + py) dt`, `dy = (1/ε)(qx − Ay) dt + (1/√ε) dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub a: f64,
}

impl LinearParams {
    /// The parameters used throughout the linear experiments.
    pub const REFERENCE: LinearParams = LinearParams {
        lambda: -10.0,
        p: 4.0,
        q: 0.5,
        a: 1.2,
    };

    pub fn new(lambda: f64, p: f64, q: f64, a: f64) -> Result<Self> {
        let params = LinearParams { lambda, p, q, a };
        params.validate()?;
        Ok(params)
    }

    /// Decay condition: `λ < 0` and `pq/(−λ) < A ≤ 2`.
    pub fn validate(&self) -> Result<()> {
        let LinearParams { lambda, p, q, a } = *self;
        if ![lambda, p, q, a].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("linear parameters must be finite"));
        }
        if lambda >= 0.0 {
            return Err(Error::invalid(format!("lambda must be negative, got {lambda}")));
        }
        let lower = p * q / -lambda;
        if !(a > lower && a <= 2.0) {
            return Err(Error::invalid(format!("A = {a} must lie in ({lower}, 2]")));
        }
        Ok(())
    }

    /// Rate of the averaged equation, `λ + pq/A`.
    pub fn averaged_rate(&self) -> f64 {
        self.lambda + self.p * self.q / self.a
    }
}

pub fn make_linear_model(params: LinearParams, epsilon: f64) -> Result<Model> {
    params.validate()?;
    let LinearParams { lambda, p, q, a } = params;
    let rate = params.averaged_rate();
    let model = Model::new(
        move |x, y| p.mul_add(y, lambda * x),
        move |x, y| (-a).mul_add(y, q * x),
        |_, _| 1.0,
        epsilon,
    )?
    .with_exact_f_bar(move |x| rate * x)
    .with_exact_macro_solution(move |x0, t| Ok(x0 * (rate * t).exp()))
    .with_invariant_log_density(move |x, y| {
        let centred = y - q * x / a;
        -a * centred * centred
    });
    Ok(Model {
        linear: Some(params),
        ..model
    })
}

pub fn make_nonlinear_model(epsilon: f64) -> Result<Model> {
    Ok(Model::new(|_, y| -(y + y * y), |x, y| -(y - x), |_, _| 1.0, epsilon)?
        .with_exact_f_bar(|x| -(x + x * x + 0.5))
        .with_exact_macro_solution(nonlinear_exact_solution)
        .with_invariant_log_density(|x, y| -(y - x) * (y - x)))
}

/// `X(t) = −1/2 − (1/2) tan(t/2 − arctan(2x₀ + 1))`, refusing to evaluate next to a pole.
fn nonlinear_exact_solution(x0: f64, t: f64) -> Result<f64> {
    let phase = 0.5 * t - (2.0 * x0 + 1.0).atan();
    // poles of tan at π/2 + kπ
    let offset = phase - PI / 2.0;
    let distance = (offset - PI * (offset / PI).round()).abs();
    if distance < POLE_GUARD {
        return Err(Error::Singularity {
            t,
            tolerance: POLE_GUARD,
        });
    }
    Ok(-0.5 - 0.5 * phase.tan())
}

/// Mean and variance of the Gaussian invariant measure of the linear fast process.
pub fn invariant_moments_linear(params: &LinearParams, x: f64) -> (f64, f64) {
    (params.q * x / params.a, 0.5 / params.a)
}
