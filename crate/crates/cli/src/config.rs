//! JSON experiment configuration.
//!
//! A config file holds either one run or a suite `{ "runs": [...] }`. Every run
//! is self-contained so that its metadata sidecar alone reproduces it.

use serde::{Deserialize, Serialize};

use slowfast_core::analysis::nobias_micro_step;
use slowfast_core::estimators::InitSpec;
use slowfast_core::macrosolver::{MacroConfig, ReinitPolicy};
use slowfast_core::micro::MicroConfig;
use slowfast_core::models::{make_linear_model, make_nonlinear_model, LinearParams, Model};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Per-realization estimate at the first macro step.
    SingleStepDistribution,
    /// Variance of the step-N estimate across a list of macro steps.
    LocalVariance,
    /// Mean and variance of `X` and `F` along the whole path.
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear(LinearParams),
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Hmm,
    Vr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `δt = 2ε/A`, linear model only.
    Nobias,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MicroStep {
    Value(f64),
    Rule(StepRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroSpec {
    pub delta_t: MicroStep,
    pub samples: usize,
    #[serde(default)]
    pub use_mh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroSpec {
    pub delta_t: OneOrMany,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Macro step indices `N` whose estimates a local-variance run reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinitSpec {
    pub every: usize,
    #[serde(flatten)]
    pub init: InitSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    pub epsilon: f64,
    pub micro: MicroSpec,
    #[serde(rename = "macro")]
    pub macro_spec: MacroSpec,
    pub estimator: EstimatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinit: Option<ReinitSpec>,
    pub realizations: usize,
    pub master_seed: u64,
    pub output: String,
    /// Grid size of the density companion of a single-step run.
    #[serde(default = "default_kde_points")]
    pub kde_points: usize,
}

fn default_kde_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub runs: Vec<ExperimentConfig>,
}

/// Contents of a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigFile {
    Single(ExperimentConfig),
    Suite(Suite),
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        let file = if value.get("runs").is_some() {
            ConfigFile::Suite(serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?)
        } else {
            ConfigFile::Single(serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?)
        };
        file.validate()?;
        Ok(file)
    }

    pub fn runs(&self) -> Vec<&ExperimentConfig> {
        match self {
            ConfigFile::Single(c) => vec![c],
            ConfigFile::Suite(s) => s.runs.iter().collect(),
        }
    }

    pub fn runs_mut(&mut self) -> Vec<&mut ExperimentConfig> {
        match self {
            ConfigFile::Single(c) => vec![c],
            ConfigFile::Suite(s) => s.runs.iter_mut().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ConfigFile::Suite(s) = self {
            check_schema(s.schema_version)?;
            if s.runs.is_empty() {
                return Err(CliError::config(format!("suite '{}' has no runs", s.name)));
            }
            let mut outputs: Vec<&str> = s.runs.iter().map(|r| r.output.as_str()).collect();
            outputs.sort_unstable();
            if let Some(w) = outputs.windows(2).find(|w| w[0] == w[1]) {
                return Err(CliError::config(format!("two runs write to '{}'", w[0])));
            }
        }
        for run in self.runs() {
            run.validate().map_err(|e| match e {
                CliError::Config(msg) if !run.name.is_empty() => CliError::Config(format!("run '{}': {msg}", run.name)),
                other => other,
            })?;
        }
        Ok(())
    }
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported schema_version {version} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

/// Validated numerical settings of one run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: Model,
    pub micro: MicroConfig,
    pub macro_steps: Vec<f64>,
    pub init: InitSpec,
    pub reinit: ReinitPolicy,
}

impl ExperimentConfig {
    pub fn build_model(&self) -> Result<Model> {
        let model = match self.model {
            ModelSpec::Linear(params) => make_linear_model(params, self.epsilon)?,
            ModelSpec::Nonlinear => make_nonlinear_model(self.epsilon)?,
        };
        Ok(model)
    }

    pub fn micro_delta_t(&self) -> Result<f64> {
        match (self.micro.delta_t, self.model) {
            (MicroStep::Value(v), _) => Ok(v),
            (MicroStep::Rule(StepRule::Nobias), ModelSpec::Linear(params)) => Ok(nobias_micro_step(params.a, self.epsilon)),
            (MicroStep::Rule(StepRule::Nobias), ModelSpec::Nonlinear) => {
                Err(CliError::config("micro.delta_t = \"nobias\" needs the linear model"))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    pub fn resolve(&self) -> Result<Resolved> {
        check_schema(self.schema_version)?;
        if self.realizations < 2 {
            return Err(CliError::config(format!(
                "at least 2 realizations are needed for a variance, got {}",
                self.realizations
            )));
        }
        if self.output.trim().is_empty() {
            return Err(CliError::config("output must name a file"));
        }
        let model = self.build_model()?;
        let micro = MicroConfig::new(self.micro_delta_t()?, self.micro.samples, self.micro.use_mh)?;

        let steps = self.macro_spec.delta_t.values();
        if steps.is_empty() {
            return Err(CliError::config("macro.delta_t list is empty"));
        }
        match self.experiment {
            ExperimentKind::SingleStepDistribution | ExperimentKind::Trajectory if steps.len() != 1 => {
                return Err(CliError::config(format!(
                    "{:?} takes a single macro.delta_t",
                    self.experiment
                )))
            }
            ExperimentKind::LocalVariance => match &self.macro_spec.steps {
                Some(n) if !n.is_empty() => {}
                _ => return Err(CliError::config("local_variance needs a nonempty macro.steps list")),
            },
            ExperimentKind::Trajectory if self.macro_spec.t_end.is_none() => {
                return Err(CliError::config("trajectory needs macro.t_end"))
            }
            _ => {}
        }
        let horizon = self.macro_spec.t_end.unwrap_or(steps[0]);
        for &dt in &steps {
            MacroConfig::new(dt, horizon.max(dt), self.macro_spec.x0, self.macro_spec.y0)?;
        }

        let (init, reinit) = match self.estimator {
            EstimatorKind::Hmm => {
                if self.init.is_some() || self.reinit.is_some() {
                    return Err(CliError::config("init and reinit only apply to the vr estimator"));
                }
                micro.validate_for(&model)?;
                (InitSpec::exact(), ReinitPolicy::none())
            }
            EstimatorKind::Vr => {
                let init = self.init.ok_or_else(|| CliError::config("the vr estimator needs an init"))?;
                if self.micro.use_mh {
                    return Err(CliError::config(
                        "the coupled chains run without Metropolis correction; set use_mh in init or reinit instead",
                    ));
                }
                let reinit = match self.reinit {
                    Some(r) => ReinitPolicy::every(r.every, r.init),
                    None => ReinitPolicy::none(),
                };
                init.validate()?;
                reinit.validate()?;
                micro.validate_for(&model)?;
                for spec in [Some(init), self.reinit.map(|r| r.init)].into_iter().flatten() {
                    micro.with_mh(spec.use_mh).validate_for(&model)?;
                    if matches!(spec.kind, slowfast_core::estimators::InitKind::Exact) && !model.has_exact_f_bar() {
                        return Err(CliError::config("exact (re)initialization needs a model with an exact averaged drift"));
                    }
                }
                (init, reinit)
            }
        };
        Ok(Resolved {
            model,
            micro,
            macro_steps: steps,
            init,
            reinit,
        })
    }
}
