//! Ensemble runs behind the three experiment kinds.

use log::warn;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use slowfast_core::analysis::{
    ensemble_stats, exact_mean_reference, kernel_density, scalar_stats, silverman_bandwidth, tilde_constants,
    vr_variance_prediction, Density,
};
use slowfast_core::macrosolver::{run_hmm_trajectory, run_vr_trajectory, MacroConfig, Trajectory};
use slowfast_core::micro::SeedSchedule;

use crate::config::{EstimatorKind, ExperimentConfig, ExperimentKind, ModelSpec, Resolved};
use crate::error::{CliError, Result};
use crate::output::{Cost, Metadata, ResultTable, Table, TOOL};

/// Kernel grid reach beyond the extreme samples, in bandwidths.
const KDE_REACH: f64 = 4.0;

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    let resolved = config.resolve()?;
    let (table, density, summary, cost) = match config.experiment {
        ExperimentKind::SingleStepDistribution => single_step(config, &resolved)?,
        ExperimentKind::LocalVariance => local_variance(config, &resolved)?,
        ExperimentKind::Trajectory => trajectory(config, &resolved)?,
    };
    let metadata = Metadata {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        micro_delta_t: resolved.micro.delta_t,
        columns: table.columns.clone(),
        rows: table.rows.len(),
        cost: Cost {
            total_micro_steps: cost,
            realizations: config.realizations,
        },
        summary,
    };
    Ok(ResultTable {
        table,
        density,
        metadata,
    })
}

/// One trajectory per realization, in realization order whatever the scheduling.
fn ensemble(config: &ExperimentConfig, resolved: &Resolved, macro_cfg: &MacroConfig) -> Result<Vec<Trajectory>> {
    (0..config.realizations)
        .into_par_iter()
        .map(|j| {
            let seeds = SeedSchedule::for_realization(config.master_seed, j as u64);
            let traj = match config.estimator {
                EstimatorKind::Hmm => run_hmm_trajectory(&resolved.model, macro_cfg, &resolved.micro, &seeds),
                EstimatorKind::Vr => run_vr_trajectory(
                    &resolved.model,
                    macro_cfg,
                    &resolved.micro,
                    &resolved.init,
                    &resolved.reinit,
                    &seeds,
                ),
            };
            traj.map_err(|source| CliError::Simulation { realization: j, source })
        })
        .collect::<Result<Vec<_>>>()
        .inspect(|runs| report_instability(config, runs))
}

fn report_instability(config: &ExperimentConfig, runs: &[Trajectory]) {
    let flagged: Vec<f64> = runs.iter().filter_map(|t| t.instability).collect();
    if let Some(earliest) = flagged.iter().copied().reduce(f64::min) {
        warn!(
            "{}: {} of {} realizations show persistent forward Euler growth |1 + Δt·F'| > 1, earliest at t = {earliest}",
            if config.name.is_empty() { &config.output } else { &config.name },
            flagged.len(),
            runs.len()
        );
    }
}

fn total_cost(trajectories: &[Trajectory]) -> u64 {
    trajectories.iter().map(|t| t.micro_step_count).sum()
}

type Outcome = (Table, Option<Table>, Map<String, Value>, u64);

fn single_step(config: &ExperimentConfig, resolved: &Resolved) -> Result<Outcome> {
    let spec = &config.macro_spec;
    let macro_cfg = MacroConfig::with_steps(resolved.macro_steps[0], 2, spec.x0, spec.y0)?;
    let runs = ensemble(config, resolved, &macro_cfg)?;
    let model = &resolved.model;
    let exact = model.has_exact_f_bar();

    let mut columns = vec!["realization", "x1", "f1"];
    if exact {
        columns.push("exact_f");
    }
    let mut table = Table::new(columns);
    let x1: Vec<f64> = runs.iter().map(|t| t.x_values[1]).collect();
    let f1: Vec<f64> = runs.iter().map(|t| t.f_values[1]).collect();
    for (j, (&x, &f)) in x1.iter().zip(&f1).enumerate() {
        let mut row = vec![j as f64, x, f];
        if exact {
            row.push(model.exact_f_bar(x)?);
        }
        table.push(row);
    }

    let stats = scalar_stats(&f1)?;
    let mut summary = Map::new();
    summary.insert("mean_f1".into(), json!(stats.mean[0]));
    summary.insert("var_f1".into(), json!(stats.variance[0]));
    summary.insert("standard_error_f1".into(), json!(stats.standard_error(0)));
    if exact {
        summary.insert("exact_mean".into(), json!(exact_mean_reference(model, &x1)?));
    }

    let density = density_table(&f1, config.kde_points)?;
    Ok((table, Some(density), summary, total_cost(&runs)))
}

fn density_table(samples: &[f64], points: usize) -> Result<Table> {
    let mut table = Table::new(["f1", "density"]);
    let bandwidth = silverman_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - KDE_REACH * bandwidth;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + KDE_REACH * bandwidth;
    let points = points.max(2);
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    match kernel_density(samples, &grid)? {
        Density::Curve { values, .. } => {
            for (g, v) in grid.into_iter().zip(values) {
                table.push(vec![g, v]);
            }
        }
        Density::PointMass { location } => table.push(vec![location, f64::INFINITY]),
    }
    Ok(table)
}

fn local_variance(config: &ExperimentConfig, resolved: &Resolved) -> Result<Outcome> {
    let spec = &config.macro_spec;
    let report = spec.steps.clone().unwrap_or_default();
    let horizon = report.iter().copied().max().unwrap_or(0) + 1;
    let prediction = match (config.model, config.estimator) {
        (ModelSpec::Linear(params), EstimatorKind::Vr) => Some((
            params,
            tilde_constants(params.a, resolved.micro.delta_t, config.epsilon, resolved.micro.samples),
        )),
        _ => None,
    };

    let mut columns = vec!["delta_t", "n", "mean_F", "var_F", "var_X"];
    if prediction.is_some() {
        columns.push("prediction");
    }
    let mut table = Table::new(columns);
    let mut cost = 0;
    for &delta_t in &resolved.macro_steps {
        let macro_cfg = MacroConfig::with_steps(delta_t, horizon, spec.x0, spec.y0)?;
        let runs = ensemble(config, resolved, &macro_cfg)?;
        cost += total_cost(&runs);
        let f_stats = ensemble_stats(&runs.iter().map(|t| t.f_values.as_slice()).collect::<Vec<_>>())?;
        let x_stats = ensemble_stats(&runs.iter().map(|t| t.x_values.as_slice()).collect::<Vec<_>>())?;
        for &n in &report {
            let mut row = vec![delta_t, n as f64, f_stats.mean[n], f_stats.variance[n], x_stats.variance[n]];
            if let Some((params, tc)) = &prediction {
                row.push(vr_variance_prediction(params, delta_t, tc, n as u32, f_stats.variance[0]));
            }
            table.push(row);
        }
    }
    Ok((table, None, Map::new(), cost))
}

fn trajectory(config: &ExperimentConfig, resolved: &Resolved) -> Result<Outcome> {
    let spec = &config.macro_spec;
    let t_end = spec.t_end.expect("validated");
    let macro_cfg = MacroConfig::new(resolved.macro_steps[0], t_end, spec.x0, spec.y0)?;
    let runs = ensemble(config, resolved, &macro_cfg)?;
    let model = &resolved.model;
    let exact = model.exact_macro_solution(spec.x0, 0.0).is_ok();

    let x_stats = ensemble_stats(&runs.iter().map(|t| t.x_values.as_slice()).collect::<Vec<_>>())?;
    let f_stats = ensemble_stats(&runs.iter().map(|t| t.f_values.as_slice()).collect::<Vec<_>>())?;
    let mut columns = vec!["t", "mean_X", "var_X", "mean_F", "var_F"];
    if exact {
        columns.push("exact_X");
    }
    let mut table = Table::new(columns);
    let steps = macro_cfg.steps();
    for n in 0..=steps {
        let t = runs[0].times[n];
        let (mean_f, var_f) = if n < steps {
            (f_stats.mean[n], f_stats.variance[n])
        } else {
            (f64::NAN, f64::NAN)
        };
        let mut row = vec![t, x_stats.mean[n], x_stats.variance[n], mean_f, var_f];
        if exact {
            row.push(model.exact_macro_solution(spec.x0, t).unwrap_or_else(|e| {
                warn!("no exact solution at t = {t}: {e}");
                f64::NAN
            }));
        }
        table.push(row);
    }

    let mut summary = Map::new();
    summary.insert("final_mean_X".into(), json!(x_stats.mean[steps]));
    summary.insert("final_var_X".into(), json!(x_stats.variance[steps]));
    Ok((table, None, summary, total_cost(&runs)))
}
