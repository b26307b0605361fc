//! Repeated paired Bayesian-optimization runs.

use qgp_core::bayesopt::{objective, strategy, BoTrace, Bounds, Objective, Problem};
use qgp_core::rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Mean and spread of best-so-far across repetitions, per iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub iteration: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub completed_runs: usize,
    pub aborted_runs: usize,
    pub final_mean: f64,
    pub final_std: f64,
}

pub struct StrategyResult {
    pub name: String,
    pub traces: Vec<BoTrace>,
    pub aggregate: Vec<AggregateRow>,
}

impl StrategyResult {
    pub fn summary(&self) -> StrategySummary {
        let completed = self.traces.iter().filter(|t| t.is_completed()).count();
        let last = self.aggregate.last();
        StrategySummary {
            strategy: self.name.clone(),
            completed_runs: completed,
            aborted_runs: self.traces.len() - completed,
            final_mean: last.map_or(f64::NAN, |r| r.mean),
            final_std: last.map_or(f64::NAN, |r| r.std),
        }
    }
}

/// Seed of repetition `rep`; shared by every strategy so that all of them
/// start from the same initial design and noise draws.
pub fn run_seed(master: u64, rep: usize) -> u64 {
    rng::derive_seed(master, &[rep as u64])
}

fn make_objective(cfg: &ExperimentConfig) -> Result<Box<dyn Objective>, CliError> {
    let o = &cfg.objective;
    match &o.command {
        Some(cmd) => {
            let dim = o.bounds.as_ref().map_or(0, |b| b.len());
            Ok(Box::new(objective::ExternalCommand::spawn(
                cmd,
                dim,
                o.integer_dims.clone(),
            )?))
        }
        None => {
            let dim = o.bounds.as_ref().map_or(1, |b| b.len());
            objective::lookup(&o.name, dim).map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

fn problem(cfg: &ExperimentConfig) -> Result<Problem, CliError> {
    let o = &cfg.objective;
    let bounds = match &o.bounds {
        Some(b) => Bounds::new(b.clone()).map_err(|e| CliError::Config(e.to_string()))?,
        None => make_objective(cfg)?
            .default_bounds()
            .ok_or_else(|| CliError::Config(format!("objective '{}' needs explicit bounds", o.name)))?,
    };
    let surrogate_noise_var = match (o.surrogate_noise_var, &o.command) {
        (Some(v), _) => Some(v),
        (None, None) => Some(o.noise_std * o.noise_std),
        (None, Some(_)) => None,
    };
    Ok(Problem {
        bounds,
        n_init: cfg.bayesopt.n_init,
        n_iter: cfg.bayesopt.n_iter,
        noise_std: o.noise_std,
        surrogate_noise_var,
    })
}

/// Column-wise mean and population std of best-so-far over completed runs.
pub fn aggregate(traces: &[BoTrace]) -> Vec<AggregateRow> {
    let curves: Vec<Vec<f64>> = traces
        .iter()
        .filter(|t| t.is_completed())
        .map(|t| t.best_by_iteration())
        .collect();
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let n = curves.len() as f64;
            let mean = curves.iter().map(|c| c[i]).sum::<f64>() / n;
            let var = curves.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / n;
            AggregateRow {
                iteration: i,
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from("iteration,mean,std\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.iteration, r.mean, r.std));
    }
    s
}

/// Run every configured strategy `cfg.repetitions` times.
///
/// `on_trace` sees each trace as soon as it finishes.
pub fn run(
    cfg: &ExperimentConfig,
    mut on_trace: impl FnMut(&BoTrace, usize) -> Result<(), CliError>,
) -> Result<Vec<StrategyResult>, CliError> {
    let problem = problem(cfg)?;
    let settings = cfg.strategy_settings();
    let mut results = Vec::new();
    for name in &cfg.bayesopt.surrogates {
        let strat = strategy::lookup(name, &settings).map_err(|e| CliError::Config(e.to_string()))?;
        let mut traces = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions {
            let mut obj = make_objective(cfg)?;
            let trace = strat.run(obj.as_mut(), &problem, run_seed(cfg.seed, rep))?;
            if !trace.is_completed() {
                log::warn!("{name} run {rep} aborted: {:?}", trace.status);
            }
            on_trace(&trace, rep)?;
            traces.push(trace);
        }
        if traces.iter().all(|t| !t.is_completed()) {
            return Err(CliError::Runtime(format!("every '{name}' run aborted")));
        }
        let aggregate = aggregate(&traces);
        results.push(StrategyResult {
            name: name.clone(),
            traces,
            aggregate,
        });
    }
    Ok(results)
}
