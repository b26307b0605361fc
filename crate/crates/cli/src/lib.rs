//! Command-line driver: regression, Bayesian optimization and oracle
//! benchmarks, each writing CSV and JSON into an output directory.
//!
//! Every directory written contains `config.json`, the fully resolved
//! configuration. Identical configs produce byte-identical files.

pub mod bayesopt;
pub mod benchmark;
pub mod config;
pub mod output;
pub mod regress;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use config::{CommandKind, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("benchmark failure: {0}")]
    Benchmark(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Benchmark(_) => 3,
        }
    }
}

impl From<qgp_core::Error> for CliError {
    fn from(e: qgp_core::Error) -> Self {
        match e {
            qgp_core::Error::UnknownComponent { .. } => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressSummary {
    pub seeds: Vec<u64>,
    pub mean_mse: f64,
    pub mean_r2: f64,
    pub mean_mse_scaled: f64,
}

/// Validate `cfg` and run its command, writing into `cfg.out`.
pub fn execute(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = Path::new(&cfg.out);
    output::prepare_dir(out, cfg)?;
    match cfg.command {
        CommandKind::Regress => execute_regress(cfg, out),
        CommandKind::Bayesopt => execute_bayesopt(cfg, out),
        CommandKind::Benchmark => execute_benchmark(cfg, out),
    }
}

fn execute_regress(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for rep in 0..cfg.repetitions {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let dir = if cfg.repetitions == 1 {
            out.to_path_buf()
        } else {
            output::prepare_dir(&out.join(format!("seed_{seed}")), cfg)?
        };
        let result = regress::run(cfg, seed)?;
        output::write_atomic(
            &dir.join("predictions.csv"),
            &regress::predictions_csv(&result.predictions),
        )?;
        output::write_json(&dir.join("metrics.json"), &result.report)?;
        let m = &result.report.primary().metrics;
        log::info!("seed {seed}: mse {:.4} r2 {:.4}", m.mse, m.r2);
        reports.push(result.report);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&regress::RegressReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let summary = RegressSummary {
        seeds: reports.iter().map(|r| r.seed).collect(),
        mean_mse: mean(|r| r.primary().metrics.mse),
        mean_r2: mean(|r| r.primary().metrics.r2),
        mean_mse_scaled: mean(|r| r.primary().metrics.mse_scaled),
    };
    output::write_json(&out.join("summary.json"), &summary)
}

fn execute_bayesopt(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let traces_dir = output::prepare_dir(&out.join("traces"), cfg)?;
    let results = bayesopt::run(cfg, |trace, rep| {
        let stem = format!("{}_run{rep:03}", trace.strategy);
        let mut csv = Vec::new();
        trace.write_csv(&mut csv)?;
        output::write_atomic(&traces_dir.join(format!("{stem}.csv")), &String::from_utf8_lossy(&csv))?;
        output::write_json(&traces_dir.join(format!("{stem}.json")), trace)
    })?;
    let mut summaries = Vec::new();
    for r in &results {
        output::write_atomic(
            &out.join(format!("aggregate_{}.csv", r.name)),
            &bayesopt::aggregate_csv(&r.aggregate),
        )?;
        let s = r.summary();
        log::info!(
            "{}: final best-so-far {:.4} +- {:.4}",
            s.strategy,
            s.final_mean,
            s.final_std
        );
        summaries.push(s);
    }
    output::write_json(&out.join("summary.json"), &summaries)
}

fn execute_benchmark(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let report = benchmark::run(&cfg.benchmark, cfg.seed)?;
    output::write_json(&out.join("report.json"), &report)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| format!("{} ({})", s.name, s.failures.join(", ")))
            .collect();
        Err(CliError::Benchmark(format!("failed suites: {}", failed.join("; "))))
    }
}

/// Serve a built-in objective over the external-command line protocol:
/// one whitespace-separated point per input line, one value per output line.
pub fn serve_objective(name: &str, input: impl BufRead, mut output: impl Write) -> Result<(), CliError> {
    // dimension-generic objectives take their size from the first point
    qgp_core::bayesopt::objective::lookup(name, 1)?;
    let mut objective = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let x: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| CliError::Runtime(format!("'{t}' is not a number")))
            })
            .collect::<Result<_, _>>()?;
        let f = match &mut objective {
            Some(f) => f,
            None => objective.insert(qgp_core::bayesopt::objective::lookup(name, x.len())?),
        };
        let y = f.evaluate(&x)?;
        writeln!(output, "{y}")?;
        output.flush()?;
    }
    Ok(())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
