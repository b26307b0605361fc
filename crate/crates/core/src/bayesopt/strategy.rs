//! Search strategies selectable by name.
//!
//! A [`SearchStrategy`] owns a complete optimization run. Bayesian
//! optimization strategies delegate the model-building step to a
//! [`Surrogate`]; random search needs none.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::objective::Objective;
use super::trace::BoTrace;
use super::{bo_run, random_search, AcquisitionConfig, Problem};
use crate::error::{Error, Result};
use crate::featuremap::{FeatureMapFamily, FeatureMapSpec, ParamVector};
use crate::gp::{self, GpModel, KernelProvider, QuantumKernel, RbfKernel};
use crate::qkernel::{KernelMode, QuantumKernelConfig, DEFAULT_SHOTS};
use crate::rng::{self, stream};
use crate::Point;

/// Where in a run a surrogate is being fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundContext {
    pub run_seed: u64,
    pub round: usize,
    pub input_dim: usize,
}

/// Builds the GP used to score candidates in one BO round. Inputs are scaled
/// to `[-1, 1]^d` and labels to `[-1, 1]`.
pub trait Surrogate: Send + Sync {
    fn name(&self) -> String;

    fn describe(&self) -> serde_json::Value;

    fn model(&self, x: &[Point], y: &[f64], noise_var: f64, ctx: RoundContext) -> Result<GpModel>;
}

/// QGP surrogate: angles drawn once per run from `[0, 2 pi)` and held fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumSurrogate {
    pub family: FeatureMapFamily,
    pub num_qubits: usize,
    pub num_layers: usize,
    pub mode: KernelMode,
    pub shots: u64,
}

impl QuantumSurrogate {
    /// Kernel configuration used throughout the run seeded by `run_seed`.
    pub fn kernel_config(&self, input_dim: usize, run_seed: u64) -> Result<QuantumKernelConfig> {
        let spec = FeatureMapSpec::new(self.family, self.num_qubits, self.num_layers, input_dim)?;
        let mut theta_rng = rng::rng_from(run_seed, &[stream::THETA]);
        let theta = ParamVector::random(spec.num_params(), &mut theta_rng);
        let cfg = match self.mode {
            KernelMode::Exact => QuantumKernelConfig::exact(spec, theta),
            KernelMode::Sampled => {
                QuantumKernelConfig::sampled(spec, theta, self.shots, rng::derive_seed(run_seed, &[stream::SHOTS]))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Surrogate for QuantumSurrogate {
    fn name(&self) -> String {
        match self.mode {
            KernelMode::Exact => "qgp-exact".into(),
            KernelMode::Sampled => "qgp-sampled".into(),
        }
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }

    fn model(&self, x: &[Point], y: &[f64], noise_var: f64, ctx: RoundContext) -> Result<GpModel> {
        let kernel = QuantumKernel::new(self.kernel_config(ctx.input_dim, ctx.run_seed)?)?;
        gp::fit(Arc::new(kernel), x, y, noise_var)
    }
}

/// Classical GP surrogate whose RBF hyperparameters are refit every round.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RbfSurrogate;

/// Kernel used while there is too little data to fit hyperparameters.
pub const RBF_FALLBACK: (f64, f64) = (0.5, 1.0);

impl Surrogate for RbfSurrogate {
    fn name(&self) -> String {
        "rbf".into()
    }

    fn describe(&self) -> serde_json::Value {
        json!({"kernel": "RBF", "hyperparameters": "max marginal likelihood each round"})
    }

    fn model(&self, x: &[Point], y: &[f64], noise_var: f64, ctx: RoundContext) -> Result<GpModel> {
        let seed = rng::derive_seed(ctx.run_seed, &[stream::RESTARTS, ctx.round as u64]);
        let provider = match gp::train_rbf(x, y, noise_var, seed) {
            Ok(t) => t.kernel,
            Err(Error::Fit(_)) => KernelProvider::Rbf {
                lengthscale: RBF_FALLBACK.0,
                amplitude: RBF_FALLBACK.1,
            },
            Err(e) => return Err(e),
        };
        let KernelProvider::Rbf { lengthscale, amplitude } = provider else {
            unreachable!()
        };
        gp::fit(Arc::new(RbfKernel::new(lengthscale, amplitude)?), x, y, noise_var)
    }
}

/// A complete optimization procedure.
pub trait SearchStrategy: Send + Sync {
    fn name(&self) -> String;

    fn describe(&self) -> serde_json::Value;

    fn run(&self, objective: &mut dyn Objective, problem: &Problem, seed: u64) -> Result<BoTrace>;
}

pub struct BayesianOptimization {
    pub surrogate: Box<dyn Surrogate>,
    pub acquisition: AcquisitionConfig,
}

impl SearchStrategy for BayesianOptimization {
    fn name(&self) -> String {
        self.surrogate.name()
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "strategy": self.name(),
            "surrogate": self.surrogate.describe(),
            "acquisition": self.acquisition,
        })
    }

    fn run(&self, objective: &mut dyn Objective, problem: &Problem, seed: u64) -> Result<BoTrace> {
        bo_run(objective, problem, self.surrogate.as_ref(), &self.acquisition, seed)
    }
}

pub struct RandomSearch;

impl SearchStrategy for RandomSearch {
    fn name(&self) -> String {
        "random".into()
    }

    fn describe(&self) -> serde_json::Value {
        json!({"strategy": "random"})
    }

    fn run(&self, objective: &mut dyn Objective, problem: &Problem, seed: u64) -> Result<BoTrace> {
        random_search(objective, problem, problem.n_init + problem.n_iter, seed)
    }
}

/// Knobs shared by the registered strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySettings {
    pub acquisition: AcquisitionConfig,
    pub family: FeatureMapFamily,
    pub num_qubits: usize,
    pub num_layers: usize,
    pub shots: u64,
}

impl Default for StrategySettings {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::default(),
            family: FeatureMapFamily::ChebyshevHwe,
            num_qubits: 4,
            num_layers: 2,
            shots: DEFAULT_SHOTS,
        }
    }
}

type StrategyFactory = fn(&StrategySettings) -> Box<dyn SearchStrategy>;

fn quantum(s: &StrategySettings, mode: KernelMode) -> Box<dyn SearchStrategy> {
    Box::new(BayesianOptimization {
        surrogate: Box::new(QuantumSurrogate {
            family: s.family,
            num_qubits: s.num_qubits,
            num_layers: s.num_layers,
            mode,
            shots: s.shots,
        }),
        acquisition: s.acquisition,
    })
}

/// Registered strategies by name.
pub fn registry() -> BTreeMap<&'static str, StrategyFactory> {
    let mut r: BTreeMap<&'static str, StrategyFactory> = BTreeMap::new();
    r.insert("qgp-exact", |s| quantum(s, KernelMode::Exact));
    r.insert("qgp-sampled", |s| quantum(s, KernelMode::Sampled));
    r.insert("rbf", |s| {
        Box::new(BayesianOptimization {
            surrogate: Box::new(RbfSurrogate),
            acquisition: s.acquisition,
        })
    });
    r.insert("random", |_| Box::new(RandomSearch));
    r
}

pub fn lookup(name: &str, settings: &StrategySettings) -> Result<Box<dyn SearchStrategy>> {
    let r = registry();
    r.get(name.to_ascii_lowercase().as_str())
        .map(|f| f(settings))
        .ok_or_else(|| Error::UnknownComponent {
            kind: "strategy",
            name: name.to_string(),
            available: r.keys().copied().collect::<Vec<_>>().join(", "),
        })
}
