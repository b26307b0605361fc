//! Experiment configuration.
//!
//! Every field has a default, so `{"command": "regress"}` is a complete
//! config. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use qgp_core::bayesopt::{objective, strategy, AcquisitionConfig};
use qgp_core::featuremap::FeatureMapFamily;
use qgp_core::qkernel::{KernelMode, DEFAULT_SHOTS};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    #[default]
    Regress,
    Bayesopt,
    Benchmark,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureMapSettings {
    pub family: FeatureMapFamily,
    pub num_qubits: usize,
    pub num_layers: usize,
}

impl Default for FeatureMapSettings {
    fn default() -> Self {
        Self {
            family: FeatureMapFamily::ChebyshevHwe,
            num_qubits: 4,
            num_layers: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSettings {
    pub mode: KernelMode,
    pub shots: u64,
    /// Regression only: regularize training and prediction points as one
    /// Gram matrix instead of the training block alone.
    pub joint_regularization: bool,
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self {
            mode: KernelMode::Exact,
            shots: DEFAULT_SHOTS,
            joint_regularization: true,
        }
    }
}

/// Synthetic regression data: `n_train` seeded uniform draws (sorted) and
/// `n_test` equidistant points over `domain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub function: String,
    pub n_train: usize,
    pub n_test: usize,
    /// Variance of the Gaussian noise on training labels.
    pub noise_var: f64,
    pub domain: (f64, f64),
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            function: "xsinx".into(),
            n_train: 23,
            n_test: 50,
            noise_var: 0.01,
            domain: (0.0, 2.0 * PI),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub enabled: bool,
    pub budget: usize,
    pub initial_step: f64,
    pub train_noise: bool,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            budget: 150,
            initial_step: 0.1,
            train_noise: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSettings {
    /// Built-in objective name; ignored when `command` is set.
    pub name: String,
    /// Shell command speaking the line protocol of `ExternalCommand`.
    pub command: Option<String>,
    /// Search box; defaults to the objective's own domain.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub integer_dims: Vec<usize>,
    pub noise_std: f64,
    /// Noise variance passed to the surrogate in objective units. `None`
    /// means `noise_std^2` for built-ins and a small scaled default for
    /// external commands.
    pub surrogate_noise_var: Option<f64>,
}

impl Default for ObjectiveSettings {
    fn default() -> Self {
        Self {
            name: "branin".into(),
            command: None,
            bounds: None,
            integer_dims: Vec::new(),
            noise_std: 0.5,
            surrogate_noise_var: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoSettings {
    pub n_init: usize,
    pub n_iter: usize,
    pub acquisition: AcquisitionConfig,
    pub surrogates: Vec<String>,
}

impl Default for BoSettings {
    fn default() -> Self {
        Self {
            n_init: 5,
            n_iter: 50,
            acquisition: AcquisitionConfig::default(),
            surrogates: ["qgp-exact", "qgp-sampled", "rbf", "random"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSettings {
    /// Random cases per property suite.
    pub cases: usize,
    /// Random symmetric matrices for the cutoff suite.
    pub matrix_cases: usize,
    pub ei_samples: usize,
    /// Test hook: added to one off-diagonal Gram entry before the symmetry
    /// check.
    pub gram_asymmetry: f64,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            cases: 20,
            matrix_cases: 50,
            ei_samples: 1_000_000,
            gram_asymmetry: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub out: String,
    pub repetitions: usize,
    pub feature_map: FeatureMapSettings,
    pub kernel: KernelSettings,
    pub dataset: DatasetSpec,
    pub training: TrainingSettings,
    pub objective: ObjectiveSettings,
    pub bayesopt: BoSettings,
    pub benchmark: BenchmarkSettings,
}

impl ExperimentConfig {
    pub fn for_command(command: CommandKind) -> Self {
        Self {
            command,
            out: "out".into(),
            repetitions: 1,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Check that every name resolves and every count is usable.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.out.is_empty() {
            return bad("'out' must name an output directory".into());
        }
        if self.repetitions == 0 {
            return bad("'repetitions' must be at least 1".into());
        }
        let fm = &self.feature_map;
        if fm.num_qubits == 0 || fm.num_qubits > qgp_core::simulator::MAX_QUBITS {
            return bad(format!(
                "feature_map.num_qubits must be in 1..={}, got {}",
                qgp_core::simulator::MAX_QUBITS,
                fm.num_qubits
            ));
        }
        if fm.num_layers == 0 {
            return bad("feature_map.num_layers must be at least 1".into());
        }
        if self.kernel.mode == KernelMode::Sampled && self.kernel.shots == 0 {
            return bad("kernel.shots must be at least 1 in SAMPLED mode".into());
        }
        match self.command {
            CommandKind::Regress => self.validate_regress(),
            CommandKind::Bayesopt => self.validate_bayesopt(),
            CommandKind::Benchmark => {
                if self.benchmark.cases == 0 || self.benchmark.matrix_cases == 0 || self.benchmark.ei_samples < 2 {
                    return bad("benchmark needs cases >= 1, matrix_cases >= 1 and ei_samples >= 2".into());
                }
                Ok(())
            }
        }
    }

    fn validate_regress(&self) -> Result<(), CliError> {
        let d = &self.dataset;
        if crate::regress::target_function(&d.function).is_none() {
            return Err(CliError::Config(format!(
                "dataset.function '{}' is unknown; available: {}",
                d.function,
                crate::regress::TARGET_FUNCTIONS.join(", ")
            )));
        }
        if d.n_train < 2 || d.n_test == 0 {
            return Err(CliError::Config("dataset needs n_train >= 2 and n_test >= 1".into()));
        }
        if !(d.noise_var >= 0.0 && d.noise_var.is_finite()) {
            return Err(CliError::Config(format!(
                "dataset.noise_var must be >= 0, got {}",
                d.noise_var
            )));
        }
        if !(d.domain.0 < d.domain.1 && d.domain.0.is_finite() && d.domain.1.is_finite()) {
            return Err(CliError::Config(format!(
                "dataset.domain {:?} is not an interval",
                d.domain
            )));
        }
        if self.training.enabled && self.training.budget == 0 {
            return Err(CliError::Config("training.budget must be at least 1".into()));
        }
        Ok(())
    }

    fn validate_bayesopt(&self) -> Result<(), CliError> {
        let o = &self.objective;
        if o.command.is_none() {
            objective::lookup(&o.name, 1).map_err(|e| CliError::Config(e.to_string()))?;
        } else if o.bounds.is_none() {
            return Err(CliError::Config(
                "objective.bounds is required with objective.command".into(),
            ));
        }
        let bo = &self.bayesopt;
        if bo.n_init == 0 {
            return Err(CliError::Config("bayesopt.n_init must be at least 1".into()));
        }
        bo.acquisition.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if bo.surrogates.is_empty() {
            return Err(CliError::Config("bayesopt.surrogates is empty".into()));
        }
        let settings = self.strategy_settings();
        for name in &bo.surrogates {
            strategy::lookup(name, &settings).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !(o.noise_std >= 0.0 && o.noise_std.is_finite()) {
            return Err(CliError::Config(format!(
                "objective.noise_std must be >= 0, got {}",
                o.noise_std
            )));
        }
        Ok(())
    }

    pub fn strategy_settings(&self) -> strategy::StrategySettings {
        strategy::StrategySettings {
            acquisition: self.bayesopt.acquisition,
            family: self.feature_map.family,
            num_qubits: self.feature_map.num_qubits,
            num_layers: self.feature_map.num_layers,
            shots: self.kernel.shots,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
