//! One-dimensional regression with a quantum-kernel GP.

use std::sync::Arc;

use qgp_core::bayesopt::objective::xsinx;
use qgp_core::featuremap::{self, FeatureMapSpec, ParamVector, ScalingSpec};
use qgp_core::gp::{self, GpModel, MllOptions, QuantumKernel};
use qgp_core::qkernel::{KernelMode, QuantumKernelConfig};
use qgp_core::rng::{self, stream};
use qgp_core::Point;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::CliError;

pub const TARGET_FUNCTIONS: [&str; 2] = ["sin", "xsinx"];

pub fn target_function(name: &str) -> Option<fn(f64) -> f64> {
    match name {
        "xsinx" => Some(xsinx),
        "sin" => Some(f64::sin),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x_train: Vec<f64>,
    pub y_train: Vec<f64>,
    pub x_test: Vec<f64>,
    pub f_test: Vec<f64>,
}

/// Draw the training set from the `DATA` stream of `seed`.
pub fn sample_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset, CliError> {
    let f = target_function(&spec.function)
        .ok_or_else(|| CliError::Config(format!("unknown dataset.function '{}'", spec.function)))?;
    let (lo, hi) = spec.domain;
    let mut r = rng::rng_from(seed, &[stream::DATA]);
    let mut x_train: Vec<f64> = (0..spec.n_train).map(|_| r.random_range(lo..=hi)).collect();
    x_train.sort_by(f64::total_cmp);
    let noise = Normal::new(0.0, spec.noise_var.sqrt()).map_err(|e| CliError::Config(e.to_string()))?;
    let y_train = x_train.iter().map(|&x| f(x) + noise.sample(&mut r)).collect();
    let x_test: Vec<f64> = match spec.n_test {
        1 => vec![lo],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    };
    let f_test = x_test.iter().map(|&x| f(x)).collect();
    Ok(Dataset {
        x_train,
        y_train,
        x_test,
        f_test,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub r2: f64,
    /// Same quantities with labels mapped to `[-1, 1]`.
    pub mse_scaled: f64,
    pub r2_scaled: f64,
}

fn mse_r2(truth: &[f64], pred: &[f64]) -> (f64, f64) {
    let n = truth.len() as f64;
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    (ss_res / n, r2)
}

/// Posterior spread at the middle of the widest hole in the training inputs
/// and at the most crowded training input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceProbe {
    pub gap_midpoint: f64,
    pub std_at_gap_midpoint: f64,
    pub densest_point: f64,
    pub std_at_densest_point: f64,
}

/// Midpoint of the widest gap between sorted neighbours, and the training
/// point closest to its nearest neighbour.
pub fn probe_locations(sorted_x: &[f64]) -> (f64, f64) {
    let gaps: Vec<f64> = sorted_x.windows(2).map(|w| w[1] - w[0]).collect();
    let widest = (0..gaps.len())
        .max_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
        .unwrap_or(0);
    let midpoint = 0.5 * (sorted_x[widest] + sorted_x[widest + 1]);
    let nearest = |i: usize| {
        let left = if i > 0 { gaps[i - 1] } else { f64::INFINITY };
        let right = if i < gaps.len() { gaps[i] } else { f64::INFINITY };
        left.min(right)
    };
    let densest = (0..sorted_x.len())
        .min_by(|&a, &b| nearest(a).total_cmp(&nearest(b)))
        .unwrap_or(0);
    (midpoint, sorted_x[densest])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mode: KernelMode,
    pub shots: u64,
    pub metrics: Metrics,
    pub variance: VarianceProbe,
    pub jitter: f64,
    pub clipped_mass: f64,
    pub log_marginal_likelihood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub evaluations: usize,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressReport {
    pub seed: u64,
    pub feature_map: FeatureMapSpec,
    pub scaling: ScalingSpec,
    /// Noise variance handed to the GP, in scaled label units.
    pub noise_var_scaled: f64,
    pub initial_theta: ParamVector,
    pub theta: ParamVector,
    pub training: Option<TrainingSummary>,
    /// Exact kernel at the untrained angles.
    pub random_theta: Evaluation,
    /// Exact kernel at the final angles.
    pub exact: Evaluation,
    /// Shot-sampled kernel at the final angles, when configured.
    pub sampled: Option<Evaluation>,
}

impl RegressReport {
    /// The evaluation matching the configured kernel mode.
    pub fn primary(&self) -> &Evaluation {
        self.sampled.as_ref().unwrap_or(&self.exact)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub x: f64,
    pub true_f: f64,
    pub mean: f64,
    pub std: f64,
}

pub struct RegressOutcome {
    pub report: RegressReport,
    pub predictions: Vec<PredictionRow>,
}

struct Scaled {
    scaling: ScalingSpec,
    x_train: Vec<Point>,
    y_train: Vec<f64>,
    x_test: Vec<Point>,
}

fn scale(data: &Dataset, domain: (f64, f64)) -> Result<Scaled, CliError> {
    let scaling = ScalingSpec::with_labels_from(vec![domain.0], vec![domain.1], &data.y_train)?;
    let pts = |xs: &[f64]| -> Result<Vec<Point>, CliError> {
        xs.iter()
            .map(|&x| featuremap::scale_inputs(&[x], &scaling).map_err(CliError::from))
            .collect()
    };
    Ok(Scaled {
        x_train: pts(&data.x_train)?,
        y_train: featuremap::scale_labels(&data.y_train, &scaling)?,
        x_test: pts(&data.x_test)?,
        scaling,
    })
}

fn evaluate(
    cfg: QuantumKernelConfig,
    s: &Scaled,
    data: &Dataset,
    noise_var: f64,
    joint: bool,
) -> Result<(Evaluation, Vec<PredictionRow>), CliError> {
    let (mode, shots) = (cfg.mode, cfg.shots);
    let model: GpModel = gp::fit(Arc::new(QuantumKernel::new(cfg)?), &s.x_train, &s.y_train, noise_var)?;

    // test points followed by the two probe locations
    let (gap, dense) = probe_locations(&data.x_train);
    let mut x_star = s.x_test.clone();
    x_star.push(featuremap::scale_inputs(&[gap], &s.scaling)?);
    x_star.push(featuremap::scale_inputs(&[dense], &s.scaling)?);
    let (mut mean_s, mut std_s): (Vec<f64>, Vec<f64>) = if joint {
        let p = model.predict_joint(&x_star)?;
        (p.mean.iter().copied().collect(), p.std.iter().copied().collect())
    } else {
        let p = model.predict_marginal(&x_star)?;
        (p.mean, p.std)
    };
    let probe_std = featuremap::unscale_std(&std_s.split_off(s.x_test.len()), &s.scaling)?;
    mean_s.truncate(s.x_test.len());
    let post = gp::Marginals {
        mean: mean_s,
        std: std_s,
    };
    let mean = featuremap::unscale_labels(&post.mean, &s.scaling)?;
    let std = featuremap::unscale_std(&post.std, &s.scaling)?;

    let (mse, r2) = mse_r2(&data.f_test, &mean);
    let f_scaled = featuremap::scale_labels(&data.f_test, &s.scaling)?;
    let (mse_scaled, r2_scaled) = mse_r2(&f_scaled, &post.mean);

    let rows = data
        .x_test
        .iter()
        .zip(&data.f_test)
        .zip(mean.iter().zip(&std))
        .map(|((&x, &true_f), (&mean, &std))| PredictionRow { x, true_f, mean, std })
        .collect();
    let eval = Evaluation {
        mode,
        shots: if mode == KernelMode::Sampled { shots } else { 0 },
        metrics: Metrics {
            mse,
            r2,
            mse_scaled,
            r2_scaled,
        },
        variance: VarianceProbe {
            gap_midpoint: gap,
            std_at_gap_midpoint: probe_std[0],
            densest_point: dense,
            std_at_densest_point: probe_std[1],
        },
        jitter: model.jitter(),
        clipped_mass: model.gram().clipped_mass,
        log_marginal_likelihood: model.log_marginal_likelihood(),
    };
    Ok((eval, rows))
}

/// Sample data, optionally train the angles on the exact kernel, then fit
/// and score the configured kernel.
///
/// Angle training always uses the exact kernel: the simplex search needs a
/// deterministic loss, and the sampled kernel is then evaluated at the
/// trained angles.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<RegressOutcome, CliError> {
    let data = sample_dataset(&cfg.dataset, seed)?;
    let s = scale(&data, cfg.dataset.domain)?;
    let k = s.scaling.label_scale();
    let noise_var = cfg.dataset.noise_var / (k * k);

    let fm = &cfg.feature_map;
    let spec = FeatureMapSpec::new(fm.family, fm.num_qubits, fm.num_layers, 1)?;
    let theta0 = ParamVector::random(spec.num_params(), &mut rng::rng_from(seed, &[stream::THETA]));
    let base = QuantumKernelConfig::exact(spec, theta0.clone());

    let (theta, training) = if cfg.training.enabled {
        let opts = MllOptions {
            budget: cfg.training.budget,
            initial_step: cfg.training.initial_step,
            train_noise: cfg.training.train_noise,
        };
        let t = gp::train_mll(&base, &s.x_train, &s.y_train, noise_var, &theta0, &opts)?;
        let summary = TrainingSummary {
            evaluations: t.loss_history.len(),
            initial_log_likelihood: t.initial_log_likelihood,
            final_log_likelihood: t.final_log_likelihood,
            loss_history: t.loss_history,
        };
        (t.theta, Some(summary))
    } else {
        (theta0.clone(), None)
    };

    let (random_theta, _) = evaluate(base.clone(), &s, &data, noise_var, cfg.kernel.joint_regularization)?;
    let (exact, exact_rows) = evaluate(
        base.with_theta(theta.clone()),
        &s,
        &data,
        noise_var,
        cfg.kernel.joint_regularization,
    )?;
    let (sampled, rows) = match cfg.kernel.mode {
        KernelMode::Exact => (None, exact_rows),
        KernelMode::Sampled => {
            let master = rng::derive_seed(seed, &[stream::SHOTS]);
            let sc = QuantumKernelConfig::sampled(spec, theta.clone(), cfg.kernel.shots, master);
            let (e, rows) = evaluate(sc, &s, &data, noise_var, cfg.kernel.joint_regularization)?;
            (Some(e), rows)
        }
    };

    let report = RegressReport {
        seed,
        feature_map: spec,
        scaling: s.scaling,
        noise_var_scaled: noise_var,
        initial_theta: theta0,
        theta,
        training,
        random_theta,
        exact,
        sampled,
    };
    Ok(RegressOutcome {
        report,
        predictions: rows,
    })
}

pub fn predictions_csv(rows: &[PredictionRow]) -> String {
    let mut s = String::from("x,true_f,mean,std\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.x, r.true_f, r.mean, r.std));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CommandKind;

    #[test]
    fn dataset_is_sorted_seeded_and_in_domain() {
        let spec = DatasetSpec::default();
        let a = sample_dataset(&spec, 3).unwrap();
        assert_eq!(a, sample_dataset(&spec, 3).unwrap());
        assert_ne!(a.x_train, sample_dataset(&spec, 4).unwrap().x_train);
        assert_eq!(a.x_train.len(), 23);
        assert!(a.x_train.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.x_train.iter().all(|x| (0.0..=spec.domain.1).contains(x)));
        assert_eq!(a.x_test.len(), 50);
        assert_eq!(a.x_test[0], 0.0);
        assert_eq!(a.x_test[49], spec.domain.1);
    }

    #[test]
    fn perfect_prediction_scores() {
        let t = [1.0, 2.0, 4.0];
        assert_eq!(mse_r2(&t, &t), (0.0, 1.0));
        let (mse, r2) = mse_r2(&t, &[7.0 / 3.0; 3]);
        assert!((r2 - 0.0).abs() < 1e-12);
        assert!((mse - 14.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn probe_locations_pick_gap_and_cluster() {
        let (gap, dense) = probe_locations(&[0.0, 1.0, 1.1, 3.0, 4.0]);
        assert_eq!(gap, 2.05);
        assert_eq!(dense, 1.0);
    }

    #[test]
    fn single_test_point_config_runs() {
        let mut cfg = ExperimentConfig::for_command(CommandKind::Regress);
        cfg.dataset.n_test = 1;
        cfg.training.enabled = false;
        let out = run(&cfg, 0).unwrap();
        assert_eq!(out.predictions.len(), 1);
        assert!(out.report.exact.metrics.mse.is_finite());
        assert_eq!(predictions_csv(&out.predictions).lines().count(), 2);
    }
}
