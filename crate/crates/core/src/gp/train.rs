use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fit, Kernel, KernelProvider, QuantumKernel, RbfKernel};
use crate::error::{Error, Result};
use crate::featuremap::ParamVector;
use crate::optim::NelderMead;
use crate::qkernel::QuantumKernelConfig;
use crate::rng::{self, stream};
use crate::Point;

pub const RBF_RESTARTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MllOptions {
    /// Objective evaluations allowed to the simplex search.
    pub budget: usize,
    /// Initial simplex edge in radians.
    pub initial_step: f64,
    /// Also fit `log(noise_var)`.
    pub train_noise: bool,
}

impl Default for MllOptions {
    fn default() -> Self {
        Self {
            budget: 150,
            initial_step: 0.1,
            train_noise: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MllTraining {
    pub theta: ParamVector,
    pub noise_var: f64,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
    /// Best negative log marginal likelihood after each evaluation.
    pub loss_history: Vec<f64>,
}

fn negative_lml(kernel: Arc<dyn Kernel>, x: &[Point], y: &[f64], noise_var: f64) -> f64 {
    match fit(kernel, x, y, noise_var) {
        Ok(model) => -model.log_marginal_likelihood(),
        Err(_) => f64::INFINITY,
    }
}

/// Maximize the marginal likelihood over the feature-map angles.
pub fn train_mll(
    base: &QuantumKernelConfig,
    x: &[Point],
    y: &[f64],
    noise_var: f64,
    theta0: &ParamVector,
    opts: &MllOptions,
) -> Result<MllTraining> {
    if opts.budget == 0 {
        return Err(Error::invalid("training budget must be at least 1"));
    }
    let n_theta = base.spec.num_params();
    if theta0.len() != n_theta {
        return Err(Error::invalid(format!(
            "theta0 has {} entries, expected {n_theta}",
            theta0.len()
        )));
    }
    if opts.train_noise && !(noise_var > 0.0) {
        return Err(Error::invalid(
            "training the noise variance needs a positive starting value",
        ));
    }

    let unpack = |p: &[f64]| -> (ParamVector, f64) {
        let theta = ParamVector::new(p[..n_theta].to_vec()).unwrap_or_else(|_| ParamVector::zeros(n_theta));
        let noise = if opts.train_noise { p[n_theta].exp() } else { noise_var };
        (theta, noise)
    };
    let loss = |p: &[f64]| -> f64 {
        if p.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let (theta, noise) = unpack(p);
        match QuantumKernel::new(base.with_theta(theta)) {
            Ok(k) => negative_lml(Arc::new(k), x, y, noise),
            Err(_) => f64::INFINITY,
        }
    };

    let mut p0 = theta0.values().to_vec();
    if opts.train_noise {
        p0.push(noise_var.ln());
    }
    let initial = loss(&p0);
    if !initial.is_finite() {
        // surface the underlying failure if there is one
        let kernel = QuantumKernel::new(base.with_theta(theta0.clone()))?;
        fit(Arc::new(kernel), x, y, noise_var)?;
        return Err(Error::Initialization(format!("non-finite loss {initial} at theta0")));
    }

    let nm = NelderMead {
        initial_step: opts.initial_step,
        max_evals: opts.budget,
        ..NelderMead::default()
    };
    let best = nm.minimize(loss, &p0);
    let (theta, noise) = unpack(&best.x);
    Ok(MllTraining {
        theta,
        noise_var: noise,
        initial_log_likelihood: -initial,
        final_log_likelihood: -best.value,
        loss_history: best.history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfTraining {
    pub kernel: KernelProvider,
    pub log_likelihood: f64,
    /// Log likelihood at each restart's starting point.
    pub initial_log_likelihoods: Vec<f64>,
}

/// Multi-start maximum-likelihood fit of RBF lengthscale and amplitude.
pub fn train_rbf(x: &[Point], y: &[f64], noise_var: f64, seed: u64) -> Result<RbfTraining> {
    if x.len() < 2 {
        return Err(Error::Fit("RBF training needs at least two points".into()));
    }
    if x.iter().all(|p| p == &x[0]) {
        return Err(Error::Fit("all training inputs are identical".into()));
    }

    // log-parameters are kept in a box that stays numerically sane
    let (ln_l_range, ln_a_range) = ((1e-3f64.ln(), 1e3f64.ln()), (1e-4f64.ln(), 1e4f64.ln()));
    let loss = |p: &[f64]| -> f64 {
        if !(ln_l_range.0..=ln_l_range.1).contains(&p[0]) || !(ln_a_range.0..=ln_a_range.1).contains(&p[1]) {
            return f64::INFINITY;
        }
        match RbfKernel::new(p[0].exp(), p[1].exp()) {
            Ok(k) => negative_lml(Arc::new(k), x, y, noise_var),
            Err(_) => f64::INFINITY,
        }
    };

    let mut rng = rng::rng_from(seed, &[stream::RESTARTS]);
    let nm = NelderMead {
        initial_step: 0.5,
        max_evals: 150,
        ..NelderMead::default()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut initial_log_likelihoods = Vec::with_capacity(RBF_RESTARTS);
    for _ in 0..RBF_RESTARTS {
        let start = [
            rng.random_range(0.1f64.ln()..3.0f64.ln()),
            rng.random_range(0.3f64.ln()..3.0f64.ln()),
        ];
        initial_log_likelihoods.push(-loss(&start));
        let m = nm.minimize(loss, &start);
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    let (p, value) = best.expect("at least one restart");
    if !value.is_finite() {
        return Err(Error::Fit("no restart produced a finite likelihood".into()));
    }
    Ok(RbfTraining {
        kernel: KernelProvider::Rbf {
            lengthscale: p[0].exp(),
            amplitude: p[1].exp(),
        },
        log_likelihood: -value,
        initial_log_likelihoods,
    })
}
