//! Gaussian process regression with a zero prior mean.
//!
//! All quantities live in scaled label space; callers map labels to and from
//! `[-1, 1]` with [`crate::featuremap::ScalingSpec`].

mod kernel;
mod train;

use std::f64::consts::PI;
use std::sync::Arc;

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use kernel::{Kernel, KernelProvider, QuantumKernel, RbfKernel};
pub use train::{train_mll, train_rbf, MllOptions, MllTraining, RbfTraining, RBF_RESTARTS};

use crate::error::{Error, Result};
use crate::featuremap::ScalingSpec;
use crate::qkernel::GramMatrix;
use crate::Point;

/// Jitter attempts, as multiples of the mean diagonal of `K + noise I`.
pub const JITTER_SCHEDULE: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Posterior variances clamped by more than this trigger a warning.
pub const CLAMP_WARNING: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GpModel {
    kernel: Arc<dyn Kernel>,
    x_train: Vec<Point>,
    y_train: DVector<f64>,
    noise_var: f64,
    jitter: f64,
    gram: GramMatrix,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub std: DVector<f64>,
}

/// Posterior mean and variance without the off-diagonal covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fit a GP to scaled inputs `x` and labels `y`.
pub fn fit(kernel: Arc<dyn Kernel>, x: &[Point], y: &[f64], noise_var: f64) -> Result<GpModel> {
    let n = x.len();
    if n == 0 {
        return Err(Error::invalid("cannot fit a GP to zero points"));
    }
    if y.len() != n {
        return Err(Error::invalid(format!("{n} inputs but {} labels", y.len())));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::invalid(format!(
            "noise variance must be finite and >= 0, got {noise_var}"
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite label {v}")));
    }
    let dim = x[0].len();
    if x.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("inputs have inconsistent dimensions"));
    }

    let gram = kernel.train_gram(x)?;
    let (chol, jitter) = factorize(&gram.entries, noise_var)?;
    let y_train = DVector::from_column_slice(y);
    let alpha = chol.solve(&y_train);
    Ok(GpModel {
        kernel,
        x_train: x.to_vec(),
        y_train,
        noise_var,
        jitter,
        gram,
        chol,
        alpha,
    })
}

/// Cholesky factor of `k + noise I`, retrying with growing diagonal jitter.
fn factorize(k: &DMatrix<f64>, noise_var: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += noise_var;
    }
    let mean_diag = a.trace() / n as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for factor in JITTER_SCHEDULE {
        let jitter = factor * scale;
        let mut attempt = a.clone();
        for i in 0..n {
            attempt[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(attempt) {
            return Ok((chol, jitter));
        }
    }
    let min_eigenvalue = SymmetricEigen::new(a).eigenvalues.min();
    Err(Error::NotPositiveDefinite { min_eigenvalue })
}

impl GpModel {
    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    pub fn x_train(&self) -> &[Point] {
        &self.x_train
    }

    pub fn y_train(&self) -> &DVector<f64> {
        &self.y_train
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Diagonal jitter added on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// The (possibly regularized) training Gram matrix.
    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// Lower-triangular `L` with `L L^T = K + (noise + jitter) I`.
    pub fn chol_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `(K + noise I)^-1 y`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn check_points(&self, x_star: &[Point]) -> Result<()> {
        if x_star.is_empty() {
            return Err(Error::invalid("no prediction points"));
        }
        let dim = self.x_train[0].len();
        if let Some(p) = x_star.iter().find(|p| p.len() != dim) {
            return Err(Error::invalid(format!(
                "prediction point has dimension {}, model expects {dim}",
                p.len()
            )));
        }
        Ok(())
    }

    /// Full posterior over `x_star`.
    pub fn predict(&self, x_star: &[Point]) -> Result<Posterior> {
        self.check_points(x_star)?;
        let k_cross = self.kernel.cross(&self.x_train, x_star)?;
        let mean = k_cross.tr_mul(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_cross)
            .expect("non-singular factor");
        let cov = self.kernel.test_gram(x_star)? - v.tr_mul(&v);
        let std = DVector::from_vec(clamped_std(cov.diagonal().iter().copied()));
        Ok(Posterior { mean, cov, std })
    }

    /// Posterior mean and standard deviation at each point of `x_star`.
    pub fn predict_marginal(&self, x_star: &[Point]) -> Result<Marginals> {
        self.check_points(x_star)?;
        let k_cross = self.kernel.cross(&self.x_train, x_star)?;
        let mean = k_cross.tr_mul(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_cross)
            .expect("non-singular factor");
        let prior = self.kernel.diag(x_star)?;
        let std = prior.iter().zip(v.column_iter()).map(|(p, col)| p - col.norm_squared());
        let std = clamped_std(std);
        Ok(Marginals {
            mean: mean.iter().copied().collect(),
            std,
        })
    }

    /// Posterior computed from the joint Gram over training and prediction
    /// points, regularized as one matrix.
    ///
    /// Shot noise makes the cross block inconsistent with a separately
    /// regularized training block, which can drive predicted variances
    /// negative. Regularizing the joint matrix keeps every conditional
    /// variance non-negative. The cost is an eigendecomposition of size
    /// `n + m`. For kernels that need no regularization this equals
    /// [`predict`](Self::predict).
    pub fn predict_joint(&self, x_star: &[Point]) -> Result<Posterior> {
        self.check_points(x_star)?;
        let n = self.x_train.len();
        let m = x_star.len();
        let joint = self.kernel.joint_gram(&self.x_train, x_star)?.entries;
        let (chol, _) = factorize(&joint.view((0, 0), (n, n)).into_owned(), self.noise_var)?;
        let k_cross = joint.view((0, n), (n, m)).into_owned();
        let alpha = chol.solve(&self.y_train);
        let mean = k_cross.tr_mul(&alpha);
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&k_cross)
            .expect("non-singular factor");
        let cov = joint.view((n, n), (m, m)).into_owned() - v.tr_mul(&v);
        let std = DVector::from_vec(clamped_std(cov.diagonal().iter().copied()));
        Ok(Posterior { mean, cov, std })
    }

    /// `-1/2 y^T alpha - sum log L_ii - n/2 log 2 pi`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.y_train.len() as f64;
        let data_fit = -0.5 * self.y_train.dot(&self.alpha);
        let log_det_half: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        data_fit - log_det_half - 0.5 * n * (2.0 * PI).ln()
    }
}

/// Square roots of variances clamped at zero. One warning per call reports
/// clamps larger than [`CLAMP_WARNING`].
fn clamped_std(variances: impl Iterator<Item = f64>) -> Vec<f64> {
    let (mut count, mut worst) = (0usize, 0.0f64);
    let std = variances
        .map(|v| {
            if v < -CLAMP_WARNING {
                count += 1;
                worst = worst.min(v);
            }
            v.max(0.0).sqrt()
        })
        .collect();
    if count > 0 {
        warn!("{count} posterior variances clamped to zero (most negative {worst:.3e}); Gram regularization may be inadequate");
    }
    std
}

/// Reproducibility record of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kernel: KernelProvider,
    pub noise_var: f64,
    pub jitter: f64,
    pub scaling: Option<ScalingSpec>,
    pub log_marginal_likelihood: f64,
    pub clipped_mass: f64,
}

impl ModelSummary {
    pub fn of(model: &GpModel, scaling: Option<ScalingSpec>) -> Self {
        Self {
            kernel: model.kernel.provider(),
            noise_var: model.noise_var,
            jitter: model.jitter,
            scaling,
            log_marginal_likelihood: model.log_marginal_likelihood(),
            clipped_mass: model.gram.clipped_mass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featuremap::{FeatureMapFamily, FeatureMapSpec, ParamVector};
    use crate::qkernel::{KernelMode, QuantumKernelConfig};

    fn rbf(l: f64, a: f64) -> Arc<dyn Kernel> {
        Arc::new(RbfKernel::new(l, a).unwrap())
    }

    fn quantum() -> Arc<dyn Kernel> {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 3, 2, 1).unwrap();
        let theta = ParamVector::new((0..9).map(|i| 0.4 + 0.7 * i as f64).collect()).unwrap();
        Arc::new(QuantumKernel::new(QuantumKernelConfig::exact(spec, theta)).unwrap())
    }

    #[test]
    fn single_point_fit() {
        let m = fit(rbf(1.0, 1.0), &[vec![0.0]], &[0.7], 0.0).unwrap();
        let l = m.chol_factor();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((m.alpha()[0] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn lml_of_single_zero_label() {
        let m = fit(rbf(1.0, 1.0), &[vec![0.0]], &[0.0], 0.0).unwrap();
        assert!((m.log_marginal_likelihood() + 0.5 * (2.0 * PI).ln()).abs() < 1e-9);
        assert!((m.log_marginal_likelihood() + 0.9189).abs() < 1e-4);
    }

    #[test]
    fn noiseless_quantum_interpolates() {
        let x = vec![vec![-0.8], vec![-0.1], vec![0.5]];
        let y = [0.3, -0.4, 0.9];
        let m = fit(quantum(), &x, &y, 0.0).unwrap();
        let p = m.predict(&x).unwrap();
        for i in 0..3 {
            assert!((p.mean[i] - y[i]).abs() < 1e-6, "{} vs {}", p.mean[i], y[i]);
        }
    }

    #[test]
    fn far_prediction_recovers_prior() {
        let m = fit(rbf(0.1, 1.0), &[vec![0.0], vec![0.1]], &[0.5, -0.5], 0.01).unwrap();
        let p = m.predict(&[vec![10.0]]).unwrap();
        assert!(p.mean[0].abs() < 1e-12);
        assert!((p.cov[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_training_point_variance_bounds() {
        let noise = 0.05;
        let m = fit(quantum(), &[vec![0.2], vec![-0.6]], &[0.1, 0.4], noise).unwrap();
        let p = m.predict(&[vec![0.2]]).unwrap();
        let var = p.cov[(0, 0)];
        assert!(var > 0.0 && var <= noise + 1.0, "{var}");
    }

    #[test]
    fn alpha_solves_system() {
        let x: Vec<Point> = (0..8).map(|i| vec![-1.0 + 0.25 * i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|p| p[0].sin()).collect();
        let m = fit(quantum(), &x, &y, 1e-3).unwrap();
        let l = m.chol_factor();
        let r = &l * l.transpose() * m.alpha() - DVector::from_column_slice(&y);
        let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(r.amax() <= 1e-8 * ymax);
        assert!((0..8).all(|i| l[(i, i)] > 0.0));
        assert!((0..8).all(|i| (i + 1..8).all(|j| l[(i, j)] == 0.0)));
    }

    #[test]
    fn input_validation() {
        assert!(fit(rbf(1.0, 1.0), &[], &[], 0.0).is_err());
        assert!(fit(rbf(1.0, 1.0), &[vec![0.0]], &[1.0, 2.0], 0.0).is_err());
        assert!(fit(rbf(1.0, 1.0), &[vec![0.0]], &[1.0], -1.0).is_err());
        let m = fit(rbf(1.0, 1.0), &[vec![0.0]], &[1.0], 0.0).unwrap();
        assert!(matches!(m.predict(&[vec![0.0, 1.0]]), Err(Error::InvalidArgument(_))));
        assert!(m.predict(&[]).is_err());
    }

    #[test]
    fn singular_gram_is_rescued_by_jitter() {
        // duplicate points make K singular; jitter keeps the factorization alive
        let x = vec![vec![0.3], vec![0.3], vec![0.3]];
        let m = fit(rbf(1.0, 1.0), &x, &[0.1, 0.1, 0.1], 0.0).unwrap();
        assert!(m.jitter() > 0.0);
    }

    #[test]
    fn indefinite_gram_reports_min_eigenvalue() {
        #[derive(Debug)]
        struct Broken;
        impl Kernel for Broken {
            fn name(&self) -> &'static str {
                "broken"
            }
            fn train_gram(&self, _: &[Point]) -> Result<GramMatrix> {
                Ok(GramMatrix::from_entries(nalgebra::dmatrix![1.0, 2.0; 2.0, 1.0], true))
            }
            fn cross(&self, _: &[Point], _: &[Point]) -> Result<DMatrix<f64>> {
                unreachable!()
            }
            fn test_gram(&self, _: &[Point]) -> Result<DMatrix<f64>> {
                unreachable!()
            }
            fn diag(&self, _: &[Point]) -> Result<Vec<f64>> {
                unreachable!()
            }
            fn provider(&self) -> KernelProvider {
                unreachable!()
            }
        }
        let err = fit(Arc::new(Broken), &[vec![0.0], vec![1.0]], &[0.0, 0.0], 0.0).unwrap_err();
        match err {
            Error::NotPositiveDefinite { min_eigenvalue } => assert!((min_eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sampled_quantum_gram_is_regularized() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 3, 2, 1).unwrap();
        let theta = ParamVector::new((0..9).map(|i| 1.3 * i as f64).collect()).unwrap();
        let cfg = QuantumKernelConfig::sampled(spec, theta, 200, 4);
        assert_eq!(cfg.mode, KernelMode::Sampled);
        let x: Vec<Point> = (0..12).map(|i| vec![-1.0 + i as f64 / 6.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| p[0]).collect();
        let m = fit(Arc::new(QuantumKernel::new(cfg).unwrap()), &x, &y, 1e-3).unwrap();
        assert!(m.gram().regularized);
        assert!(m.gram().min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn summary_serializes() {
        let m = fit(rbf(0.5, 1.0), &[vec![0.0], vec![0.5]], &[0.0, 1.0], 0.01).unwrap();
        let s = ModelSummary::of(&m, None);
        let json = serde_json::to_string(&s).unwrap();
        let back: ModelSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
