use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qkernel::{self, GramMatrix, KernelMode, QuantumKernelConfig};
use crate::Point;

/// A covariance function usable by [`GpModel`](super::GpModel).
pub trait Kernel: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Training Gram matrix `k_XX`, regularized if the kernel needs it.
    fn train_gram(&self, x: &[Point]) -> Result<GramMatrix>;

    /// `k(x_i, x2_j)` as an `n x m` matrix.
    fn cross(&self, x: &[Point], x2: &[Point]) -> Result<DMatrix<f64>>;

    /// Full test covariance `k(x*_i, x*_j)`.
    fn test_gram(&self, x: &[Point]) -> Result<DMatrix<f64>>;

    /// Prior variances `k(x_i, x_i)`.
    fn diag(&self, x: &[Point]) -> Result<Vec<f64>>;

    /// Gram matrix over `x` followed by `x_star`, regularized as a whole if
    /// the kernel needs it.
    fn joint_gram(&self, x: &[Point], x_star: &[Point]) -> Result<GramMatrix> {
        let (n, m) = (x.len(), x_star.len());
        let mut j = DMatrix::zeros(n + m, n + m);
        j.view_mut((0, 0), (n, n)).copy_from(&self.train_gram(x)?.entries);
        let cross = self.cross(x, x_star)?;
        j.view_mut((0, n), (n, m)).copy_from(&cross);
        j.view_mut((n, 0), (m, n)).copy_from(&cross.transpose());
        j.view_mut((n, n), (m, m)).copy_from(&self.test_gram(x_star)?);
        Ok(GramMatrix::from_entries(j, true))
    }

    /// Serializable description of this kernel.
    fn provider(&self) -> KernelProvider;
}

/// Serializable kernel choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KernelProvider {
    Quantum(QuantumKernelConfig),
    Rbf { lengthscale: f64, amplitude: f64 },
}

impl KernelProvider {
    pub fn build(&self) -> Result<Arc<dyn Kernel>> {
        Ok(match self {
            KernelProvider::Quantum(cfg) => Arc::new(QuantumKernel::new(cfg.clone())?),
            KernelProvider::Rbf { lengthscale, amplitude } => Arc::new(RbfKernel::new(*lengthscale, *amplitude)?),
        })
    }
}

/// Fidelity quantum kernel; sampled training Grams are eigenvalue-cutoff
/// regularized.
#[derive(Clone, Debug)]
pub struct QuantumKernel {
    cfg: QuantumKernelConfig,
}

impl QuantumKernel {
    pub fn new(cfg: QuantumKernelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &QuantumKernelConfig {
        &self.cfg
    }
}

impl Kernel for QuantumKernel {
    fn name(&self) -> &'static str {
        "quantum"
    }

    fn train_gram(&self, x: &[Point]) -> Result<GramMatrix> {
        let g = qkernel::gram(x, None, &self.cfg)?;
        match self.cfg.mode {
            KernelMode::Exact => Ok(g),
            KernelMode::Sampled => qkernel::regularize_cutoff(&g),
        }
    }

    fn cross(&self, x: &[Point], x2: &[Point]) -> Result<DMatrix<f64>> {
        Ok(qkernel::gram(x, Some(x2), &self.cfg)?.entries)
    }

    fn test_gram(&self, x: &[Point]) -> Result<DMatrix<f64>> {
        Ok(qkernel::gram(x, None, &self.cfg)?.entries)
    }

    fn diag(&self, x: &[Point]) -> Result<Vec<f64>> {
        Ok(vec![1.0; x.len()])
    }

    /// Training points keep their indices, so the training block of the raw
    /// joint matrix is the raw training Gram.
    fn joint_gram(&self, x: &[Point], x_star: &[Point]) -> Result<GramMatrix> {
        let all: Vec<Point> = x.iter().chain(x_star).cloned().collect();
        let g = qkernel::gram(&all, None, &self.cfg)?;
        match self.cfg.mode {
            KernelMode::Exact => Ok(g),
            KernelMode::Sampled => qkernel::regularize_cutoff(&g),
        }
    }

    fn provider(&self) -> KernelProvider {
        KernelProvider::Quantum(self.cfg.clone())
    }
}

/// `amplitude * exp(-|x - x'|^2 / (2 lengthscale^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbfKernel {
    pub lengthscale: f64,
    pub amplitude: f64,
}

impl RbfKernel {
    pub fn new(lengthscale: f64, amplitude: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::invalid(format!(
                "RBF lengthscale must be positive, got {lengthscale}"
            )));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::invalid(format!(
                "RBF amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self { lengthscale, amplitude })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
        self.amplitude * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    fn matrix(&self, x: &[Point], x2: &[Point]) -> Result<DMatrix<f64>> {
        if x.is_empty() || x2.is_empty() {
            return Err(Error::invalid("kernel matrix of an empty point set"));
        }
        Ok(DMatrix::from_fn(x.len(), x2.len(), |i, j| self.eval(&x[i], &x2[j])))
    }
}

impl Kernel for RbfKernel {
    fn name(&self) -> &'static str {
        "rbf"
    }

    fn train_gram(&self, x: &[Point]) -> Result<GramMatrix> {
        Ok(GramMatrix::from_entries(self.matrix(x, x)?, true))
    }

    fn cross(&self, x: &[Point], x2: &[Point]) -> Result<DMatrix<f64>> {
        self.matrix(x, x2)
    }

    fn test_gram(&self, x: &[Point]) -> Result<DMatrix<f64>> {
        self.matrix(x, x)
    }

    fn diag(&self, x: &[Point]) -> Result<Vec<f64>> {
        Ok(vec![self.amplitude; x.len()])
    }

    fn provider(&self) -> KernelProvider {
        KernelProvider::Rbf {
            lengthscale: self.lengthscale,
            amplitude: self.amplitude,
        }
    }
}
