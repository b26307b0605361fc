//! GP formulas evaluated with an explicit matrix inverse.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::linalg;

pub struct DensePosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub log_likelihood: f64,
}

/// `mu = Ks^T A^-1 y`, `Sigma = Kss - Ks^T A^-1 Ks`, with `A = K + noise I`.
pub fn posterior(
    k: &DMatrix<f64>,
    k_cross: &DMatrix<f64>,
    k_test: &DMatrix<f64>,
    y: &DVector<f64>,
    noise_var: f64,
) -> DensePosterior {
    let n = k.nrows();
    let a = k + DMatrix::<f64>::identity(n, n) * noise_var;
    let inv = linalg::inverse(&a).expect("invertible system");
    let alpha = &inv * y;
    let mean = k_cross.transpose() * &alpha;
    let cov = k_test - k_cross.transpose() * &inv * k_cross;
    let (_, log_det) = linalg::log_abs_det(&a);
    let log_likelihood = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln();
    DensePosterior {
        mean,
        cov,
        alpha,
        log_likelihood,
    }
}
