use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CANDIDATES: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Exploration margin subtracted from the improvement.
    pub lambda: f64,
    /// Uniform random candidates scored per proposal.
    pub num_candidates: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            num_candidates: DEFAULT_CANDIDATES,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_candidates == 0 {
            return Err(Error::invalid("num_candidates must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Expected improvement below `best` for a minimization problem.
///
/// With `delta = best - mu - lambda` and `z = delta / sigma`:
/// `EI = delta * Phi(z) + sigma * phi(z)`, and `EI = 0` when `sigma = 0`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64, lambda: f64) -> Result<f64> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let delta = best - mu - lambda;
    let z = delta / sigma;
    // the closed form can round to a tiny negative for very negative z
    Ok((delta * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0))
}
