//! Gaussian process regression with fidelity quantum kernels evaluated on a
//! dense statevector simulator, and Bayesian optimization on top of it.
//!
//! The crate is layered bottom-up:
//!
//! - [`simulator`]: statevector simulation of small parameterized circuits.
//! - [`featuremap`]: data-encoding circuit families and input/label scaling.
//! - [`qkernel`]: exact and shot-sampled fidelity kernels, Gram matrices and
//!   eigenvalue-cutoff regularization.
//! - [`gp`]: GP posterior, marginal likelihood, kernel training.
//! - [`bayesopt`]: expected improvement, the BO loop, baselines and objectives.
//!
//! Interchangeable pieces (feature-map families, covariance kernels,
//! objectives, search strategies) sit behind traits and are looked up by name
//! in registries so that experiments can select them at runtime.

pub mod bayesopt;
pub mod error;
pub mod featuremap;
pub mod gp;
pub mod optim;
pub mod qkernel;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};

/// A data point. Row-major collections of points are passed as `&[Point]`.
pub type Point = Vec<f64>;
