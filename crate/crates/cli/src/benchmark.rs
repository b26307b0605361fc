//! Oracle-equivalence and invariant suites.
//!
//! Each suite compares a library routine against a brute-force reference
//! from `qgp-oracle` on seeded random cases and reports the largest error
//! seen.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use qgp_core::bayesopt::expected_improvement;
use qgp_core::featuremap::{FeatureMapFamily, FeatureMapSpec, ParamVector};
use qgp_core::gp::{self, Kernel, QuantumKernel, RbfKernel};
use qgp_core::qkernel::{self, GramMatrix, QuantumKernelConfig, SYMMETRY_TOLERANCE};
use qgp_core::rng;
use qgp_core::simulator::{self, Circuit, GateOp};
use qgp_core::Point;
use qgp_oracle::{dense, gp as dense_gp, linalg, stats};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::BenchmarkSettings;
use crate::CliError;

const SIMULATOR_TOL: f64 = 1e-8;
const GP_TOL: f64 = 1e-8;
const EI_STANDARD_ERRORS: f64 = 3.0;
const CUTOFF_TOL: f64 = 1e-10;
const PROJECTION_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;
const SLOPE: (f64, f64) = (-0.65, -0.35);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Names of the violated invariants.
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl BenchmarkReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.name == name)
    }
}

struct Suite {
    report: SuiteReport,
}

impl Suite {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            report: SuiteReport {
                name: name.into(),
                passed: true,
                cases: 0,
                max_error: 0.0,
                tolerance,
                failures: Vec::new(),
            },
        }
    }

    /// Record one case against the suite tolerance.
    fn case(&mut self, invariant: &str, error: f64) {
        self.case_with(invariant, error, error <= self.report.tolerance);
    }

    fn case_with(&mut self, invariant: &str, error: f64, ok: bool) {
        self.report.cases += 1;
        if error.is_nan() || !ok {
            self.fail(invariant);
        }
        self.report.max_error = self.report.max_error.max(error);
    }

    fn fail(&mut self, invariant: &str) {
        self.report.passed = false;
        if !self.report.failures.iter().any(|f| f == invariant) {
            self.report.failures.push(invariant.to_string());
        }
    }

    fn finish(self) -> SuiteReport {
        self.report
    }
}

fn random_circuit(q: usize, len: usize, r: &mut ChaCha8Rng) -> Circuit {
    let ops = (0..len)
        .map(|_| {
            let target = r.random_range(0..q);
            let angle = r.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
            match r.random_range(0..if q > 1 { 5 } else { 4 }) {
                0 => GateOp::Rx { target, angle },
                1 => GateOp::Ry { target, angle },
                2 => GateOp::Rz { target, angle },
                3 => GateOp::H { target },
                _ => {
                    let control = (target + r.random_range(1..q)) % q;
                    GateOp::Cnot { control, target }
                }
            }
        })
        .collect();
    Circuit::from_ops(q, ops).expect("valid random circuit")
}

/// Statevector simulation against explicit `2^q x 2^q` unitaries.
pub fn simulator_suite(cases: usize, seed: u64) -> Result<SuiteReport, CliError> {
    let mut s = Suite::new("simulator", SIMULATOR_TOL);
    let mut r = rng::rng_from(seed, &[1]);
    for c in 0..cases {
        let q = 1 + c % 4;
        let circuit = random_circuit(q, 5 + r.random_range(0..20), &mut r);
        let fast = simulator::run_circuit(&circuit)?;
        let slow = dense::circuit_state(&circuit);
        let err = fast
            .amplitudes()
            .iter()
            .zip(slow.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        s.case("statevector_matches_dense_unitary", err);
        let back = simulator::run_circuit(&circuit.then(&circuit.inverse())?)?;
        s.case(
            "inverse_restores_ground_state",
            (1.0 - back.ground_state_probability()).abs(),
        );
        s.case("norm_preserved", (fast.norm_sqr() - 1.0).abs());
    }
    Ok(s.finish())
}

fn random_points(n: usize, d: usize, r: &mut ChaCha8Rng) -> Vec<Point> {
    (0..n)
        .map(|_| (0..d).map(|_| r.random_range(-1.0..=1.0)).collect())
        .collect()
}

fn max_abs<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Cholesky-based posterior and likelihood against an explicit inverse.
pub fn gp_suite(cases: usize, seed: u64) -> Result<SuiteReport, CliError> {
    let mut s = Suite::new("gp", GP_TOL);
    let mut r = rng::rng_from(seed, &[2]);
    for c in 0..cases {
        let n = 1 + c % 6;
        let m = 1 + r.random_range(0..4);
        let d = 1 + r.random_range(0..2);
        let x = random_points(n, d, &mut r);
        let xs = random_points(m, d, &mut r);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..=1.0)).collect();
        let noise = 10f64.powf(r.random_range(-3.0..-0.5));
        let kernel: Arc<dyn Kernel> = if c % 2 == 0 {
            Arc::new(RbfKernel::new(r.random_range(0.3..2.0), r.random_range(0.5..2.0))?)
        } else {
            let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 3, 1, d)?;
            let theta = ParamVector::random(spec.num_params(), &mut r);
            Arc::new(QuantumKernel::new(QuantumKernelConfig::exact(spec, theta))?)
        };
        let model = gp::fit(kernel.clone(), &x, &y, noise)?;
        let post = model.predict(&xs)?;
        let k = kernel.train_gram(&x)?.entries;
        let oracle = dense_gp::posterior(
            &k,
            &kernel.cross(&x, &xs)?,
            &kernel.test_gram(&xs)?,
            &DVector::from_column_slice(&y),
            noise + model.jitter(),
        );
        s.case(
            "alpha_matches_dense_inverse",
            max_abs(model.alpha().iter(), oracle.alpha.iter()),
        );
        s.case(
            "mean_matches_dense_inverse",
            max_abs(post.mean.iter(), oracle.mean.iter()),
        );
        s.case("cov_matches_dense_inverse", max_abs(post.cov.iter(), oracle.cov.iter()));
        s.case(
            "log_likelihood_matches_dense_determinant",
            (model.log_marginal_likelihood() - oracle.log_likelihood).abs(),
        );
        let prior = kernel.diag(&xs)?;
        let excess = post
            .cov
            .diagonal()
            .iter()
            .zip(&prior)
            .map(|(v, p)| (v - p).max(0.0))
            .fold(0.0, f64::max);
        s.case("posterior_variance_below_prior", excess);
    }
    Ok(s.finish())
}

/// Closed-form expected improvement against Monte-Carlo integration. The
/// error is expressed in Monte-Carlo standard errors.
pub fn ei_suite(cases: usize, samples: usize, seed: u64) -> Result<SuiteReport, CliError> {
    let mut s = Suite::new("ei", EI_STANDARD_ERRORS);
    let mut r = rng::rng_from(seed, &[3]);
    for c in 0..cases {
        let mu = r.random_range(-2.0..2.0);
        let sigma = r.random_range(0.05..2.0);
        let lambda = r.random_range(0.0..0.5);
        // standardized gap; deep tails would leave Monte Carlo without hits
        let z: f64 = r.random_range(-3.0..2.0);
        let best = mu + lambda + z * sigma;
        let closed = expected_improvement(mu, sigma, best, lambda)?;
        let (mc, se) =
            stats::expected_improvement_mc(mu, sigma, best, lambda, samples, rng::derive_seed(seed, &[3, c as u64]));
        let z = if se > 0.0 {
            (closed - mc).abs() / se
        } else if closed == mc {
            0.0
        } else {
            f64::INFINITY
        };
        s.case("ei_matches_monte_carlo", z);
    }
    Ok(s.finish())
}

fn random_symmetric(n: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

/// Eigenvalue cutoff against the hand-computed 2x2 case, idempotence, and the
/// optimality conditions of the nearest-PSD projection.
pub fn cutoff_suite(matrix_cases: usize, seed: u64) -> Result<SuiteReport, CliError> {
    let mut s = Suite::new("cutoff", CUTOFF_TOL);
    let g = GramMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[1.0, 1.1, 1.1, 1.0]), true);
    let out = qkernel::regularize_cutoff(&g)?;
    let expected = DMatrix::from_element(2, 2, 1.05);
    s.case("hand_computed_2x2_entries", (&out.entries - expected).amax());
    s.case("hand_computed_2x2_clipped_mass", (out.clipped_mass - 0.1).abs());

    let mut r = rng::rng_from(seed, &[4]);
    for c in 0..matrix_cases {
        let a = random_symmetric(2 + c % 7, &mut r);
        let once = qkernel::regularize_cutoff(&GramMatrix::from_entries(a.clone(), true))?;
        let twice = qkernel::regularize_cutoff(&once)?;
        s.case("idempotent", (&twice.entries - &once.entries).amax());
        if a.nrows() == 3 {
            let oracle = linalg::psd_projection(&a);
            let err = (&once.entries - oracle).amax();
            s.case_with("nearest_psd_projection", err, err <= PROJECTION_TOL);
            let kkt = linalg::projection_kkt_violation(&a, &once.entries);
            s.case_with("projection_optimality", kkt, kkt <= PROJECTION_TOL);
        }
    }
    Ok(s.finish())
}

/// Gram-matrix statistics: symmetry, PSD of exact Grams, and the
/// shot-noise convergence rate. `asymmetry` is the fault-injection hook.
pub fn kernel_suite(cases: usize, asymmetry: f64, seed: u64) -> Result<SuiteReport, CliError> {
    let mut s = Suite::new("kernel", PSD_TOL);
    let mut r = rng::rng_from(seed, &[5]);
    for c in 0..cases {
        let d = 1 + c % 3;
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 2 + c % 3, 1 + c % 2, d)?;
        let theta = ParamVector::random(spec.num_params(), &mut r);
        let x = random_points(8 + c % 8, d, &mut r);
        let cfg = QuantumKernelConfig::exact(spec, theta);
        let mut g = qkernel::gram(&x, None, &cfg)?.entries;
        if c == 0 {
            g[(0, 1)] += asymmetry;
        }
        let asym = (&g - g.transpose()).amax();
        s.case_with("gram_symmetry", asym, asym <= SYMMETRY_TOLERANCE);
        let neg = (-linalg::min_eigenvalue(&g)).max(0.0);
        s.case("exact_gram_psd", neg);
    }

    let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 3, 2, 1)?;
    let theta = ParamVector::random(spec.num_params(), &mut r);
    let x = random_points(12, 1, &mut r);
    let exact = qkernel::gram(&x, None, &QuantumKernelConfig::exact(spec, theta.clone()))?.entries;
    let shots = [100.0, 1e4, 1e6];
    let errors: Vec<f64> = shots
        .iter()
        .map(|&n| {
            let cfg =
                QuantumKernelConfig::sampled(spec, theta.clone(), n as u64, rng::derive_seed(seed, &[5, n as u64]));
            qkernel::gram(&x, None, &cfg)
                .map(|g| ((g.entries - &exact).norm_squared() / (x.len() * x.len()) as f64).sqrt())
        })
        .collect::<Result<_, _>>()?;
    let slope = stats::log_log_slope(&shots, &errors);
    s.case_with(
        "shot_error_rate",
        (slope + 0.5).abs(),
        (SLOPE.0..=SLOPE.1).contains(&slope),
    );
    Ok(s.finish())
}

pub fn run(settings: &BenchmarkSettings, seed: u64) -> Result<BenchmarkReport, CliError> {
    let suites = vec![
        simulator_suite(settings.cases, seed)?,
        gp_suite(settings.cases, seed)?,
        ei_suite(settings.cases, settings.ei_samples, seed)?,
        cutoff_suite(settings.matrix_cases, seed)?,
        kernel_suite(settings.cases, settings.gram_asymmetry, seed)?,
    ];
    Ok(BenchmarkReport {
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}
