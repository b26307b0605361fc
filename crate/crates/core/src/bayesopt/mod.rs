//! Bayesian optimization with expected improvement over GP or QGP
//! surrogates, plus random search and benchmark objectives.
//!
//! Every random choice in a run is drawn from a stream derived from the run
//! seed: initial samples, observation noise, feature-map angles, candidate
//! sets and restart points. Two strategies run with the same seed therefore
//! see identical initial observations.

mod acquisition;
pub mod objective;
pub mod strategy;
mod trace;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use acquisition::{expected_improvement, normal_cdf, normal_pdf, AcquisitionConfig, DEFAULT_CANDIDATES};
pub use objective::Objective;
pub use strategy::{SearchStrategy, StrategySettings, Surrogate};
pub use trace::{BoTrace, RunStatus, TraceRecord};

use crate::error::{Error, Result};
use crate::featuremap::{label_range, scale_inputs, scale_labels, ScalingSpec};
use crate::gp::GpModel;
use crate::rng::{self, stream};
use crate::Point;

/// Surrogate noise variance, in scaled label units, for objectives without a
/// declared noise level.
pub const DEFAULT_SCALED_NOISE_VAR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bounds(Vec<(f64, f64)>);

impl Bounds {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("bounds need at least one dimension"));
        }
        for (i, (lo, hi)) in ranges.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain(format!("bounds [{lo}, {hi}] for dimension {i}")));
            }
        }
        Ok(Self(ranges))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        self.0.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()
    }

    /// Input scaling onto `[-1, 1]^d` with the given label bounds.
    pub fn scaling(&self, label_lo: f64, label_hi: f64) -> Result<ScalingSpec> {
        ScalingSpec::new(
            self.0.iter().map(|r| r.0).collect(),
            self.0.iter().map(|r| r.1).collect(),
            label_lo,
            label_hi,
        )
    }

    pub fn to_unit(&self, x: &[f64]) -> Result<Point> {
        scale_inputs(x, &self.scaling(-1.0, 1.0)?)
    }
}

/// What is being optimized and with which budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub bounds: Bounds,
    pub n_init: usize,
    pub n_iter: usize,
    /// Standard deviation of Gaussian noise added to every observation.
    pub noise_std: f64,
    /// Noise variance handed to the surrogate in objective units; `None`
    /// uses [`DEFAULT_SCALED_NOISE_VAR`] in scaled units.
    pub surrogate_noise_var: Option<f64>,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(Error::invalid("n_init must be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if let Some(v) = self.surrogate_noise_var {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "surrogate noise variance must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Initial design shared by every strategy run with `seed`.
fn initial_design(bounds: &Bounds, n: usize, seed: u64) -> Vec<Point> {
    let mut r = rng::rng_from(seed, &[stream::INIT]);
    (0..n).map(|_| bounds.sample(&mut r)).collect()
}

/// Observe `objective` at `x` for the `k`-th evaluation of the run.
fn observe(objective: &mut dyn Objective, x: &[f64], k: usize, noise_std: f64, seed: u64) -> Result<f64> {
    let clean = objective.evaluate(x)?;
    let noise = if noise_std > 0.0 {
        let z: f64 = StandardNormal.sample(&mut rng::rng_from(seed, &[stream::NOISE, k as u64]));
        noise_std * z
    } else {
        0.0
    };
    let value = clean + noise;
    if !value.is_finite() {
        return Err(Error::Objective(format!("non-finite observation {value} at {x:?}")));
    }
    Ok(value)
}

/// Pick the candidate with the largest expected improvement.
///
/// `acq.lambda` is in the label units of `model`, and the incumbent is the
/// smallest training label. Ties and the all-zero case go to the lowest
/// candidate index.
pub fn propose_next(model: &GpModel, bounds: &Bounds, acq: &AcquisitionConfig, seed: u64) -> Result<Point> {
    acq.validate()?;
    let mut r = rng::rng_from(seed, &[stream::CANDIDATES]);
    let mut candidates: Vec<Point> = (0..acq.num_candidates).map(|_| bounds.sample(&mut r)).collect();
    if candidates.len() == 1 {
        return Ok(candidates.into_iter().next().expect("one candidate"));
    }
    let unit: Vec<Point> = candidates.iter().map(|c| bounds.to_unit(c)).collect::<Result<_>>()?;
    let post = model.predict_marginal(&unit)?;
    let best = model.y_train().min();
    let mut arg = 0;
    let mut top = f64::NEG_INFINITY;
    for (i, (mu, sigma)) in post.mean.iter().zip(&post.std).enumerate() {
        let ei = expected_improvement(*mu, *sigma, best, acq.lambda)?;
        if ei > top {
            top = ei;
            arg = i;
        }
    }
    Ok(candidates.swap_remove(arg))
}

/// Label scaling for the current observations; a constant history is widened
/// by one unit either side.
fn round_scaling(bounds: &Bounds, ys: &[f64]) -> Result<ScalingSpec> {
    let (lo, hi) = label_range(ys)?;
    if hi - lo > 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        bounds.scaling(lo, hi)
    } else {
        bounds.scaling(lo - 1.0, hi + 1.0)
    }
}

/// Run Bayesian optimization: `n_init` random observations, then `n_iter`
/// rounds of fit / propose / observe.
///
/// An objective failure ends the run early; the returned trace is then marked
/// [`RunStatus::Aborted`] and holds every observation made so far.
pub fn bo_run(
    objective: &mut dyn Objective,
    problem: &Problem,
    surrogate: &dyn Surrogate,
    acq: &AcquisitionConfig,
    seed: u64,
) -> Result<BoTrace> {
    problem.validate()?;
    acq.validate()?;
    check_objective_dim(objective, &problem.bounds)?;
    let config = json!({
        "surrogate": surrogate.describe(),
        "acquisition": acq,
        "problem": problem,
    });
    let mut trace = BoTrace::new(surrogate.name(), objective.name(), seed, config);

    let mut xs: Vec<Point> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for x in initial_design(&problem.bounds, problem.n_init, seed) {
        match observe(objective, &x, xs.len(), problem.noise_std, seed) {
            Ok(y) => {
                trace.push(0, x.clone(), y);
                xs.push(x);
                ys.push(y);
            }
            Err(e) => return Ok(abort(trace, e)),
        }
    }

    for round in 1..=problem.n_iter {
        let scaling = round_scaling(&problem.bounds, &ys)?;
        let y_scaled = scale_labels(&ys, &scaling)?;
        let x_unit: Vec<Point> = xs.iter().map(|x| problem.bounds.to_unit(x)).collect::<Result<_>>()?;
        let k = scaling.label_scale();
        let noise_var = match problem.surrogate_noise_var {
            Some(v) => v / (k * k),
            None => DEFAULT_SCALED_NOISE_VAR,
        };
        let ctx = strategy::RoundContext {
            run_seed: seed,
            round,
            input_dim: problem.bounds.dim(),
        };
        let model = surrogate.model(&x_unit, &y_scaled, noise_var, ctx)?;
        let scaled_acq = AcquisitionConfig {
            lambda: acq.lambda / k,
            ..*acq
        };
        let round_seed = rng::derive_seed(seed, &[round as u64]);
        let x = propose_next(&model, &problem.bounds, &scaled_acq, round_seed)?;
        match observe(objective, &x, xs.len(), problem.noise_std, seed) {
            Ok(y) => {
                trace.push(round, x.clone(), y);
                xs.push(x);
                ys.push(y);
            }
            Err(e) => return Ok(abort(trace, e)),
        }
    }
    Ok(trace)
}

/// Uniform random search over `n_total` evaluations. The first draws coincide
/// with the BO initial design for the same seed.
pub fn random_search(objective: &mut dyn Objective, problem: &Problem, n_total: usize, seed: u64) -> Result<BoTrace> {
    if n_total == 0 {
        return Err(Error::invalid("random search needs at least one evaluation"));
    }
    problem.validate()?;
    check_objective_dim(objective, &problem.bounds)?;
    let config = json!({"strategy": "random", "n_total": n_total, "problem": problem});
    let mut trace = BoTrace::new("random".into(), objective.name(), seed, config);
    for (k, x) in initial_design(&problem.bounds, n_total, seed).into_iter().enumerate() {
        let iteration = if k < problem.n_init { 0 } else { k + 1 - problem.n_init };
        match observe(objective, &x, k, problem.noise_std, seed) {
            Ok(y) => trace.push(iteration, x, y),
            Err(e) => return Ok(abort(trace, e)),
        }
    }
    Ok(trace)
}

fn check_objective_dim(objective: &dyn Objective, bounds: &Bounds) -> Result<()> {
    if objective.dim() != bounds.dim() {
        return Err(Error::invalid(format!(
            "objective '{}' has dimension {}, bounds have {}",
            objective.name(),
            objective.dim(),
            bounds.dim()
        )));
    }
    Ok(())
}

fn abort(mut trace: BoTrace, err: Error) -> BoTrace {
    let at = trace.records.len();
    trace.status = RunStatus::Aborted {
        reason: format!("evaluation {at}: {err}"),
    };
    trace
}

#[cfg(test)]
mod tests {
    use super::objective::{Branin, Quadratic};
    use super::strategy::{RbfSurrogate, StrategySettings};
    use super::*;
    use crate::gp::{fit, RbfKernel};
    use std::sync::Arc;

    fn problem(bounds: Bounds, n_init: usize, n_iter: usize) -> Problem {
        Problem {
            bounds,
            n_init,
            n_iter,
            noise_std: 0.0,
            surrogate_noise_var: None,
        }
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![]).is_err());
        assert!(Bounds::new(vec![(1.0, 1.0)]).is_err());
        let b = Bounds::new(vec![(-5.0, 10.0), (0.0, 15.0)]).unwrap();
        assert_eq!(b.to_unit(&[-5.0, 15.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn zero_iterations_keep_only_initial_design() {
        let mut obj = Quadratic { dim: 2 };
        let p = problem(obj.default_bounds().unwrap(), 4, 0);
        let t = bo_run(&mut obj, &p, &RbfSurrogate, &AcquisitionConfig::default(), 3).unwrap();
        assert_eq!(t.records.len(), 4);
        assert!(t.records.iter().all(|r| r.iteration == 0));
        assert!(t.is_completed());
    }

    #[test]
    fn single_candidate_is_returned() {
        let m = fit(Arc::new(RbfKernel::new(0.5, 1.0).unwrap()), &[vec![0.0]], &[0.0], 1e-4).unwrap();
        let b = Bounds::new(vec![(-1.0, 1.0)]).unwrap();
        let acq = AcquisitionConfig {
            lambda: 0.0,
            num_candidates: 1,
        };
        let expected = b.sample(&mut rng::rng_from(5, &[stream::CANDIDATES]));
        assert_eq!(propose_next(&m, &b, &acq, 5).unwrap(), expected);
    }

    #[test]
    fn proposals_are_deterministic_and_avoid_known_points() {
        let x = vec![vec![-0.5], vec![0.0], vec![0.5]];
        let m = fit(Arc::new(RbfKernel::new(0.3, 1.0).unwrap()), &x, &[1.0, -1.0, 1.0], 1e-6).unwrap();
        let b = Bounds::new(vec![(-1.0, 1.0)]).unwrap();
        let acq = AcquisitionConfig {
            lambda: 0.0,
            num_candidates: 256,
        };
        let p1 = propose_next(&m, &b, &acq, 9).unwrap();
        assert_eq!(p1, propose_next(&m, &b, &acq, 9).unwrap());
        // the minimum of the posterior mean sits near 0, the best sample
        assert!(p1[0].abs() < 0.4, "{p1:?}");
    }

    #[test]
    fn zero_variance_candidate_never_beats_positive_ei() {
        // a candidate sitting on a noiseless training point has sigma ~ 0 and mean far above best
        let x = vec![vec![-1.0], vec![1.0]];
        let m = fit(Arc::new(RbfKernel::new(0.2, 1.0).unwrap()), &x, &[-1.0, 1.0], 0.0).unwrap();
        let post = m.predict_marginal(&[vec![1.0], vec![0.0]]).unwrap();
        assert!(post.std[0] < 1e-4);
        let ei_flat = expected_improvement(post.mean[0], 0.0, -1.0, 0.0).unwrap();
        let ei_open = expected_improvement(post.mean[1], post.std[1], -1.0, 0.0).unwrap();
        assert_eq!(ei_flat, 0.0);
        assert!(ei_open > ei_flat);
    }

    #[test]
    fn quadratic_with_rbf_converges() {
        let mut obj = Quadratic { dim: 1 };
        let p = problem(obj.default_bounds().unwrap(), 3, 20);
        let t = bo_run(
            &mut obj,
            &p,
            &RbfSurrogate,
            &AcquisitionConfig {
                lambda: 0.0,
                num_candidates: 512,
            },
            1,
        )
        .unwrap();
        assert_eq!(t.records.len(), 23);
        // dense grid search puts the minimum at 0
        let grid_min = (0..=2000)
            .map(|i| (-1.0 + i as f64 / 1000.0).powi(2))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(grid_min, 0.0);
        assert!(t.best().unwrap() <= 0.01, "{:?}", t.best());
    }

    #[test]
    fn strategies_share_initial_observations() {
        let settings = StrategySettings {
            acquisition: AcquisitionConfig {
                lambda: 0.1,
                num_candidates: 64,
            },
            ..Default::default()
        };
        let p = Problem {
            noise_std: 0.5,
            surrogate_noise_var: Some(0.25),
            ..problem(Branin::default().default_bounds().unwrap(), 5, 2)
        };
        let mut traces = Vec::new();
        for name in ["qgp-exact", "rbf", "random"] {
            let s = strategy::lookup(name, &settings).unwrap();
            traces.push(s.run(&mut Branin::default(), &p, 77).unwrap());
        }
        for t in &traces[1..] {
            assert_eq!(t.records[..5], traces[0].records[..5]);
            assert_eq!(t.records.len(), 7);
        }
    }

    #[test]
    fn random_search_properties() {
        let mut obj = Branin::default();
        let p = problem(obj.default_bounds().unwrap(), 5, 0);
        let t = random_search(&mut obj, &p, 200, 4).unwrap();
        assert_eq!(t.records.len(), 200);
        assert!(t.records.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        assert_eq!(t, random_search(&mut obj, &p, 200, 4).unwrap());
        assert!(t.records[..5].iter().all(|r| r.iteration == 0));
        assert_eq!(t.records[5].iteration, 1);
        assert_eq!(t.records[199].iteration, 195);
    }

    #[test]
    fn dense_random_search_finds_branin_minimum() {
        let mut obj = Branin::default();
        let p = problem(obj.default_bounds().unwrap(), 1, 0);
        let t = random_search(&mut obj, &p, 10_000, 8).unwrap();
        assert!(t.best().unwrap() - objective::BRANIN_MINIMUM < 0.5);
    }

    #[test]
    fn non_finite_objective_aborts_with_trace() {
        struct Flaky(usize);
        impl Objective for Flaky {
            fn name(&self) -> String {
                "flaky".into()
            }
            fn dim(&self) -> usize {
                1
            }
            fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
                self.0 += 1;
                Ok(if self.0 == 5 { f64::NAN } else { x[0] })
            }
        }
        let p = problem(Bounds::new(vec![(0.0, 1.0)]).unwrap(), 3, 5);
        let t = bo_run(&mut Flaky(0), &p, &RbfSurrogate, &AcquisitionConfig::default(), 2).unwrap();
        assert_eq!(t.records.len(), 4);
        assert!(matches!(t.status, RunStatus::Aborted { .. }));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = problem(Bounds::new(vec![(0.0, 1.0)]).unwrap(), 3, 1);
        assert!(bo_run(
            &mut Branin::default(),
            &p,
            &RbfSurrogate,
            &AcquisitionConfig::default(),
            2
        )
        .is_err());
    }
}
