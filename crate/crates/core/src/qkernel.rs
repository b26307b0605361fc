//! Fidelity quantum kernels `k(x, x') = |<phi(x')|phi(x)>|^2`.
//!
//! Exact kernels come straight from simulated statevectors. Sampled kernels
//! estimate the same quantity as the all-zeros frequency of `U(x')^dagger U(x)`
//! over a finite number of shots, each Gram entry drawing from its own seed
//! derived from `(master_seed, block, i, j)`.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{self, FeatureMapSpec, ParamVector};
use crate::rng::{self, stream};
use crate::simulator::{self, StateVector};
use crate::Point;

/// Eigenvalues above this (and below zero) are numerical zeros: clipped but
/// not counted in `clipped_mass`.
pub const NEGLIGIBLE_EIGENVALUE: f64 = 1e-10;

/// Absolute asymmetry tolerated by [`regularize_cutoff`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_SHOTS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum KernelMode {
    Exact,
    Sampled,
}

impl fmt::Display for KernelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelMode::Exact => "EXACT",
            KernelMode::Sampled => "SAMPLED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumKernelConfig {
    pub spec: FeatureMapSpec,
    pub theta: ParamVector,
    pub mode: KernelMode,
    /// Measurements per kernel entry; ignored in EXACT mode.
    pub shots: u64,
    pub master_seed: u64,
}

impl QuantumKernelConfig {
    pub fn exact(spec: FeatureMapSpec, theta: ParamVector) -> Self {
        Self {
            spec,
            theta,
            mode: KernelMode::Exact,
            shots: 0,
            master_seed: 0,
        }
    }

    pub fn sampled(spec: FeatureMapSpec, theta: ParamVector, shots: u64, master_seed: u64) -> Self {
        Self {
            spec,
            theta,
            mode: KernelMode::Sampled,
            shots,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.theta.len() != self.spec.num_params() {
            return Err(Error::invalid(format!(
                "theta has {} entries, feature map needs {}",
                self.theta.len(),
                self.spec.num_params()
            )));
        }
        if self.mode == KernelMode::Sampled && self.shots == 0 {
            return Err(Error::invalid("SAMPLED kernels need shots >= 1"));
        }
        Ok(())
    }

    /// Upper bound on entries: `1 + 2/sqrt(shots)` sampled, `1 + 1e-10` exact.
    pub fn entry_tolerance(&self) -> f64 {
        match self.mode {
            KernelMode::Exact => 1e-10,
            KernelMode::Sampled => 2.0 / (self.shots as f64).sqrt(),
        }
    }

    pub fn with_theta(&self, theta: ParamVector) -> Self {
        Self { theta, ..self.clone() }
    }

    /// Statevector `|phi(x; theta)>`.
    pub fn state(&self, x: &[f64]) -> Result<StateVector> {
        simulator::run_circuit(&featuremap::build(&self.spec, &self.theta, x)?)
    }

    fn states(&self, points: &[Point]) -> Result<Vec<StateVector>> {
        points.iter().map(|x| self.state(x)).collect()
    }
}

fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(simulator::inner_product(a, b)?.norm_sqr().min(1.0))
}

/// Exact fidelity kernel between two scaled points.
pub fn kernel_exact(x: &[f64], x2: &[f64], cfg: &QuantumKernelConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.mode != KernelMode::Exact {
        return Err(Error::invalid("kernel_exact called with a SAMPLED config"));
    }
    fidelity(&cfg.state(x2)?, &cfg.state(x)?)
}

/// Seed for the shot draw of one kernel evaluation.
fn shot_seed(master_seed: u64, entry_seed: u64) -> u64 {
    rng::derive_seed(master_seed, &[entry_seed])
}

/// Entry seed of Gram entry `(i, j)` in the given block.
pub fn entry_seed(block: u64, i: usize, j: usize) -> u64 {
    rng::derive_seed(block, &[i as u64, j as u64])
}

/// Shot-sampled fidelity kernel: runs `U(x')^dagger U(x)` and measures the
/// all-zeros frequency over `cfg.shots` shots.
pub fn kernel_sampled(x: &[f64], x2: &[f64], cfg: &QuantumKernelConfig, entry_seed: u64) -> Result<f64> {
    cfg.validate()?;
    if cfg.mode != KernelMode::Sampled {
        return Err(Error::invalid("kernel_sampled called with an EXACT config"));
    }
    let forward = featuremap::build(&cfg.spec, &cfg.theta, x)?;
    let backward = featuremap::build(&cfg.spec, &cfg.theta, x2)?.inverse();
    let state = simulator::run_circuit(&forward.then(&backward)?)?;
    simulator::sample_ground_state_prob(&state, cfg.shots, shot_seed(cfg.master_seed, entry_seed))
}

/// Kernel matrix with provenance needed to interpret it.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub symmetric: bool,
    pub regularized: bool,
    /// Sum of |negative eigenvalues| removed by regularization.
    pub clipped_mass: f64,
    pub mode: KernelMode,
    pub shots: u64,
}

impl GramMatrix {
    /// Wrap a plain matrix (e.g. from a classical kernel).
    pub fn from_entries(entries: DMatrix<f64>, symmetric: bool) -> Self {
        Self {
            entries,
            symmetric,
            regularized: false,
            clipped_mass: 0.0,
            mode: KernelMode::Exact,
            shots: 0,
        }
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.min()
    }

    /// Row-major CSV: a header row `n,m,mode,shots,clipped_mass`, its values,
    /// then `n` rows of `m` entries.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,m,mode,shots,clipped_mass")?;
        writeln!(
            w,
            "{},{},{},{},{:e}",
            self.nrows(),
            self.ncols(),
            self.mode,
            self.shots,
            self.clipped_mass
        )?;
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: &str| Error::invalid(format!("malformed Gram CSV: {msg}"));
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))??;
        if header.trim() != "n,m,mode,shots,clipped_mass" {
            return Err(bad("unexpected header"));
        }
        let meta = lines.next().ok_or_else(|| bad("missing metadata"))??;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(bad("metadata needs 5 fields"));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimension"));
        let (n, m) = (parse_usize(fields[0])?, parse_usize(fields[1])?);
        let mode = match fields[2] {
            "EXACT" => KernelMode::Exact,
            "SAMPLED" => KernelMode::Sampled,
            _ => return Err(bad("bad mode")),
        };
        let shots = fields[3].parse::<u64>().map_err(|_| bad("bad shots"))?;
        let clipped_mass = fields[4].parse::<f64>().map_err(|_| bad("bad clipped_mass"))?;
        let mut values = Vec::with_capacity(n * m);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("too few rows"))??;
            let row: Vec<f64> = line
                .trim()
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad entry")))
                .collect::<Result<_>>()?;
            if row.len() != m {
                return Err(bad("ragged row"));
            }
            values.extend(row);
        }
        let entries = DMatrix::from_row_slice(n, m, &values);
        let symmetric = n == m && entries == entries.transpose();
        Ok(Self {
            entries,
            symmetric,
            regularized: clipped_mass > 0.0,
            clipped_mass,
            mode,
            shots,
        })
    }
}

/// Kernel matrix between `x` and `x2`; `None` means `x2 = x`.
///
/// For `x2 = None` only the upper triangle is evaluated and mirrored, and the
/// diagonal is exactly 1.
pub fn gram(x: &[Point], x2: Option<&[Point]>, cfg: &QuantumKernelConfig) -> Result<GramMatrix> {
    cfg.validate()?;
    if x.is_empty() || x2.is_some_and(|p| p.is_empty()) {
        return Err(Error::invalid("Gram matrix of an empty point set"));
    }
    let left = cfg.states(x)?;
    let entry = |i: usize, j: usize, a: &StateVector, b: &StateVector, block: u64| -> Result<f64> {
        let p = fidelity(b, a)?;
        match cfg.mode {
            KernelMode::Exact => Ok(p),
            KernelMode::Sampled => {
                simulator::estimate_from_probability(p, cfg.shots, shot_seed(cfg.master_seed, entry_seed(block, i, j)))
            }
        }
    };

    let entries = match x2 {
        None => {
            let n = left.len();
            let mut k = DMatrix::<f64>::identity(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let v = entry(i, j, &left[i], &left[j], stream::GRAM_SAME)?;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            k
        }
        Some(x2) => {
            let right = cfg.states(x2)?;
            let mut k = DMatrix::<f64>::zeros(left.len(), right.len());
            for (i, a) in left.iter().enumerate() {
                for (j, b) in right.iter().enumerate() {
                    k[(i, j)] = entry(i, j, a, b, stream::GRAM_CROSS)?;
                }
            }
            k
        }
    };
    Ok(GramMatrix {
        entries,
        symmetric: x2.is_none(),
        regularized: false,
        clipped_mass: 0.0,
        mode: cfg.mode,
        shots: if cfg.mode == KernelMode::Sampled { cfg.shots } else { 0 },
    })
}

/// Project a symmetric Gram matrix onto the PSD cone by zeroing its negative
/// eigenvalues.
pub fn regularize_cutoff(g: &GramMatrix) -> Result<GramMatrix> {
    let a = &g.entries;
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "cannot regularize a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = (a - a.transpose()).amax();
    if !(asym <= SYMMETRY_TOLERANCE) {
        return Err(Error::invalid(format!(
            "Gram matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    let eig = SymmetricEigen::new(a.clone());
    let clipped_mass: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l <= -NEGLIGIBLE_EIGENVALUE)
        .map(|l| -l)
        .sum();
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    let entries = (&rebuilt + rebuilt.transpose()) * 0.5;
    Ok(GramMatrix {
        entries,
        symmetric: true,
        regularized: true,
        clipped_mass: g.clipped_mass + clipped_mass,
        mode: g.mode,
        shots: g.shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featuremap::FeatureMapFamily;
    use nalgebra::dmatrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(q: usize, l: usize, d: usize, seed: u64) -> QuantumKernelConfig {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, q, l, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QuantumKernelConfig::exact(spec, ParamVector::random(spec.num_params(), &mut rng))
    }

    fn points(n: usize, d: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect()
    }

    #[test]
    fn self_kernel_is_one() {
        let cfg = config(3, 2, 1, 1);
        assert!((kernel_exact(&[0.3], &[0.3], &cfg).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exact_kernel_is_symmetric() {
        let cfg = config(3, 2, 2, 2);
        let (a, b) = ([0.1, -0.7], [0.9, 0.2]);
        let kab = kernel_exact(&a, &b, &cfg).unwrap();
        let kba = kernel_exact(&b, &a, &cfg).unwrap();
        assert!((kab - kba).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&kab));
    }

    #[test]
    fn exact_kernel_matches_density_matrix_trace() {
        let cfg = config(3, 2, 1, 3);
        let (x, y) = ([0.25], [-0.6]);
        let rho = |s: &StateVector| {
            let a = s.amplitudes();
            DMatrix::<Complex64>::from_fn(8, 8, |i, j| a[i] * a[j].conj())
        };
        let rx = rho(&cfg.state(&x).unwrap());
        let ry = rho(&cfg.state(&y).unwrap());
        let trace = (rx * ry).trace();
        assert!(trace.im.abs() < 1e-12);
        assert!((kernel_exact(&x, &y, &cfg).unwrap() - trace.re).abs() < 1e-12);
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let cfg = config(2, 1, 1, 0);
        assert!(kernel_sampled(&[0.0], &[0.1], &cfg, 0).is_err());
        let sampled = QuantumKernelConfig {
            mode: KernelMode::Sampled,
            shots: 10,
            ..cfg.clone()
        };
        assert!(kernel_exact(&[0.0], &[0.1], &sampled).is_err());
        let no_shots = QuantumKernelConfig { shots: 0, ..sampled };
        assert!(no_shots.validate().is_err());
    }

    #[test]
    fn sampled_self_kernel_is_exactly_one() {
        let cfg = config(4, 2, 1, 4);
        let s = QuantumKernelConfig {
            mode: KernelMode::Sampled,
            shots: 10_000,
            master_seed: 9,
            ..cfg
        };
        assert_eq!(kernel_sampled(&[0.42], &[0.42], &s, 17).unwrap(), 1.0);
    }

    #[test]
    fn single_shot_is_bernoulli() {
        let cfg = config(2, 1, 1, 5);
        let k = kernel_exact(&[0.9], &[-0.8], &cfg).unwrap();
        assert!(k > 0.0 && k < 1.0);
        let s = QuantumKernelConfig {
            mode: KernelMode::Sampled,
            shots: 1,
            master_seed: 1,
            ..cfg
        };
        for seed in 0..20 {
            let v = kernel_sampled(&[0.9], &[-0.8], &s, seed).unwrap();
            assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn sampled_within_binomial_band() {
        let cfg = config(3, 2, 1, 6);
        let (x, y) = ([0.1], [0.5]);
        let k = kernel_exact(&x, &y, &cfg).unwrap();
        let shots = 10_000u64;
        let band = 3.0 * (k * (1.0 - k) / shots as f64).sqrt();
        let s = QuantumKernelConfig {
            mode: KernelMode::Sampled,
            shots,
            master_seed: 3,
            ..cfg
        };
        let inside = (0..300)
            .filter(|&seed| (kernel_sampled(&x, &y, &s, seed).unwrap() - k).abs() <= band)
            .count();
        // a 3-sigma band holds ~99.7% of draws
        assert!(inside >= 294, "{inside}/300");
    }

    #[test]
    fn gram_single_point() {
        let cfg = config(2, 1, 1, 7);
        let g = gram(&[vec![0.3]], None, &cfg).unwrap();
        assert_eq!(g.entries, dmatrix![1.0]);
        assert!(g.symmetric);
    }

    #[test]
    fn gram_matches_elementwise_kernel() {
        let cfg = config(2, 2, 1, 8);
        let x = points(3, 1, 8);
        let g = gram(&x, None, &cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let k = kernel_exact(&x[i], &x[j], &cfg).unwrap();
                assert!((g.entries[(i, j)] - k).abs() < 1e-12);
            }
        }
        let y = points(2, 1, 9);
        let c = gram(&x, Some(&y), &cfg).unwrap();
        assert_eq!((c.nrows(), c.ncols()), (3, 2));
        for i in 0..3 {
            for j in 0..2 {
                assert!((c.entries[(i, j)] - kernel_exact(&x[i], &y[j], &cfg).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_gram_is_symmetric_and_deterministic() {
        let base = config(3, 2, 1, 10);
        let cfg = QuantumKernelConfig {
            mode: KernelMode::Sampled,
            shots: 100,
            master_seed: 5,
            ..base
        };
        let x = points(6, 1, 10);
        let g = gram(&x, None, &cfg).unwrap();
        assert_eq!(g.entries, g.entries.transpose());
        for i in 0..6 {
            assert_eq!(g.entries[(i, i)], 1.0);
        }
        assert_eq!(gram(&x, None, &cfg).unwrap(), g);
        let eps = cfg.entry_tolerance();
        assert!(g.entries.iter().all(|&v| (0.0..=1.0 + eps).contains(&v)));
    }

    #[test]
    fn empty_gram_is_rejected() {
        let cfg = config(2, 1, 1, 0);
        assert!(gram(&[], None, &cfg).is_err());
        assert!(gram(&[vec![0.0]], Some(&[]), &cfg).is_err());
    }

    #[test]
    fn cutoff_hand_computed_case() {
        let g = GramMatrix::from_entries(dmatrix![1.0, 1.1; 1.1, 1.0], true);
        let r = regularize_cutoff(&g).unwrap();
        let expected = dmatrix![1.05, 1.05; 1.05, 1.05];
        assert!((r.entries - expected).amax() < 1e-10);
        assert!((r.clipped_mass - 0.1).abs() < 1e-10);
        assert!(r.regularized);
    }

    #[test]
    fn cutoff_leaves_psd_untouched() {
        let g = GramMatrix::from_entries(dmatrix![1.0, 0.9; 0.9, 1.0], true);
        let r = regularize_cutoff(&g).unwrap();
        assert!((&r.entries - &g.entries).amax() < 1e-10);
        assert_eq!(r.clipped_mass, 0.0);
    }

    #[test]
    fn cutoff_rejects_asymmetric() {
        let g = GramMatrix::from_entries(dmatrix![1.0, 0.5; 0.4, 1.0], false);
        assert!(matches!(regularize_cutoff(&g), Err(Error::InvalidArgument(_))));
        let r = GramMatrix::from_entries(DMatrix::zeros(2, 3), false);
        assert!(regularize_cutoff(&r).is_err());
    }

    #[test]
    fn cutoff_frobenius_distance_is_clipped_spectrum() {
        let g = GramMatrix::from_entries(dmatrix![1.0, 0.2, 0.9; 0.2, -0.3, 0.5; 0.9, 0.5, 0.1], true);
        let eig = SymmetricEigen::new(g.entries.clone()).eigenvalues;
        let expected: f64 = eig.iter().filter(|&&l| l < 0.0).map(|l| l * l).sum::<f64>().sqrt();
        let r = regularize_cutoff(&g).unwrap();
        assert!(((&r.entries - &g.entries).norm() - expected).abs() < 1e-10);
    }

    #[test]
    fn csv_round_trip() {
        let base = config(2, 1, 1, 11);
        let cfg = QuantumKernelConfig {
            mode: KernelMode::Sampled,
            shots: 50,
            master_seed: 2,
            ..base
        };
        let g = regularize_cutoff(&gram(&points(4, 1, 11), None, &cfg).unwrap()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,m,mode,shots,clipped_mass\n4,4,SAMPLED,50,"));
        let back = GramMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.entries, g.entries);
        assert_eq!(back.shots, 50);
        assert_eq!(back.clipped_mass, g.clipped_mass);
    }
}
