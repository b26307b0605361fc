//! Dense statevector simulation.
//!
//! Basis states are indexed little-endian: qubit `k` is bit `k` of the
//! amplitude index, so qubit 0 is the least significant bit.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum GateOp {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    H { target: usize },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn target(&self) -> usize {
        match *self {
            GateOp::Rx { target, .. }
            | GateOp::Ry { target, .. }
            | GateOp::Rz { target, .. }
            | GateOp::H { target }
            | GateOp::Cnot { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            GateOp::Cnot { control, .. } => Some(control),
            _ => None,
        }
    }

    /// The gate undoing `self`. H and CNOT are self-inverse; rotations negate.
    pub fn inverse(&self) -> GateOp {
        match *self {
            GateOp::Rx { target, angle } => GateOp::Rx { target, angle: -angle },
            GateOp::Ry { target, angle } => GateOp::Ry { target, angle: -angle },
            GateOp::Rz { target, angle } => GateOp::Rz { target, angle: -angle },
            op @ (GateOp::H { .. } | GateOp::Cnot { .. }) => op,
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let target = self.target();
        if target >= num_qubits {
            return Err(Error::InvalidGate(format!(
                "target {target} out of range for {num_qubits} qubits"
            )));
        }
        if let Some(control) = self.control() {
            if control >= num_qubits {
                return Err(Error::InvalidGate(format!(
                    "control {control} out of range for {num_qubits} qubits"
                )));
            }
            if control == target {
                return Err(Error::InvalidGate(format!(
                    "control and target coincide on qubit {target}"
                )));
            }
        }
        if let GateOp::Rx { angle, .. } | GateOp::Ry { angle, .. } | GateOp::Rz { angle, .. } = self {
            if !angle.is_finite() {
                return Err(Error::InvalidGate(format!("non-finite rotation angle {angle}")));
            }
        }
        Ok(())
    }

    /// Dense 2x2 matrix `[[m00, m01], [m10, m11]]` of a single-qubit gate.
    pub fn single_qubit_matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        let re = |v: f64| Complex64::new(v, 0.0);
        match *self {
            GateOp::Rx { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let mis = Complex64::new(0.0, -s);
                Some([[re(c), mis], [mis, re(c)]])
            }
            GateOp::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                Some([[re(c), re(-s)], [re(s), re(c)]])
            }
            GateOp::Rz { angle, .. } => {
                let half = angle / 2.0;
                Some([
                    [Complex64::from_polar(1.0, -half), ZERO],
                    [ZERO, Complex64::from_polar(1.0, half)],
                ])
            }
            GateOp::H { .. } => {
                let h = re(FRAC_1_SQRT_2);
                Some([[h, h], [h, -h]])
            }
            GateOp::Cnot { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// The all-zeros state `|0...0>`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count must lie in [1, {MAX_QUBITS}], got {num_qubits}"
            )));
        }
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, num_qubits })
    }

    /// Wrap raw amplitudes. The length must be a power of two; the caller is
    /// responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!("{num_qubits} qubits exceeds {MAX_QUBITS}")));
        }
        Ok(Self { amplitudes, num_qubits })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability of measuring the all-zeros outcome.
    pub fn ground_state_probability(&self) -> f64 {
        self.amplitudes[0].norm_sqr()
    }

    /// Apply `op` in place.
    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        op.validate(self.num_qubits)?;
        match *op {
            GateOp::Cnot { control, target } => {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                for i in 0..self.amplitudes.len() {
                    if i & cbit != 0 && i & tbit == 0 {
                        self.amplitudes.swap(i, i | tbit);
                    }
                }
            }
            _ => {
                let m = op.single_qubit_matrix().expect("single-qubit gate");
                let tbit = 1usize << op.target();
                for i in 0..self.amplitudes.len() {
                    if i & tbit == 0 {
                        let j = i | tbit;
                        let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
                        self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                        self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Return `state` transformed by the unitary of `op`.
pub fn apply_gate(state: &StateVector, op: &GateOp) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(op)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count must lie in [1, {MAX_QUBITS}], got {num_qubits}"
            )));
        }
        Ok(Self {
            num_qubits,
            ops: Vec::new(),
        })
    }

    pub fn from_ops(num_qubits: usize, ops: Vec<GateOp>) -> Result<Self> {
        let mut circuit = Self::new(num_qubits)?;
        for op in ops {
            circuit.push(op)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        op.validate(self.num_qubits)?;
        self.ops.push(op);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    /// `U†`: reversed op list with each gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            ops: self.ops.iter().rev().map(GateOp::inverse).collect(),
        }
    }

    /// The circuit applying `self` first and then `next`.
    pub fn then(&self, next: &Circuit) -> Result<Circuit> {
        if self.num_qubits != next.num_qubits {
            return Err(Error::invalid(format!(
                "cannot compose circuits on {} and {} qubits",
                self.num_qubits, next.num_qubits
            )));
        }
        let mut ops = self.ops.clone();
        ops.extend_from_slice(&next.ops);
        Ok(Circuit {
            num_qubits: self.num_qubits,
            ops,
        })
    }
}

/// Run `circuit` on `|0...0>`.
pub fn run_circuit(circuit: &Circuit) -> Result<StateVector> {
    let mut state = StateVector::zero(circuit.num_qubits)?;
    for op in &circuit.ops {
        state.apply(op)?;
    }
    Ok(state)
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.num_qubits != b.num_qubits {
        return Err(Error::invalid(format!(
            "inner product of {}-qubit and {}-qubit states",
            a.num_qubits, b.num_qubits
        )));
    }
    Ok(a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum())
}

/// Estimate the all-zeros outcome probability from `shots` measurements.
///
/// Only the all-zeros count is observed, so the count over `shots`
/// independent basis-state draws is Binomial(shots, |a_0|^2) and is drawn
/// directly from that law.
pub fn sample_ground_state_prob(state: &StateVector, shots: u64, seed: u64) -> Result<f64> {
    estimate_from_probability(state.ground_state_probability(), shots, seed)
}

/// Shot-noise estimate of a Bernoulli probability `p`.
pub(crate) fn estimate_from_probability(p: f64, shots: u64, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    let p = p.clamp(0.0, 1.0);
    let mut rng = rng::rng_from(seed, &[rng::stream::SHOTS]);
    let count = Binomial::new(shots, p)
        .map_err(|e| Error::invalid(format!("binomial({shots}, {p}): {e}")))?
        .sample(&mut rng);
    Ok(count as f64 / shots as f64)
}
