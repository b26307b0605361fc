//! Parameterized data-encoding circuits and the affine scalings feeding them.
//!
//! Two families are provided:
//!
//! - `CHEBYSHEV_HWE`: per layer, a trainable `RY(theta)` on every qubit, a
//!   data rotation `RY(arccos x_{j mod d})` on qubit `j`, then a linear CNOT
//!   chain `j -> j+1`. After `l` layers a final trainable `RY` layer is
//!   appended, giving `q * (l + 1)` parameters.
//! - `HWE_ALT`: per layer, `RY(theta_a * x_{j mod d})` followed by
//!   `RZ(theta_b)` on every qubit, then a CNOT ring. `2 * q * l` parameters.
//!
//! Features are assigned round-robin: qubit `j` encodes feature `j mod d`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{Circuit, GateOp};

/// Inputs outside `[-1, 1]` by at most this much are clamped silently.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureMapFamily {
    ChebyshevHwe,
    HweAlt,
}

impl FeatureMapFamily {
    pub const ALL: [FeatureMapFamily; 2] = [FeatureMapFamily::ChebyshevHwe, FeatureMapFamily::HweAlt];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMapFamily::ChebyshevHwe => "CHEBYSHEV_HWE",
            FeatureMapFamily::HweAlt => "HWE_ALT",
        }
    }

    /// The circuit layout implementing this family.
    pub fn layout(self) -> &'static dyn FeatureMapLayout {
        match self {
            FeatureMapFamily::ChebyshevHwe => &ChebyshevHwe,
            FeatureMapFamily::HweAlt => &HweAlt,
        }
    }
}

impl fmt::Display for FeatureMapFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMapFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        registry()
            .get(key.as_str())
            .copied()
            .ok_or_else(|| Error::UnknownComponent {
                kind: "feature map",
                name: s.to_string(),
                available: registry().keys().copied().collect::<Vec<_>>().join(", "),
            })
    }
}

/// Name-keyed registry of feature-map families.
pub fn registry() -> BTreeMap<&'static str, FeatureMapFamily> {
    FeatureMapFamily::ALL.iter().map(|f| (f.name(), *f)).collect()
}

/// A family of data-encoding circuits.
pub trait FeatureMapLayout: Send + Sync {
    fn num_params(&self, num_qubits: usize, num_layers: usize) -> usize;

    /// Append the gates of `U(x; theta)` to `circuit`. `x` is already scaled
    /// and validated; `theta` has the right length.
    fn encode(&self, circuit: &mut Circuit, num_layers: usize, theta: &[f64], x: &[f64]) -> Result<()>;
}

pub struct ChebyshevHwe;

impl FeatureMapLayout for ChebyshevHwe {
    fn num_params(&self, num_qubits: usize, num_layers: usize) -> usize {
        num_qubits * (num_layers + 1)
    }

    fn encode(&self, circuit: &mut Circuit, num_layers: usize, theta: &[f64], x: &[f64]) -> Result<()> {
        let q = circuit.num_qubits();
        let d = x.len();
        let mut params = theta.iter().copied();
        for _ in 0..num_layers {
            for j in 0..q {
                let angle = params.next().expect("theta length checked");
                circuit.push(GateOp::Ry { target: j, angle })?;
            }
            for j in 0..q {
                circuit.push(GateOp::Ry {
                    target: j,
                    angle: x[j % d].acos(),
                })?;
            }
            for j in 0..q.saturating_sub(1) {
                circuit.push(GateOp::Cnot {
                    control: j,
                    target: j + 1,
                })?;
            }
        }
        for j in 0..q {
            let angle = params.next().expect("theta length checked");
            circuit.push(GateOp::Ry { target: j, angle })?;
        }
        Ok(())
    }
}

pub struct HweAlt;

impl FeatureMapLayout for HweAlt {
    fn num_params(&self, num_qubits: usize, num_layers: usize) -> usize {
        2 * num_qubits * num_layers
    }

    fn encode(&self, circuit: &mut Circuit, num_layers: usize, theta: &[f64], x: &[f64]) -> Result<()> {
        let q = circuit.num_qubits();
        let d = x.len();
        let mut params = theta.iter().copied();
        for _ in 0..num_layers {
            for j in 0..q {
                let weight = params.next().expect("theta length checked");
                let phase = params.next().expect("theta length checked");
                circuit.push(GateOp::Ry {
                    target: j,
                    angle: weight * x[j % d],
                })?;
                circuit.push(GateOp::Rz {
                    target: j,
                    angle: phase,
                })?;
            }
            match q {
                1 => {}
                2 => circuit.push(GateOp::Cnot { control: 0, target: 1 })?,
                _ => {
                    for j in 0..q {
                        circuit.push(GateOp::Cnot {
                            control: j,
                            target: (j + 1) % q,
                        })?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub family: FeatureMapFamily,
    pub num_qubits: usize,
    pub num_layers: usize,
    pub input_dim: usize,
}

impl FeatureMapSpec {
    pub fn new(family: FeatureMapFamily, num_qubits: usize, num_layers: usize, input_dim: usize) -> Result<Self> {
        let spec = Self {
            family,
            num_qubits,
            num_layers,
            input_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_qubits == 0 || self.num_qubits > crate::simulator::MAX_QUBITS {
            return Err(Error::invalid(format!("num_qubits = {} out of range", self.num_qubits)));
        }
        if self.num_layers == 0 {
            return Err(Error::invalid("num_layers must be at least 1"));
        }
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be at least 1"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.family.layout().num_params(self.num_qubits, self.num_layers)
    }

    /// Qubit indices encoding feature `dim`.
    pub fn qubits_for_feature(&self, dim: usize) -> Vec<usize> {
        (0..self.num_qubits).filter(|j| j % self.input_dim == dim).collect()
    }
}

/// Trainable feature-map angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite parameter {v}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Uniform draws from `[0, 2*pi)`.
    pub fn random(len: usize, rng: &mut impl rand::Rng) -> Self {
        Self((0..len).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Bind `theta` and a scaled point `x` into the concrete circuit `U(x; theta)`.
pub fn build(spec: &FeatureMapSpec, theta: &ParamVector, x: &[f64]) -> Result<Circuit> {
    spec.validate()?;
    if theta.len() != spec.num_params() {
        return Err(Error::invalid(format!(
            "{} expects {} parameters, got {}",
            spec.family,
            spec.num_params(),
            theta.len()
        )));
    }
    if x.len() != spec.input_dim {
        return Err(Error::invalid(format!(
            "point has dimension {}, feature map expects {}",
            x.len(),
            spec.input_dim
        )));
    }
    let x = clamp_unit(x)?;
    let mut circuit = Circuit::new(spec.num_qubits)?;
    spec.family
        .layout()
        .encode(&mut circuit, spec.num_layers, theta.values(), &x)?;
    Ok(circuit)
}

fn clamp_unit(x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_nan() || v.abs() > 1.0 + DOMAIN_TOLERANCE {
                Err(Error::domain(format!("feature {i} = {v} outside [-1, 1]")))
            } else {
                Ok(v.clamp(-1.0, 1.0))
            }
        })
        .collect()
}

/// Affine maps of inputs to `[-1, 1]^d` and labels to `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
    pub label_lo: f64,
    pub label_hi: f64,
}

impl ScalingSpec {
    pub fn new(input_lo: Vec<f64>, input_hi: Vec<f64>, label_lo: f64, label_hi: f64) -> Result<Self> {
        if input_lo.len() != input_hi.len() || input_lo.is_empty() {
            return Err(Error::invalid("input bounds must be non-empty and of equal length"));
        }
        for (i, (lo, hi)) in input_lo.iter().zip(&input_hi).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain(format!("input bounds [{lo}, {hi}] for dimension {i}")));
            }
        }
        let spec = Self {
            input_lo,
            input_hi,
            label_lo,
            label_hi,
        };
        spec.check_labels()?;
        Ok(spec)
    }

    /// Label bounds taken from the extremes of `labels`.
    pub fn with_labels_from(input_lo: Vec<f64>, input_hi: Vec<f64>, labels: &[f64]) -> Result<Self> {
        let (lo, hi) = label_range(labels)?;
        Self::new(input_lo, input_hi, lo, hi)
    }

    fn check_labels(&self) -> Result<()> {
        if !(self.label_lo < self.label_hi) || !self.label_lo.is_finite() || !self.label_hi.is_finite() {
            return Err(Error::domain(format!(
                "degenerate label bounds [{}, {}]",
                self.label_lo, self.label_hi
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.input_lo.len()
    }

    /// Ratio of unscaled to scaled label units.
    pub fn label_scale(&self) -> f64 {
        (self.label_hi - self.label_lo) / 2.0
    }
}

pub fn label_range(labels: &[f64]) -> Result<(f64, f64)> {
    if labels.is_empty() {
        return Err(Error::invalid("no labels"));
    }
    let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

pub fn scale_inputs(x_raw: &[f64], scaling: &ScalingSpec) -> Result<Vec<f64>> {
    if x_raw.len() != scaling.dim() {
        return Err(Error::invalid(format!(
            "point has dimension {}, scaling expects {}",
            x_raw.len(),
            scaling.dim()
        )));
    }
    x_raw
        .iter()
        .zip(scaling.input_lo.iter().zip(&scaling.input_hi))
        .enumerate()
        .map(|(i, (&v, (&lo, &hi)))| {
            if !(lo..=hi).contains(&v) {
                return Err(Error::domain(format!("x[{i}] = {v} outside [{lo}, {hi}]")));
            }
            if v == lo {
                Ok(-1.0)
            } else if v == hi {
                Ok(1.0)
            } else {
                Ok((2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
            }
        })
        .collect()
}

pub fn unscale_inputs(x: &[f64], scaling: &ScalingSpec) -> Vec<f64> {
    x.iter()
        .zip(scaling.input_lo.iter().zip(&scaling.input_hi))
        .map(|(&v, (&lo, &hi))| lo + (v + 1.0) * (hi - lo) / 2.0)
        .collect()
}

pub fn scale_labels(y_raw: &[f64], scaling: &ScalingSpec) -> Result<Vec<f64>> {
    scaling.check_labels()?;
    let (lo, hi) = (scaling.label_lo, scaling.label_hi);
    Ok(y_raw.iter().map(|&y| 2.0 * (y - lo) / (hi - lo) - 1.0).collect())
}

pub fn unscale_labels(y: &[f64], scaling: &ScalingSpec) -> Result<Vec<f64>> {
    scaling.check_labels()?;
    let (lo, hi) = (scaling.label_lo, scaling.label_hi);
    Ok(y.iter().map(|&v| lo + (v + 1.0) * (hi - lo) / 2.0).collect())
}

/// Standard deviations carry the slope of the label map and no offset.
pub fn unscale_std(std: &[f64], scaling: &ScalingSpec) -> Result<Vec<f64>> {
    scaling.check_labels()?;
    let k = scaling.label_scale();
    Ok(std.iter().map(|s| s * k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::run_circuit;
    use std::f64::consts::PI;

    fn count(circuit: &Circuit) -> (usize, usize) {
        let rotations = circuit
            .ops()
            .iter()
            .filter(|op| matches!(op, GateOp::Ry { .. }))
            .count();
        let cnots = circuit
            .ops()
            .iter()
            .filter(|op| matches!(op, GateOp::Cnot { .. }))
            .count();
        (rotations, cnots)
    }

    #[test]
    fn chebyshev_single_layer_gate_counts() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 4, 1, 1).unwrap();
        assert_eq!(spec.num_params(), 8);
        let c = build(&spec, &ParamVector::zeros(8), &[0.3]).unwrap();
        let (ry, cnot) = count(&c);
        assert_eq!(ry, 8 + 4);
        assert_eq!(cnot, 3);
    }

    #[test]
    fn alt_param_count() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::HweAlt, 4, 2, 1).unwrap();
        assert_eq!(spec.num_params(), 16);
        let c = build(&spec, &ParamVector::zeros(16), &[0.3]).unwrap();
        assert_eq!(count(&c).1, 8);
    }

    #[test]
    fn data_layer_is_identity_at_one() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 3, 2, 1).unwrap();
        let c = build(&spec, &ParamVector::zeros(9), &[1.0]).unwrap();
        for op in c.ops() {
            if let GateOp::Ry { angle, .. } = op {
                assert_eq!(*angle, 0.0);
            }
        }
        // everything is identity except CNOTs acting on |000>
        let s = run_circuit(&c).unwrap();
        assert!((s.ground_state_probability() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_robin_assignment_covers_features() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 5, 1, 2).unwrap();
        assert_eq!(spec.qubits_for_feature(0), vec![0, 2, 4]);
        assert_eq!(spec.qubits_for_feature(1), vec![1, 3]);
        for d in 0..2 {
            assert!(spec.qubits_for_feature(d).len() >= 5 / 2);
        }
    }

    #[test]
    fn build_errors() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 2, 1, 1).unwrap();
        assert!(matches!(
            build(&spec, &ParamVector::zeros(3), &[0.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build(&spec, &ParamVector::zeros(4), &[1.1]),
            Err(Error::Domain(_))
        ));
        assert!(build(&spec, &ParamVector::zeros(4), &[1.0 + 1e-13]).is_ok());
        assert!(matches!(
            build(&spec, &ParamVector::zeros(4), &[0.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn build_is_deterministic() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::HweAlt, 3, 2, 2).unwrap();
        let theta = ParamVector::new((0..12).map(|i| i as f64 * 0.37).collect()).unwrap();
        assert_eq!(
            build(&spec, &theta, &[0.2, -0.4]).unwrap(),
            build(&spec, &theta, &[0.2, -0.4]).unwrap()
        );
    }

    #[test]
    fn family_lookup_by_name() {
        assert_eq!(
            "chebyshev_hwe".parse::<FeatureMapFamily>().unwrap(),
            FeatureMapFamily::ChebyshevHwe
        );
        assert_eq!("HWE-ALT".parse::<FeatureMapFamily>().unwrap(), FeatureMapFamily::HweAlt);
        assert!("zz".parse::<FeatureMapFamily>().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = FeatureMapSpec::new(FeatureMapFamily::ChebyshevHwe, 4, 2, 1).unwrap();
        let json = serde_json::to_value(spec).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"family": "CHEBYSHEV_HWE", "num_qubits": 4, "num_layers": 2, "input_dim": 1})
        );
        let back: FeatureMapSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn input_scaling_endpoints() {
        let s = ScalingSpec::new(vec![0.0], vec![2.0 * PI], -1.0, 1.0).unwrap();
        assert_eq!(scale_inputs(&[0.0], &s).unwrap(), vec![-1.0]);
        assert_eq!(scale_inputs(&[2.0 * PI], &s).unwrap(), vec![1.0]);
        assert!(scale_inputs(&[PI], &s).unwrap()[0].abs() < 1e-15);
        assert!(matches!(scale_inputs(&[-0.1], &s), Err(Error::Domain(_))));
        let mid = ScalingSpec::new(vec![-5.0, 0.0], vec![10.0, 15.0], 0.0, 1.0).unwrap();
        assert_eq!(scale_inputs(&[2.5, 7.5], &mid).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn label_scaling() {
        let s = ScalingSpec::new(vec![0.0], vec![1.0], -6.0, 6.0).unwrap();
        assert_eq!(scale_labels(&[6.0], &s).unwrap(), vec![1.0]);
        assert_eq!(scale_labels(&[-6.0], &s).unwrap(), vec![-1.0]);
        let std = unscale_std(&[0.1], &s).unwrap();
        assert!((std[0] - 0.6).abs() < 1e-15);
        assert!(ScalingSpec::new(vec![0.0], vec![1.0], 2.0, 2.0).is_err());
        assert!(ScalingSpec::new(vec![1.0], vec![1.0], 0.0, 2.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn label_round_trip(ys in proptest::collection::vec(-1e3f64..1e3, 2..20)) {
            let (lo, hi) = label_range(&ys).unwrap();
            proptest::prop_assume!(hi - lo > 1e-6);
            let s = ScalingSpec::new(vec![0.0], vec![1.0], lo, hi).unwrap();
            let scaled = scale_labels(&ys, &s).unwrap();
            for v in &scaled {
                proptest::prop_assert!(*v >= -1.0 - 1e-12 && *v <= 1.0 + 1e-12);
            }
            let back = unscale_labels(&scaled, &s).unwrap();
            for (a, b) in ys.iter().zip(&back) {
                proptest::prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
