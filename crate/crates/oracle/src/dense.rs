//! Circuits as explicit `2^q x 2^q` matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qgp_core::simulator::{Circuit, GateOp};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2x2 matrix of a single-qubit gate written out from its definition.
fn local(op: &GateOp) -> DMatrix<Complex64> {
    match *op {
        GateOp::Rx { angle, .. } => {
            let (s, co) = ((angle / 2.0).sin(), (angle / 2.0).cos());
            DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
        }
        GateOp::Ry { angle, .. } => {
            let (s, co) = ((angle / 2.0).sin(), (angle / 2.0).cos());
            DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
        }
        GateOp::Rz { angle, .. } => {
            let h = angle / 2.0;
            DMatrix::from_row_slice(
                2,
                2,
                &[c(h.cos(), -h.sin()), c(0.0, 0.0), c(0.0, 0.0), c(h.cos(), h.sin())],
            )
        }
        GateOp::H { .. } => {
            let r = 1.0 / 2f64.sqrt();
            DMatrix::from_row_slice(2, 2, &[c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)])
        }
        GateOp::Cnot { .. } => unreachable!("two-qubit gate"),
    }
}

/// Full unitary of one gate on `q` qubits, little-endian (qubit 0 is the
/// least significant index bit, i.e. the rightmost Kronecker factor).
pub fn gate_matrix(op: &GateOp, q: usize) -> DMatrix<Complex64> {
    let dim = 1usize << q;
    match *op {
        GateOp::Cnot { control, target } => DMatrix::from_fn(dim, dim, |row, col| {
            let image = if col >> control & 1 == 1 {
                col ^ (1 << target)
            } else {
                col
            };
            if row == image {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }),
        _ => {
            let g = local(op);
            let id = DMatrix::<Complex64>::identity(2, 2);
            let mut m = DMatrix::<Complex64>::identity(1, 1);
            for k in (0..q).rev() {
                let f = if k == op.target() { &g } else { &id };
                m = m.kronecker(f);
            }
            m
        }
    }
}

pub fn circuit_unitary(circuit: &Circuit) -> DMatrix<Complex64> {
    let q = circuit.num_qubits();
    circuit
        .ops()
        .iter()
        .fold(DMatrix::identity(1 << q, 1 << q), |u, op| gate_matrix(op, q) * u)
}

/// `U |0...0>` via the dense unitary.
pub fn circuit_state(circuit: &Circuit) -> DVector<Complex64> {
    let u = circuit_unitary(circuit);
    u.column(0).into_owned()
}

/// `Tr[rho(a) rho(b)]` from explicit density matrices.
pub fn density_kernel(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    let rho = |v: &DVector<Complex64>| v * v.adjoint();
    (rho(a) * rho(b)).trace().re
}

/// Inner product `<a|b>` accumulated with compensated (Kahan) summation.
pub fn inner_product(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (Kahan::default(), Kahan::default());
    for (x, y) in a.iter().zip(b) {
        let p = x.conj() * y;
        re.add(p.re);
        im.add(p.im);
    }
    c(re.sum, im.sum)
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnot_with_control_zero_swaps_basis_states_one_and_three() {
        let m = gate_matrix(&GateOp::Cnot { control: 0, target: 1 }, 2);
        let one = c(1.0, 0.0);
        assert_eq!(m[(3, 1)], one);
        assert_eq!(m[(1, 3)], one);
        assert_eq!(m[(0, 0)], one);
        assert_eq!(m[(2, 2)], one);
    }

    #[test]
    fn gate_matrices_are_unitary() {
        for op in [
            GateOp::Rx { target: 1, angle: 0.7 },
            GateOp::Ry { target: 0, angle: -1.9 },
            GateOp::Rz { target: 2, angle: 2.4 },
            GateOp::H { target: 1 },
            GateOp::Cnot { control: 2, target: 0 },
        ] {
            let m = gate_matrix(&op, 3);
            let err = (&m.adjoint() * &m - DMatrix::<Complex64>::identity(8, 8)).norm();
            assert!(err < 1e-12, "{op:?}");
        }
    }

    #[test]
    fn density_kernel_of_orthogonal_and_equal_states() {
        let zero = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let one = DVector::from_vec(vec![c(0.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(density_kernel(&zero, &one), 0.0);
        assert!((density_kernel(&one, &one) - 1.0).abs() < 1e-15);
    }
}
