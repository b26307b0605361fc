//! Textbook dense linear algebra on `f64` matrices.

use nalgebra::{DMatrix, DVector};

/// Gauss-Jordan inverse with partial pivoting. `None` for singular input.
pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))?;
        if m[(pivot, col)].abs() < 1e-300 {
            return None;
        }
        m.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        m[(i, j)] -= f * m[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// `log |det a|` and the determinant's sign via LU elimination.
pub fn log_abs_det(a: &DMatrix<f64>) -> (f64, f64) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut sign = 1.0;
    let mut log_det = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .expect("non-empty");
        if m[(pivot, col)] == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if pivot != col {
            m.swap_rows(col, pivot);
            sign = -sign;
        }
        let p = m[(col, col)];
        sign *= p.signum();
        log_det += p.abs().ln();
        for i in col + 1..n {
            let f = m[(i, col)] / p;
            for j in col..n {
                m[(i, j)] -= f * m[(col, j)];
            }
        }
    }
    (sign, log_det)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and the matrix whose columns are the eigenvectors.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (m.diagonal(), v)
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    jacobi_eigen(a).0.min()
}

/// Frobenius-nearest PSD matrix to a symmetric `a`.
pub fn psd_projection(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = jacobi_eigen(a);
    let clipped = vals.map(|l| l.max(0.0));
    &vecs * DMatrix::from_diagonal(&clipped) * vecs.transpose()
}

/// Optimality conditions for `x` being the PSD projection of `a`:
/// `x` PSD, `x - a` PSD, and `<x, x - a> = 0`. Returns the worst violation.
pub fn projection_kkt_violation(a: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let diff = x - a;
    let primal = (-min_eigenvalue(x)).max(0.0);
    let dual = (-min_eigenvalue(&diff)).max(0.0);
    let complementarity = x.dot(&diff).abs();
    primal.max(dual).max(complementarity)
}
