//! Derivative-free minimization with the Nelder-Mead simplex method.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Maximum number of objective evaluations.
    pub max_evals: usize,
    /// Stop once the simplex's value spread falls below this.
    pub f_tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            max_evals: 150,
            f_tol: 0.0,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Best value seen after each evaluation.
    pub history: Vec<f64>,
}

struct Counted<F> {
    f: F,
    max_evals: usize,
    best_x: Vec<f64>,
    best: f64,
    history: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn exhausted(&self) -> bool {
        self.history.len() >= self.max_evals
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best || self.history.is_empty() {
            self.best = v;
            self.best_x = x.to_vec();
        }
        self.history.push(self.best);
        v
    }
}

impl NelderMead {
    pub fn with_budget(max_evals: usize) -> Self {
        Self {
            max_evals,
            ..Self::default()
        }
    }

    /// Minimize `f` from `x0`. NaN values count as +inf.
    pub fn minimize<F>(&self, f: F, x0: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let mut obj = Counted {
            f,
            max_evals: self.max_evals.max(1),
            best_x: x0.to_vec(),
            best: f64::INFINITY,
            history: Vec::new(),
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = obj.eval(x0);
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            if obj.exhausted() {
                break;
            }
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let v = obj.eval(&x);
            simplex.push((x, v));
        }

        while simplex.len() == n + 1 && n > 0 && !obj.exhausted() {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[n].1);
            if worst - best <= self.f_tol && worst.is_finite() {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(self.reflection);
            let fr = obj.eval(&xr);
            if fr < simplex[0].1 {
                if obj.exhausted() {
                    simplex[n] = (xr, fr);
                    break;
                }
                let xe = along(self.reflection * self.expansion);
                let fe = obj.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                if obj.exhausted() {
                    break;
                }
                let outside = fr < simplex[n].1;
                let t = if outside {
                    self.reflection * self.contraction
                } else {
                    -self.contraction
                };
                let xc = along(t);
                let fc = obj.eval(&xc);
                if fc < fr.min(simplex[n].1) {
                    simplex[n] = (xc, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        if obj.exhausted() {
                            break;
                        }
                        let x: Vec<f64> = anchor
                            .iter()
                            .zip(&vertex.0)
                            .map(|(a, v)| a + self.shrink * (v - a))
                            .collect();
                        let v = obj.eval(&x);
                        *vertex = (x, v);
                    }
                }
            }
        }

        Minimum {
            x: obj.best_x,
            value: obj.best,
            evals: obj.history.len(),
            history: obj.history,
        }
    }
}
