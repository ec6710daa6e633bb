//! Dense LU solves for the per-policy Bellman system `(I - γ P_π)`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use crate::error::{Error, Result};

/// A factored `(I - γ P_π)` for one policy. Forward solves give values,
/// transposed solves give visitation measures.
pub struct BellmanSystem {
    n: usize,
    matrix: Mat<f64>,
    lu: PartialPivLu<f64>,
}

impl BellmanSystem {
    /// Factors `I - gamma * transition` where `transition` is row-major `n x n`.
    pub fn new(n: usize, gamma: f64, transition: &[f64]) -> Self {
        debug_assert_eq!(transition.len(), n * n);
        let matrix = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - gamma * transition[i * n + j]
        });
        let lu = matrix.partial_piv_lu();
        Self { n, matrix, lu }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `(I - γP) x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(rhs, false)
    }

    /// Solves `(I - γP)^T x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(rhs, true)
    }

    fn solve_impl(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n, "rhs length");
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = if transpose {
            self.lu.solve_transpose(&b)
        } else {
            self.lu.solve(&b)
        };
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        let residual = self.residual(&out, rhs, transpose);
        let scale = 1.0 + out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !residual.is_finite() || residual > 1e-10 * scale {
            return Err(Error::SingularSystem { residual });
        }
        Ok(out)
    }

    fn residual(&self, x: &[f64], rhs: &[f64], transpose: bool) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                let a = if transpose {
                    self.matrix[(j, i)]
                } else {
                    self.matrix[(i, j)]
                };
                acc += a * xj;
            }
            let r = (acc - rhs[i]).abs();
            if r.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(r);
        }
        worst
    }
}
