//! Regularized log-sum-exp gradient system.
//!
//! The scalar objective is
//!
//! ```text
//! f(x) = ln Σ_j exp(c_jᵀx − b_j)  +  ½ Σ_j (c_jᵀx)²  +  (γ/2)‖x‖²,
//! ```
//!
//! and the system solved is its gradient. The raw data `ĉ_j`, `b_j` is drawn
//! uniformly from `[-1, 1]`; the columns are then shifted by the gradient of
//! the log-sum-exp term at the origin, `c_j := ĉ_j − Ĉ·softmax(−b)`, which
//! makes the origin the exact root. The Hessian is symmetric positive
//! definite, so the Jacobian at the root is well conditioned for moderate γ.

use crate::densealg::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::problems::{KnownSolution, ProblemSpec, System};
use crate::rng::{self, StreamId};

/// Gradient system of the regularized log-sum-exp objective.
#[derive(Debug, Clone)]
pub struct LogSumExpSystem {
    /// Shifted coefficient matrix, `n × m`, column `j` is `c_j`.
    c: DenseMatrix,
    /// Offsets `b`, length `m`.
    b: DenseVector,
    gamma: f64,
    seed: u64,
    solution: KnownSolution,
}

impl LogSumExpSystem {
    /// Seeded instance with `m` terms in dimension `n` and regularization
    /// `gamma > 0`. Draw order (one ChaCha stream): the `m` columns of `Ĉ`
    /// (each `n` uniform entries), then the `m` entries of `b`.
    pub fn generate(n: usize, m: usize, seed: u64, gamma: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidConfig("log-sum-exp needs n ≥ 1 and m ≥ 1".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "log-sum-exp regularization must be positive, got {gamma}"
            )));
        }
        let mut rng = rng::stream(seed, StreamId::ProblemData);
        let mut c = DenseMatrix::zeros(n, m);
        for j in 0..m {
            let col = rng::uniform_pm1(&mut rng, n);
            for i in 0..n {
                c.set(i, j, col[i]);
            }
        }
        let b = rng::uniform_pm1(&mut rng, m);

        // Shift every column by the log-sum-exp gradient at the origin so the
        // full gradient vanishes there exactly.
        let weights = softmax(&b.scale(-1.0));
        let origin_grad = c.matvec(&weights);
        for j in 0..m {
            for i in 0..n {
                c.set(i, j, c.get(i, j) - origin_grad[i]);
            }
        }

        let mut sys = Self {
            c,
            b,
            gamma,
            seed,
            solution: KnownSolution {
                x: DenseVector::zeros(n),
                residual_norm: 0.0,
                provenance: "construction".into(),
            },
        };
        // Record the residual actually achieved after the shift (rounding
        // leaves it at a few ulps rather than exactly zero).
        sys.solution.residual_norm = sys.eval(&sys.solution.x)?.norm();
        Ok(sys)
    }

    pub fn terms(&self) -> usize {
        self.b.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The objective value `f(x)`; the system is its exact gradient, which
    /// tests verify by finite differences.
    pub fn objective(&self, x: &DenseVector) -> f64 {
        let z = self.c.matvec_transpose(x).sub(&self.b);
        let zmax = z.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        let ctx = self.c.matvec_transpose(x);
        let quad: f64 = ctx.iter().map(|v| v * v).sum::<f64>() / 2.0;
        lse + quad + self.gamma / 2.0 * x.dot(x)
    }

    /// Smoothness coefficient `L = 2·λ_max(C·Cᵀ) + γ` (an upper bound on the
    /// Hessian's spectral norm), used for the `L·I` initialization in
    /// experiments.
    pub fn smoothness_bound(&self) -> Result<f64> {
        let top = self.c.spectral_norm()?;
        Ok(2.0 * top * top + self.gamma)
    }

    /// Softmax weights `π(x) = softmax(Cᵀx − b)`.
    fn weights(&self, x: &DenseVector) -> DenseVector {
        softmax(&self.c.matvec_transpose(x).sub(&self.b))
    }
}

/// Max-subtracted softmax; immune to overflow for any finite input.
fn softmax(z: &DenseVector) -> DenseVector {
    let zmax = z.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let exps = DenseVector::from_fn(z.len(), |i| (z[i] - zmax).exp());
    let sum: f64 = exps.iter().sum();
    exps.scale(1.0 / sum)
}

impl System for LogSumExpSystem {
    fn dim(&self) -> usize {
        self.c.rows()
    }

    /// `F(x) = C·π(x) + C·(Cᵀx) + γ·x`.
    fn eval(&self, x: &DenseVector) -> Result<DenseVector> {
        assert_eq!(x.len(), self.dim(), "eval: dimension mismatch");
        let ctx = self.c.matvec_transpose(x);
        let pi = softmax(&ctx.sub(&self.b));
        let mut out = self.c.matvec(&pi.add(&ctx));
        out.axpy(self.gamma, x);
        Ok(out)
    }

    /// `J(x) = C·(diag(π) − ππᵀ)·Cᵀ + C·Cᵀ + γ·I`, assembled from rank-one
    /// pieces: `Σ_j (π_j + 1)·c_j c_jᵀ − (Cπ)(Cπ)ᵀ + γ·I`.
    fn jacobian(&self, x: &DenseVector) -> Result<DenseMatrix> {
        assert_eq!(x.len(), self.dim(), "jacobian: dimension mismatch");
        let n = self.dim();
        let pi = self.weights(x);
        let mut out = DenseMatrix::scaled_identity(n, self.gamma);
        for j in 0..self.terms() {
            let col = self.c.column(j);
            out.add_scaled_outer(pi[j] + 1.0, &col, &col);
        }
        let mean = self.c.matvec(&pi);
        out.add_scaled_outer(-1.0, &mean, &mean);
        Ok(out)
    }

    /// Column `j` in O(n·m): `C·(π∘w + w − π·(πᵀw)) + γ·e_j` with
    /// `w = Cᵀe_j` (row `j` of `C`).
    fn jacobian_column(&self, x: &DenseVector, j: usize) -> Result<DenseVector> {
        assert_eq!(x.len(), self.dim(), "jacobian_column: dimension mismatch");
        assert!(j < self.dim(), "jacobian_column: index out of range");
        let pi = self.weights(x);
        let w = self.c.matvec_transpose(&DenseVector::basis(self.dim(), j));
        let pi_dot_w = pi.dot(&w);
        let inner = DenseVector::from_fn(self.terms(), |t| pi[t] * w[t] + w[t] - pi[t] * pi_dot_w);
        let mut col = self.c.matvec(&inner);
        col[j] += self.gamma;
        Ok(col)
    }

    fn known_solution(&self) -> Option<&KnownSolution> {
        Some(&self.solution)
    }

    fn spec(&self) -> Option<ProblemSpec> {
        Some(ProblemSpec::LogSumExp {
            n: self.dim(),
            seed: self.seed,
            m: self.terms(),
            gamma: self.gamma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::rng::StreamId;

    #[test]
    fn origin_is_the_root_by_construction() {
        for seed in 0..5 {
            let sys = LogSumExpSystem::generate(8, 12, seed, 1.0).unwrap();
            assert!(sys.known_solution().unwrap().residual_norm < 1e-13);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_of_objective() {
        let sys = LogSumExpSystem::generate(5, 9, 21, 0.7).unwrap();
        let mut rng = stream(1, StreamId::Sampling);
        let x = rng::standard_normal(&mut rng, 5);
        let grad = sys.eval(&x).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            let mut fwd = x.clone();
            fwd[i] += h;
            let mut bwd = x.clone();
            bwd[i] -= h;
            let fd = (sys.objective(&fwd) - sys.objective(&bwd)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0),
                "component {i}: fd {fd} vs analytic {}",
                grad[i]
            );
        }
    }

    #[test]
    fn jacobian_is_symmetric_positive_definite() {
        let sys = LogSumExpSystem::generate(6, 10, 3, 0.5).unwrap();
        let mut rng = stream(2, StreamId::Sampling);
        let x = rng::standard_normal(&mut rng, 6);
        let j = sys.jacobian(&x).unwrap();
        assert!(j.max_abs_diff(&j.transpose()) < 1e-14);
        for _ in 0..10 {
            let v = rng::standard_normal(&mut rng, 6);
            assert!(v.dot(&j.matvec(&v)) > 0.0);
        }
    }

    #[test]
    fn softmax_survives_extreme_arguments() {
        let sys = LogSumExpSystem::generate(4, 6, 5, 1.0).unwrap();
        let huge = DenseVector::from_vec(vec![500.0, -500.0, 300.0, -300.0]);
        let f = sys.eval(&huge).unwrap();
        assert!(f.is_finite());
    }

    #[test]
    fn smoothness_bound_dominates_hessian_norm() {
        let sys = LogSumExpSystem::generate(5, 8, 9, 1.0).unwrap();
        let bound = sys.smoothness_bound().unwrap();
        let mut rng = stream(3, StreamId::Sampling);
        for _ in 0..5 {
            let x = rng::standard_normal(&mut rng, 5);
            let norm = sys.jacobian(&x).unwrap().spectral_norm().unwrap();
            assert!(norm <= bound * (1.0 + 1e-10), "{norm} > {bound}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(LogSumExpSystem::generate(4, 6, 0, 0.0).is_err());
        assert!(LogSumExpSystem::generate(4, 6, 0, -1.0).is_err());
        assert!(LogSumExpSystem::generate(0, 6, 0, 1.0).is_err());
    }
}
