//! Linear test systems `F(x) = A·x − b`.

use crate::densealg::{DenseMatrix, DenseVector};
use crate::error::Result;
use crate::problems::{KnownSolution, ProblemSpec, System};
use crate::rng::{self, StreamId};

/// A nonsingular linear system. The Jacobian is constant, which makes these
/// the cleanest instances for update-contraction experiments: the gap
/// `‖B_k − A‖` obeys the rank-one update algebra exactly, with no
/// linearization error.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: DenseMatrix,
    b: DenseVector,
    solution: KnownSolution,
    seed: Option<u64>,
}

impl LinearSystem {
    /// Builds the system from explicit data; the root is computed once by LU
    /// and stored. Fails if `a` is numerically singular.
    pub fn new(a: DenseMatrix, b: DenseVector) -> Result<Self> {
        assert!(a.is_square(), "LinearSystem: matrix must be square");
        assert_eq!(a.rows(), b.len(), "LinearSystem: shape mismatch");
        let x = a.lu_solve(&b)?;
        let residual_norm = a.matvec(&x).sub(&b).norm();
        let solution = KnownSolution { x, residual_norm, provenance: "lu_solve".into() };
        Ok(Self { a, b, solution, seed: None })
    }

    /// Seeded random instance: entries of `A` and `b` uniform on `[-1, 1]`
    /// (drawn column by column, then `b`), with `n + 1` added to the
    /// diagonal. Strict diagonal dominance keeps the condition number modest
    /// (well under 1e4 at desk scales).
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, StreamId::ProblemData);
        let mut a = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let col = rng::uniform_pm1(&mut rng, n);
            for i in 0..n {
                a.set(i, j, col[i]);
            }
        }
        for i in 0..n {
            a.set(i, i, a.get(i, i) + n as f64 + 1.0);
        }
        let b = rng::uniform_pm1(&mut rng, n);
        let mut sys = Self::new(a, b)?;
        sys.seed = Some(seed);
        Ok(sys)
    }

    /// The system matrix (also the Jacobian everywhere).
    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &DenseVector {
        &self.b
    }
}

impl System for LinearSystem {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn eval(&self, x: &DenseVector) -> Result<DenseVector> {
        assert_eq!(x.len(), self.dim(), "eval: dimension mismatch");
        Ok(self.a.matvec(x).sub(&self.b))
    }

    fn jacobian(&self, x: &DenseVector) -> Result<DenseMatrix> {
        assert_eq!(x.len(), self.dim(), "jacobian: dimension mismatch");
        Ok(self.a.clone())
    }

    fn jacobian_column(&self, x: &DenseVector, j: usize) -> Result<DenseVector> {
        assert_eq!(x.len(), self.dim(), "jacobian_column: dimension mismatch");
        Ok(self.a.column(j))
    }

    fn known_solution(&self) -> Option<&KnownSolution> {
        Some(&self.solution)
    }

    fn spec(&self) -> Option<ProblemSpec> {
        self.seed.map(|seed| ProblemSpec::Linear { n: self.dim(), seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn root_satisfies_system() {
        let sys = LinearSystem::generate(12, 3).unwrap();
        let sol = sys.known_solution().unwrap();
        assert!(sol.residual_norm <= 1e-10);
        assert!(sys.eval(&sol.x).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = LinearSystem::generate(6, 42).unwrap();
        let b = LinearSystem::generate(6, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(a.rhs(), b.rhs());
    }

    #[test]
    fn generated_instances_are_well_conditioned() {
        for seed in 0..5 {
            let sys = LinearSystem::generate(20, seed).unwrap();
            assert!(sys.matrix().condition_number().unwrap() <= 1e4);
        }
    }

    #[test]
    fn explicit_singular_matrix_is_rejected() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        let b = DenseVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(LinearSystem::new(a, b), Err(Error::SingularMatrix(_))));
    }
}
