//! Benchmark nonlinear systems `F(x) = 0` with analytic Jacobians.
//!
//! Three families are provided, each deterministic given its parameters and
//! a 64-bit seed:
//!
//! * [`LinearSystem`] — `F(x) = A·x − b`, either from explicit data or
//!   seeded diagonally dominant random instances;
//! * [`LogSumExpSystem`] — the gradient system of a regularized
//!   log-sum-exp objective, shifted so the root is exactly the origin;
//! * [`HEquationSystem`] — a midpoint discretization of the Chandrasekhar
//!   H-equation from radiative transfer.
//!
//! Problems are serializable to a small JSON document (`kind`, `n`, `seed`,
//! family parameters, and optionally the stored root) and can be rebuilt
//! bit-for-bit from it.

pub mod hequation;
pub mod linear;
pub mod logsumexp;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densealg::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::rng;

pub use hequation::HEquationSystem;
pub use linear::LinearSystem;
pub use logsumexp::LogSumExpSystem;

/// A root of the system known in advance, with the accuracy it was
/// established to and how.
#[derive(Debug, Clone)]
pub struct KnownSolution {
    /// The root `x*`.
    pub x: DenseVector,
    /// `‖F(x*)‖` actually measured when the root was produced.
    pub residual_norm: f64,
    /// Human-readable origin ("construction", "lu_solve", "newton from
    /// all-ones", ...).
    pub provenance: String,
}

/// A square nonlinear system with analytic derivatives.
///
/// Evaluations are pure: the same `x` always produces the same output, which
/// is what makes recorded traces reproducible and lets diagnostics re-query
/// the Jacobian without perturbing a run.
pub trait System {
    /// Problem dimension `n` (the system maps ℝⁿ → ℝⁿ).
    fn dim(&self) -> usize;

    /// Evaluates `F(x)`.
    fn eval(&self, x: &DenseVector) -> Result<DenseVector>;

    /// Evaluates the Jacobian `J(x)`.
    fn jacobian(&self, x: &DenseVector) -> Result<DenseMatrix>;

    /// Evaluates the single Jacobian column `J(x)·e_j` (0-based `j`).
    /// Families override this when a column is cheaper than the full matrix.
    fn jacobian_column(&self, x: &DenseVector, j: usize) -> Result<DenseVector> {
        assert!(j < self.dim(), "jacobian_column: index out of range");
        Ok(self.jacobian(x)?.column(j))
    }

    /// The stored root, when one exists.
    fn known_solution(&self) -> Option<&KnownSolution>;

    /// Serializable descriptor, when the instance was built from one
    /// (ad-hoc instances, e.g. explicit linear systems, have none).
    fn spec(&self) -> Option<ProblemSpec>;
}

/// Serializable problem descriptor; `build` reconstructs the instance
/// deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    /// Seeded diagonally dominant linear system.
    Linear { n: usize, seed: u64 },
    /// Regularized log-sum-exp gradient system with `m` terms.
    LogSumExp { n: usize, seed: u64, m: usize, gamma: f64 },
    /// Chandrasekhar H-equation with parameter `c`. The seed is carried for
    /// schema uniformity; construction is deterministic in `(n, c)`.
    HEquation { n: usize, seed: u64, c: f64 },
}

impl ProblemSpec {
    /// Dimension the built system will have.
    pub fn dim(&self) -> usize {
        match *self {
            Self::Linear { n, .. } | Self::LogSumExp { n, .. } | Self::HEquation { n, .. } => n,
        }
    }

    /// Stable lowercase family name ("linear", "logsumexp", "hequation").
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::LogSumExp { .. } => "logsumexp",
            Self::HEquation { .. } => "hequation",
        }
    }

    /// Builds the described instance.
    pub fn build(&self) -> Result<Problem> {
        match *self {
            Self::Linear { n, seed } => Ok(Problem::Linear(LinearSystem::generate(n, seed)?)),
            Self::LogSumExp { n, seed, m, gamma } => {
                Ok(Problem::LogSumExp(LogSumExpSystem::generate(n, m, seed, gamma)?))
            }
            Self::HEquation { n, seed: _, c } => {
                Ok(Problem::HEquation(HEquationSystem::new(n, c)?))
            }
        }
    }
}

/// On-disk problem document: the descriptor plus, optionally, the root that
/// was in effect when the document was written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDocument {
    #[serde(flatten)]
    pub spec: ProblemSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_star_residual: Option<f64>,
}

/// Any of the built-in problem families, as one solvable value.
#[derive(Debug, Clone)]
pub enum Problem {
    Linear(LinearSystem),
    LogSumExp(LogSumExpSystem),
    HEquation(HEquationSystem),
}

impl Problem {
    fn inner(&self) -> &dyn System {
        match self {
            Self::Linear(p) => p,
            Self::LogSumExp(p) => p,
            Self::HEquation(p) => p,
        }
    }

    /// Serializes the problem (with its stored root) to a JSON document.
    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument {
            spec: self.spec().expect("built-in problems always carry a descriptor"),
            x_star: self.known_solution().map(|s| s.x.to_vec()),
            x_star_residual: self.known_solution().map(|s| s.residual_norm),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    /// Rebuilds a problem from a document. Reconstruction is deterministic
    /// from the descriptor; a stored root, if present, is cross-checked
    /// against a fresh evaluation and rejected when inconsistent.
    pub fn from_document(doc: &ProblemDocument) -> Result<Self> {
        let problem = doc.spec.build()?;
        if let Some(x_star) = &doc.x_star {
            let x = DenseVector::validated(x_star.clone())?;
            if x.len() != problem.dim() {
                return Err(Error::Parse(format!(
                    "stored root has length {}, problem dimension is {}",
                    x.len(),
                    problem.dim()
                )));
            }
            let declared = doc.x_star_residual.unwrap_or(0.0);
            let actual = problem.eval(&x)?.norm();
            if actual > (10.0 * declared).max(1e-9) {
                return Err(Error::Parse(format!(
                    "stored root has residual {actual:.3e}, inconsistent with declared {declared:.3e}"
                )));
            }
        }
        Ok(problem)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(json)?)
    }
}

impl System for Problem {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn eval(&self, x: &DenseVector) -> Result<DenseVector> {
        self.inner().eval(x)
    }
    fn jacobian(&self, x: &DenseVector) -> Result<DenseMatrix> {
        self.inner().jacobian(x)
    }
    fn jacobian_column(&self, x: &DenseVector, j: usize) -> Result<DenseVector> {
        self.inner().jacobian_column(x, j)
    }
    fn known_solution(&self) -> Option<&KnownSolution> {
        self.inner().known_solution()
    }
    fn spec(&self) -> Option<ProblemSpec> {
        self.inner().spec()
    }
}

/// Central-difference Jacobian: column `j` is `(F(x+h·e_j) − F(x−h·e_j)) / 2h`.
pub fn finite_diff_jacobian(sys: &dyn System, x: &DenseVector, h: f64) -> Result<DenseMatrix> {
    assert!(h > 0.0, "finite_diff_jacobian: step must be positive");
    let n = sys.dim();
    let mut out = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = finite_diff_jacobian_column(sys, x, j, h)?;
        for i in 0..n {
            out.set(i, j, col[i]);
        }
    }
    Ok(out)
}

/// Central-difference approximation of a single Jacobian column.
pub fn finite_diff_jacobian_column(
    sys: &dyn System,
    x: &DenseVector,
    j: usize,
    h: f64,
) -> Result<DenseVector> {
    assert!(j < sys.dim(), "finite_diff_jacobian_column: index out of range");
    let mut fwd = x.clone();
    fwd[j] += h;
    let mut bwd = x.clone();
    bwd[j] -= h;
    Ok(sys.eval(&fwd)?.sub(&sys.eval(&bwd)?).scale(1.0 / (2.0 * h)))
}

/// Measured problem constants near the root: the inverse-Jacobian norm at
/// the root and a sampled lower bound on the Jacobian's Lipschitz constant
/// (both in the spectral norm).
#[derive(Debug, Clone, Copy)]
pub struct ConstantEstimates {
    /// `‖J(x*)⁻¹‖₂`.
    pub inv_jacobian_norm: f64,
    /// `max ‖J(x) − J(x*)‖₂ / ‖x − x*‖` over the sampled ball; a lower bound
    /// on the true Lipschitz constant, so audits multiply in a safety factor.
    pub lipschitz: f64,
    /// Radius of the sampled ball.
    pub radius: f64,
    /// Number of sample points.
    pub samples: usize,
}

/// Samples `samples` points uniformly in direction, with radius uniform on
/// `(0, radius]`, around the stored root, and measures [`ConstantEstimates`].
/// Requires the problem to carry a known solution.
pub fn estimate_constants(
    sys: &dyn System,
    radius: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ConstantEstimates> {
    use rand::RngExt;
    let solution = sys
        .known_solution()
        .ok_or_else(|| Error::InvalidConfig("constant estimation needs a known root".into()))?;
    let x_star = solution.x.clone();
    let j_star = sys.jacobian(&x_star)?;
    let inv_jacobian_norm = j_star.inverse()?.spectral_norm()?;

    let mut lipschitz: f64 = 0.0;
    for _ in 0..samples {
        let dir = rng::unit_sphere(rng, sys.dim());
        let r = radius * rng.random_range(f64::EPSILON..=1.0);
        let mut x = x_star.clone();
        x.axpy(r, &dir);
        let gap = sys.jacobian(&x)?.sub(&j_star).spectral_norm()?;
        lipschitz = lipschitz.max(gap / r);
    }
    Ok(ConstantEstimates { inv_jacobian_norm, lipschitz, radius, samples })
}
