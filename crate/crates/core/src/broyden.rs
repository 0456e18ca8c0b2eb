//! Rank-one secant updates and direction rules for Broyden-family methods.
//!
//! The central object is the projection-style update
//!
//! ```text
//! broyd_update(B, A, u) = B + (A − B) u uᵀ / (uᵀ u),
//! ```
//!
//! which overwrites the action of `B` along `u` with that of the target `A`
//! and leaves the orthogonal complement untouched. Broyden's classical
//! ("good") method is this update with the target known only through the
//! secant pair `y = A·u`; the greedy and randomized variants choose `u` to
//! attack the largest (or an isotropically random) column of the residual
//! `B − A`. The "bad" method applies the analogous update to the inverse.
//!
//! All updates are O(n²) and keep an explicitly maintained inverse via the
//! Sherman–Morrison identity, so a solver step never needs an O(n³) solve.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densealg::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::rng;

/// Directions with Euclidean norm below this are rejected as zero; the
/// rank-one updates would divide by (numerically) nothing.
pub const ZERO_DIRECTION_TOL: f64 = 1e-300;

/// Relative floor for the Sherman–Morrison denominator `uᵀHy`; below
/// `SHERMAN_MORRISON_REL_TOL · ‖u‖·‖H‖_F·‖y‖` the inverse update is refused
/// as numerically degenerate.
pub const SHERMAN_MORRISON_REL_TOL: f64 = 1e-12;

fn reject_zero(v: &DenseVector) -> Result<f64> {
    let norm_sq = v.dot(v);
    if !(norm_sq.sqrt() > ZERO_DIRECTION_TOL) {
        return Err(Error::ZeroDirection);
    }
    Ok(norm_sq)
}

/// Rank-one move of `current` toward `target` along `direction`:
/// `B + (A − B) u uᵀ / (uᵀ u)`.
///
/// The result reproduces `target`'s action on `direction` exactly (up to
/// rounding) and agrees with `current` on the orthogonal complement.
pub fn broyd_update(
    current: &DenseMatrix,
    target: &DenseMatrix,
    direction: &DenseVector,
) -> Result<DenseMatrix> {
    assert_eq!(current.rows(), target.rows(), "broyd_update: shape mismatch");
    assert_eq!(current.cols(), target.cols(), "broyd_update: shape mismatch");
    assert_eq!(current.cols(), direction.len(), "broyd_update: direction length mismatch");
    let norm_sq = reject_zero(direction)?;
    // (A − B) u, then add the outer product with uᵀ/(uᵀu).
    let gap_action = target.matvec(direction).sub(&current.matvec(direction));
    let mut out = current.clone();
    out.add_scaled_outer(1.0 / norm_sq, &gap_action, direction);
    Ok(out)
}

/// Classical secant update: `B + (y − B u) uᵀ / (uᵀ u)`.
///
/// This is [`broyd_update`] when the target is only known through its action
/// `y` on `u`; the result satisfies the secant equation `B₊ u = y`.
pub fn secant_update(b: &DenseMatrix, y: &DenseVector, u: &DenseVector) -> Result<DenseMatrix> {
    assert_eq!(b.rows(), y.len(), "secant_update: y length mismatch");
    assert_eq!(b.cols(), u.len(), "secant_update: u length mismatch");
    let norm_sq = reject_zero(u)?;
    let residual = y.sub(&b.matvec(u));
    let mut out = b.clone();
    out.add_scaled_outer(1.0 / norm_sq, &residual, u);
    Ok(out)
}

/// "Bad" Broyden update, applied directly to the inverse approximation:
/// `H + (u − H y) yᵀ / (yᵀ y)`. The result satisfies `H₊ y = u`.
pub fn bad_broyden_update(
    h: &DenseMatrix,
    y: &DenseVector,
    u: &DenseVector,
) -> Result<DenseMatrix> {
    assert_eq!(h.rows(), u.len(), "bad_broyden_update: u length mismatch");
    assert_eq!(h.cols(), y.len(), "bad_broyden_update: y length mismatch");
    let norm_sq = reject_zero(y)?;
    let residual = u.sub(&h.matvec(y));
    let mut out = h.clone();
    out.add_scaled_outer(1.0 / norm_sq, &residual, y);
    Ok(out)
}

/// Sherman–Morrison companion of [`secant_update`]: given `H = B⁻¹`, returns
/// the inverse of the secant-updated matrix,
/// `H − (H y − u) uᵀ H / (uᵀ H y)`.
pub fn sherman_morrison_update(
    h: &DenseMatrix,
    y: &DenseVector,
    u: &DenseVector,
) -> Result<DenseMatrix> {
    assert!(h.is_square(), "sherman_morrison_update: H must be square");
    assert_eq!(h.rows(), y.len(), "sherman_morrison_update: y length mismatch");
    assert_eq!(h.rows(), u.len(), "sherman_morrison_update: u length mismatch");
    let hy = h.matvec(y);
    let denom = u.dot(&hy);
    let scale = u.norm() * h.frobenius_norm() * y.norm();
    if !(denom.abs() > SHERMAN_MORRISON_REL_TOL * scale) {
        return Err(Error::DegenerateUpdate(format!(
            "|uᵀHy| = {:.3e} below relative floor {:.3e}",
            denom.abs(),
            SHERMAN_MORRISON_REL_TOL * scale
        )));
    }
    // H₊ = H − (Hy − u) (Hᵀu)ᵀ / denom
    let residual = hy.sub(u);
    let ht_u = h.matvec_transpose(u);
    let mut out = h.clone();
    out.add_scaled_outer(-1.0 / denom, &residual, &ht_u);
    Ok(out)
}

/// Index (0-based) of the column of `B − J` with the largest Euclidean norm;
/// ties resolve to the lowest index. This is the greedy direction choice and
/// costs O(n²).
pub fn greedy_direction(b: &DenseMatrix, j: &DenseMatrix) -> usize {
    assert_eq!((b.rows(), b.cols()), (j.rows(), j.cols()), "greedy_direction: shape mismatch");
    let gap = b.sub(j);
    let norms = gap.column_norms_sq();
    let mut best = 0;
    for (i, &v) in norms.iter().enumerate() {
        if v > norms[best] {
            best = i;
        }
    }
    best
}

/// How the per-iteration update direction is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionKind {
    /// The step difference `u = x₊ − x` (classical and "bad" Broyden).
    Secant,
    /// Basis column with the largest `‖(B − J)e_i‖`, ties to lowest index.
    GreedyBasis,
    /// Basis vector with uniformly random index.
    #[serde(rename = "basis")]
    UniformBasis,
    /// Uniform draw from the unit sphere.
    Sphere,
    /// Standard Gaussian vector (isotropic after normalization inside the
    /// updates, which are scale-invariant in `u`).
    Gaussian,
}

impl DirectionKind {
    /// True for the rules that consume random draws.
    pub fn is_random(self) -> bool {
        matches!(self, Self::UniformBasis | Self::Sphere | Self::Gaussian)
    }

    /// Stable lowercase name used in CLI flags and metadata.
    pub fn name(self) -> &'static str {
        match self {
            Self::Secant => "secant",
            Self::GreedyBasis => "greedy-basis",
            Self::UniformBasis => "basis",
            Self::Sphere => "sphere",
            Self::Gaussian => "gaussian",
        }
    }
}

/// Draws one direction of dimension `n` for a random rule. For
/// [`DirectionKind::UniformBasis`] the second return value carries the chosen
/// basis index.
pub fn random_direction(
    n: usize,
    kind: DirectionKind,
    rng: &mut ChaCha8Rng,
) -> (DenseVector, Option<usize>) {
    match kind {
        DirectionKind::UniformBasis => {
            let i = rng.random_range(0..n);
            (DenseVector::basis(n, i), Some(i))
        }
        DirectionKind::Sphere => (rng::unit_sphere(rng, n), None),
        DirectionKind::Gaussian => (rng::standard_normal(rng, n), None),
        DirectionKind::Secant | DirectionKind::GreedyBasis => {
            panic!("random_direction called for deterministic rule {kind:?}")
        }
    }
}

/// An approximate Jacobian `B` (optional) together with its explicitly
/// maintained inverse `H`.
///
/// Whenever both halves are present they are kept consistent (`B·H ≈ I`):
/// [`JacobianPair::apply_secant`] advances `B` by [`secant_update`] and `H`
/// by [`sherman_morrison_update`] from the same `(y, u)` pair. `B` may be
/// omitted for methods that only need the inverse, in which case diagnostics
/// requiring `B` are unavailable.
#[derive(Debug, Clone)]
pub struct JacobianPair {
    jacobian: Option<DenseMatrix>,
    inverse: DenseMatrix,
}

impl JacobianPair {
    /// Builds the pair from `B`, inverting it once by LU (O(n³), done only at
    /// initialization).
    pub fn from_jacobian(b: DenseMatrix) -> Result<Self> {
        let inverse = b.inverse()?;
        Ok(Self { jacobian: Some(b), inverse })
    }

    /// Builds the pair from `B` but keeps only the inverse.
    pub fn inverse_only(b: &DenseMatrix) -> Result<Self> {
        Ok(Self { jacobian: None, inverse: b.inverse()? })
    }

    /// Assembles a pair from parts already known to be consistent.
    pub fn from_parts(jacobian: Option<DenseMatrix>, inverse: DenseMatrix) -> Self {
        Self { jacobian, inverse }
    }

    pub fn jacobian(&self) -> Option<&DenseMatrix> {
        self.jacobian.as_ref()
    }

    pub fn inverse(&self) -> &DenseMatrix {
        &self.inverse
    }

    pub fn order(&self) -> usize {
        self.inverse.rows()
    }

    /// Applies the secant update for the pair `(y, u)` to both halves.
    pub fn apply_secant(&mut self, y: &DenseVector, u: &DenseVector) -> Result<()> {
        // Update the inverse first: if it degenerates the pair is left
        // untouched and the caller can abort the run cleanly.
        let new_inverse = sherman_morrison_update(&self.inverse, y, u)?;
        if let Some(b) = &self.jacobian {
            self.jacobian = Some(secant_update(b, y, u)?);
        }
        self.inverse = new_inverse;
        Ok(())
    }

    /// Replaces the inverse half (the "bad" method's direct update),
    /// dropping any stored `B`, which would no longer match.
    pub fn replace_inverse(&mut self, inverse: DenseMatrix) {
        self.jacobian = None;
        self.inverse = inverse;
    }

    /// Stores (or refreshes) the `B` half.
    pub fn set_jacobian(&mut self, jacobian: DenseMatrix) {
        self.jacobian = Some(jacobian);
    }

    /// Frobenius norm of `B·H − I`, when `B` is tracked. The pair counts as
    /// consistent while this stays below `1e-8 · max(1, ‖B‖_F)`.
    pub fn consistency_error(&self) -> Option<f64> {
        let b = self.jacobian.as_ref()?;
        let prod = b.matmul(&self.inverse);
        let n = prod.rows();
        Some(prod.sub(&DenseMatrix::identity(n)).frobenius_norm())
    }

    /// [`consistency_error`](Self::consistency_error) divided by
    /// `max(1, ‖B‖_F)`, the scale the consistency contract is stated at;
    /// the pair counts as consistent while this stays below `1e-8`.
    pub fn consistency_error_normalized(&self) -> Option<f64> {
        let b = self.jacobian.as_ref()?;
        let err = self.consistency_error()?;
        Some(err / b.frobenius_norm().max(1.0))
    }
}
