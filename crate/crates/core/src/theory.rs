//! Evaluable convergence bounds, the initialization gate, the minimal
//! linear-rate constant, and audits that compare recorded runs against the
//! guarantees.
//!
//! Everything here is a pure function of scalars (bounds, gate, rate tables)
//! or a read-only pass over solver output (audits). Bound evaluators work in
//! log space so that regimes where the direct product over- or underflows
//! still compare correctly; the natural-scale value is `exp` of the log form
//! and may round to 0 or ∞ without affecting comparisons.

use serde::{Deserialize, Serialize};

use crate::densealg::DenseMatrix;
use crate::error::{Error, Result};
use crate::problems::{ConstantEstimates, System};
use crate::solver::trace::TraceRow;
use crate::solver::{Method, SolverConfig, SolverRun, StepOutcome, RATIO_AUDIT_FLOOR};

/// Absolute tolerance of the bisection in [`compute_qm`].
pub const QM_BISECTION_TOL: f64 = 1e-12;

/// Safety factor applied to sampled Lipschitz estimates, which lower-bound
/// the true constant; audits built on them are marked advisory.
pub const LIPSCHITZ_SAFETY_FACTOR: f64 = 1.5;

/// Which matrix norm a stored `B₀ − J(x₀)` gap was measured in.
///
/// The initialization gate is stated for the spectral norm while the
/// per-iteration gap `σ_k` is tracked in Frobenius norm; both are exposed and
/// audits record both rather than silently picking one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapNorm {
    #[default]
    Spectral,
    Frobenius,
}

/// The scalar constants the guarantees are phrased in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Bound on `‖J(x*)⁻¹‖₂` (the symbol `c` in the bounds).
    pub inverse_jacobian_norm: f64,
    /// Jacobian Lipschitz constant (the symbol `M`).
    pub lipschitz: f64,
    /// Problem dimension `n`.
    pub dim: usize,
    /// Distance from start to root, `r₀ = ‖x₀ − x*‖`.
    pub initial_distance: f64,
    /// Initial approximation gap `σ₀ = ‖B₀ − J(x₀)‖`, measured in
    /// [`gap_norm`](Self::gap_norm).
    pub initial_gap: f64,
    /// Norm convention of [`initial_gap`](Self::initial_gap).
    pub gap_norm: GapNorm,
    /// True when the constants were sampled rather than derived exactly;
    /// audits then report as advisory.
    pub estimated: bool,
}

impl ProblemConstants {
    /// Exact (non-estimated) constants with the default spectral gap norm.
    pub fn new(
        inverse_jacobian_norm: f64,
        lipschitz: f64,
        dim: usize,
        initial_distance: f64,
        initial_gap: f64,
    ) -> Result<Self> {
        let k = Self {
            inverse_jacobian_norm,
            lipschitz,
            dim,
            initial_distance,
            initial_gap,
            gap_norm: GapNorm::Spectral,
            estimated: false,
        };
        k.validate()?;
        Ok(k)
    }

    /// Constants from sampled estimates: the Lipschitz estimate is inflated
    /// by [`LIPSCHITZ_SAFETY_FACTOR`] (it lower-bounds the truth) and the
    /// result is flagged estimated.
    pub fn from_estimates(
        est: &ConstantEstimates,
        dim: usize,
        initial_distance: f64,
        initial_gap: f64,
        gap_norm: GapNorm,
    ) -> Result<Self> {
        let k = Self {
            inverse_jacobian_norm: est.inv_jacobian_norm,
            lipschitz: LIPSCHITZ_SAFETY_FACTOR * est.lipschitz,
            dim,
            initial_distance,
            initial_gap,
            gap_norm,
            estimated: true,
        };
        k.validate()?;
        Ok(k)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("inverse_jacobian_norm", self.inverse_jacobian_norm),
            ("lipschitz", self.lipschitz),
            ("initial_distance", self.initial_distance),
            ("initial_gap", self.initial_gap),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "guarantees require dimension ≥ 2, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// `c·σ₀` — how far the initial matrix is from the Jacobian, in units
    /// where the Jacobian's inverse has norm one.
    pub fn scaled_initial_gap(&self) -> f64 {
        self.inverse_jacobian_norm * self.initial_gap
    }
}

/// Left-hand side of the initialization gate, `48√n·c·M·r₀ + c·σ₀`.
pub fn initial_condition_lhs(k: &ProblemConstants) -> f64 {
    let n = k.dim as f64;
    48.0 * n.sqrt() * k.inverse_jacobian_norm * k.lipschitz * k.initial_distance
        + k.scaled_initial_gap()
}

/// The gate for the superlinear guarantees: `48√n·c·M·r₀ + c·σ₀ ≤ 1/3`.
/// Boundary equality counts as passing.
pub fn check_initial_condition(k: &ProblemConstants) -> bool {
    initial_condition_lhs(k) <= 1.0 / 3.0
}

/// Natural log of [`greedy_rate_bound`]: `k + k(k−1)/4 · ln(1 − 1/n)`.
pub fn greedy_rate_bound_log(k: usize, n: usize) -> f64 {
    assert!(n >= 2, "rate bounds need dimension ≥ 2, got {n}");
    let kf = k as f64;
    let nf = n as f64;
    kf + kf * (kf - 1.0) / 4.0 * (1.0 - 1.0 / nf).ln()
}

/// Superlinear envelope of the greedy method's error contraction after `k`
/// iterations: `e^k (1 − 1/n)^{k(k−1)/4}`.
///
/// Panics when `n < 2`.
pub fn greedy_rate_bound(k: usize, n: usize) -> f64 {
    greedy_rate_bound_log(k, n).exp()
}

/// Natural log of [`random_rate_bound`].
pub fn random_rate_bound_log(k: usize, n: usize, delta: f64) -> f64 {
    assert!(n >= 2, "rate bounds need dimension ≥ 2, got {n}");
    assert!(
        delta > 0.0 && delta < 1.0,
        "failure probability must lie in (0, 1), got {delta}"
    );
    let kf = k as f64;
    let nf = n as f64;
    let prefactor_log = (4.0 * nf * nf * std::f64::consts::E / delta).ln();
    kf * prefactor_log + kf * (kf - 1.0) / 4.0 * (1.0 - 1.0 / (nf + 1.0)).ln()
}

/// High-probability envelope of the randomized method's error contraction:
/// `(4n²e/δ)^k (1 − 1/(n+1))^{k(k−1)/4}`, holding with probability `1 − δ`.
///
/// Panics when `n < 2` or `δ ∉ (0, 1)`.
pub fn random_rate_bound(k: usize, n: usize, delta: f64) -> f64 {
    random_rate_bound_log(k, n, delta).exp()
}

/// Decay envelope for the greedy method's Jacobian gap, `2e(1 − 1/n)^{k/2}/c`,
/// valid only once `k ≥ 4n + 3`; earlier iterations return
/// [`Error::ThresholdNotMet`] carrying that minimal `k`.
pub fn jacobian_rate_bound_greedy(k: usize, n: usize, c: f64) -> Result<f64> {
    assert!(n >= 2, "rate bounds need dimension ≥ 2, got {n}");
    assert!(c > 0.0, "inverse-Jacobian norm must be positive, got {c}");
    let min_k = 4 * n + 3;
    if k < min_k {
        return Err(Error::ThresholdNotMet { k, min_k });
    }
    let nf = n as f64;
    let log = (2.0 * std::f64::consts::E / c).ln() + (k as f64) / 2.0 * (1.0 - 1.0 / nf).ln();
    Ok(log.exp())
}

/// Natural log of [`original_broyden_bound`]: `ln 2 − (k/2)·ln k`.
pub fn original_broyden_bound_log(k: usize) -> f64 {
    assert!(k >= 1, "the classical-method envelope starts at k = 1");
    let kf = k as f64;
    std::f64::consts::LN_2 - kf / 2.0 * kf.ln()
}

/// Classical Broyden's known error envelope after `k` steps: `2·k^{−k/2}`.
///
/// Panics when `k < 1`.
pub fn original_broyden_bound(k: usize) -> f64 {
    original_broyden_bound_log(k).exp()
}

/// First iteration from which the greedy envelope is provably at least as
/// small as the classical one: `⌈8n·ln(n·e) + 1⌉`.
///
/// Panics when `n < 2`.
pub fn crossover_iteration(n: usize) -> usize {
    assert!(n >= 2, "crossover comparison needs dimension ≥ 2, got {n}");
    let nf = n as f64;
    (8.0 * nf * (nf * std::f64::consts::E).ln() + 1.0).ceil() as usize
}

/// One row of the classical-vs-greedy envelope comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateComparisonRow {
    pub n: usize,
    pub k: usize,
    /// `2·k^{−k/2}` (0 when it underflows; the flag uses log space).
    pub original_bound: f64,
    /// `e^k (1−1/n)^{k(k−1)/4}` (same underflow note).
    pub greedy_bound: f64,
    /// True when the greedy envelope is ≤ the classical one, decided in
    /// log space so underflow cannot flip it.
    pub greedy_faster: bool,
}

/// Envelope comparison for `k = 1..=k_max` at fixed dimension.
pub fn compare_rates(n: usize, k_max: usize) -> Vec<RateComparisonRow> {
    (1..=k_max)
        .map(|k| RateComparisonRow {
            n,
            k,
            original_bound: original_broyden_bound(k),
            greedy_bound: greedy_rate_bound(k, n),
            greedy_faster: original_broyden_bound_log(k) >= greedy_rate_bound_log(k, n),
        })
        .collect()
}

/// CSV header of [`rate_table_csv`].
pub const RATE_TABLE_CSV_HEADER: &str = "n,k,original_bound,greedy_bound,greedy_faster";

/// The comparison table as CSV, floats printed round-trip exact.
pub fn rate_table_csv(n: usize, k_max: usize) -> String {
    use crate::solver::trace::format_f64_exact;
    let mut out = String::from(RATE_TABLE_CSV_HEADER);
    out.push('\n');
    for row in compare_rates(n, k_max) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n,
            row.k,
            format_f64_exact(row.original_bound),
            format_f64_exact(row.greedy_bound),
            row.greedy_faster
        ));
    }
    out
}

/// Smallest linear contraction rate `q` compatible with the constants:
/// the minimal `q` satisfying both
///
/// ```text
/// c·σ₀ ≤ q/(1+q)   and   12√n·c·M·r₀ ≤ q(1−q)·(q/(1+q) − c·σ₀).
/// ```
///
/// Requires the initialization gate ([`check_initial_condition`]) to hold,
/// which guarantees a solution in `[c·σ₀/(1−c·σ₀), 1/2]`; on that interval the
/// second constraint's left-over function is increasing, so bisection to
/// [`QM_BISECTION_TOL`] finds the minimum. With `r₀ = 0` the second
/// constraint is vacuous and the first binds exactly.
pub fn compute_qm(k: &ProblemConstants) -> Result<f64> {
    k.validate()?;
    if !check_initial_condition(k) {
        return Err(Error::Infeasible(format!(
            "initialization gate fails: {} > 1/3",
            initial_condition_lhs(k)
        )));
    }
    let cs = k.scaled_initial_gap();
    let q_lo = cs / (1.0 - cs);
    let rhs =
        12.0 * (k.dim as f64).sqrt() * k.inverse_jacobian_norm * k.lipschitz * k.initial_distance;
    if rhs == 0.0 {
        return Ok(q_lo);
    }
    let margin = |q: f64| q * (1.0 - q) * (q / (1.0 + q) - cs);
    let mut lo = q_lo;
    let mut hi = 0.5;
    if margin(hi) < rhs {
        // The gate implies margin(1/2) ≥ rhs in exact arithmetic; this is a
        // guard against rounding at the boundary.
        return Err(Error::Infeasible(format!(
            "no rate in [{q_lo}, 0.5] satisfies the distance constraint"
        )));
    }
    while hi - lo > QM_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if margin(mid) >= rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Norm bounds for a perturbed identity: given `‖E‖ < 1`, returns
/// `(bound on ‖(I−E)⁻¹‖, bound on ‖(I−E)⁻¹ − I‖)` =
/// `(1/(1−‖E‖), ‖E‖/(1−‖E‖))` from the geometric series.
pub fn neumann_inverse_bound(e_norm: f64) -> Result<(f64, f64)> {
    if !e_norm.is_finite() || !(0.0..1.0).contains(&e_norm) {
        return Err(Error::OutOfDomain(format!(
            "perturbation norm must lie in [0, 1), got {e_norm}"
        )));
    }
    Ok((1.0 / (1.0 - e_norm), e_norm / (1.0 - e_norm)))
}

/// Result of one recorded-run audit.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    /// Number of inequalities (or ratio pairs) examined.
    pub checked: usize,
    /// Minimum of `bound − observed` over all checks, normalized by the
    /// bound's scale; negative means a violation of that relative size.
    pub worst_slack: f64,
    pub pass: bool,
    /// True when the audit leaned on sampled constant estimates.
    pub advisory: bool,
    pub detail: String,
}

impl AuditOutcome {
    fn empty(reason: &str) -> Self {
        Self {
            checked: 0,
            worst_slack: f64::INFINITY,
            pass: false,
            advisory: false,
            detail: format!("no checkable data: {reason}"),
        }
    }
}

/// Relative slack tolerated before an audit inequality counts as violated;
/// covers accumulated rounding in the recorded quantities.
pub const AUDIT_REL_TOL: f64 = 1e-9;

fn slack_rel(bound: f64, observed: f64) -> f64 {
    let scale = bound.abs().max(observed.abs()).max(1e-300);
    (bound - observed) / scale
}

/// Checks the one-step growth law of the Jacobian gap along a recorded run:
///
/// ```text
/// σ_{k+1}² ≤ σ_k² + 2σ_k·√n·M·(r_k + r_{k+1}) + n·M²·(r_k + r_{k+1})²
/// ```
///
/// using the Frobenius `sigma_abs` and distance `r_k` columns. Rows missing
/// either column are skipped.
pub fn sigma_recursion_audit(rows: &[TraceRow], k: &ProblemConstants) -> AuditOutcome {
    let n = k.dim as f64;
    let m = k.lipschitz;
    let mut checked = 0usize;
    let mut worst = f64::INFINITY;
    for pair in rows.windows(2) {
        let (Some(s0), Some(s1), Some(r0), Some(r1)) =
            (pair[0].sigma_abs, pair[1].sigma_abs, pair[0].r_k, pair[1].r_k)
        else {
            continue;
        };
        let growth = r0 + r1;
        let bound = s0 * s0 + 2.0 * s0 * n.sqrt() * m * growth + n * m * m * growth * growth;
        worst = worst.min(slack_rel(bound, s1 * s1));
        checked += 1;
    }
    if checked == 0 {
        return AuditOutcome::empty("need consecutive rows with σ and r recorded");
    }
    AuditOutcome {
        checked,
        worst_slack: worst,
        pass: worst >= -AUDIT_REL_TOL,
        advisory: k.estimated,
        detail: format!("{checked} gap-growth inequalities, worst relative slack {worst:.3e}"),
    }
}

/// Checks the one-step error contraction along a recorded run: whenever
/// `c(σ_k + M·r_k) < 1`,
///
/// ```text
/// r_{k+1} ≤ (3cM·r_k/2 + c·σ_k) / (1 − c(σ_k + M·r_k)) · r_k.
/// ```
pub fn r_recursion_audit(rows: &[TraceRow], k: &ProblemConstants) -> AuditOutcome {
    let c = k.inverse_jacobian_norm;
    let m = k.lipschitz;
    let mut checked = 0usize;
    let mut worst = f64::INFINITY;
    for pair in rows.windows(2) {
        let (Some(s0), Some(r0), Some(r1)) = (pair[0].sigma_abs, pair[0].r_k, pair[1].r_k) else {
            continue;
        };
        let denom = 1.0 - c * (s0 + m * r0);
        if denom <= 0.0 {
            continue; // contraction statement silent here
        }
        let bound = (1.5 * c * m * r0 + c * s0) / denom * r0;
        worst = worst.min(slack_rel(bound, r1));
        checked += 1;
    }
    if checked == 0 {
        return AuditOutcome::empty("need consecutive rows with σ and r recorded");
    }
    AuditOutcome {
        checked,
        worst_slack: worst,
        pass: worst >= -AUDIT_REL_TOL,
        advisory: k.estimated,
        detail: format!("{checked} contraction inequalities, worst relative slack {worst:.3e}"),
    }
}

/// Consecutive error ratios `r_{k+1}/r_k` over rows whose distances sit above
/// `floor` (rounding noise dominates below it).
pub fn error_ratios(rows: &[TraceRow], floor: f64) -> Vec<f64> {
    rows.windows(2)
        .filter_map(|pair| match (pair[0].r_k, pair[1].r_k) {
            (Some(a), Some(b)) if a >= floor && b >= floor => Some(b / a),
            _ => None,
        })
        .collect()
}

/// Superlinear signature: the last `window` error ratios above
/// [`RATIO_AUDIT_FLOOR`] must be strictly decreasing. Fails when fewer than
/// two ratios are available.
pub fn superlinear_signature(rows: &[TraceRow], window: usize) -> AuditOutcome {
    let ratios = error_ratios(rows, RATIO_AUDIT_FLOOR);
    let tail: &[f64] = if ratios.len() > window {
        &ratios[ratios.len() - window..]
    } else {
        &ratios
    };
    if tail.len() < 2 {
        return AuditOutcome::empty("need at least two error ratios above the floor");
    }
    let mut worst = f64::INFINITY;
    for pair in tail.windows(2) {
        worst = worst.min(pair[0] - pair[1]);
    }
    AuditOutcome {
        checked: tail.len() - 1,
        worst_slack: worst,
        pass: worst > 0.0,
        advisory: false,
        detail: format!(
            "final {} ratios {:?}, min decrease {worst:.3e}",
            tail.len(),
            tail.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()
        ),
    }
}

/// Linear-decay audit of the greedy method's Jacobian gap: drives a greedy
/// run and checks `c·‖B_k − J(x_k)‖₂ ≤ e·(1 − 1/n)^{k/2}` at every iterate
/// (the Frobenius variant is reported in the detail string; both norms are
/// measured).
///
/// The guarantee needs the initialization gate; if the constants fail it the
/// audit returns [`Error::Infeasible`]. The config's method must be greedy so
/// the forward matrix is maintained.
pub fn sigma_linear_audit(
    sys: &dyn System,
    x0: &crate::densealg::DenseVector,
    cfg: SolverConfig,
    k: &ProblemConstants,
) -> Result<AuditOutcome> {
    if cfg.method != Method::Greedy {
        return Err(Error::InvalidConfig(
            "the Jacobian-decay guarantee is stated for the greedy method".into(),
        ));
    }
    if !check_initial_condition(k) {
        return Err(Error::Infeasible(format!(
            "initialization gate fails: {} > 1/3",
            initial_condition_lhs(k)
        )));
    }
    let n = k.dim as f64;
    let c = k.inverse_jacobian_norm;
    let mut run = SolverRun::new(sys, x0, cfg)?;
    let mut checked = 0usize;
    let mut worst = f64::INFINITY;
    let mut max_spectral = 0.0_f64;
    let mut max_frobenius = 0.0_f64;
    loop {
        let b = run
            .pair()
            .and_then(|p| p.jacobian())
            .ok_or_else(|| Error::InvalidConfig("forward matrix not maintained".into()))?;
        let gap: DenseMatrix = b.sub(&sys.jacobian(run.x())?);
        let spectral = gap.spectral_norm()?;
        let frobenius = gap.frobenius_norm();
        let envelope =
            std::f64::consts::E * ((run.k() as f64) / 2.0 * (1.0 - 1.0 / n).ln()).exp();
        worst = worst.min(slack_rel(envelope, c * spectral));
        max_spectral = max_spectral.max(c * spectral);
        max_frobenius = max_frobenius.max(c * frobenius);
        checked += 1;

        if run.residual_norm() <= cfg.tol_residual || run.k() >= cfg.max_iters {
            break;
        }
        if let StepOutcome::Terminal(_) = run.step() {
            break;
        }
    }
    Ok(AuditOutcome {
        checked,
        worst_slack: worst,
        pass: worst >= -AUDIT_REL_TOL,
        advisory: k.estimated,
        detail: format!(
            "{checked} iterates, worst relative slack {worst:.3e}, max c·σ \
             (spectral) {max_spectral:.3e}, (frobenius) {max_frobenius:.3e}"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{estimate_constants, ProblemSpec};
    use crate::rng::{self, StreamId};
    use crate::solver::{sample_start, solve, SolveStatus, StartScheme};

    fn constants(c: f64, m: f64, n: usize, r0: f64, sigma0: f64) -> ProblemConstants {
        ProblemConstants::new(c, m, n, r0, sigma0).unwrap()
    }

    #[test]
    fn initial_condition_gate_examples() {
        assert!(check_initial_condition(&constants(1.0, 1.0, 4, 0.0, 0.0)));
        // 48·√4·1·1·1 = 96 ≫ 1/3.
        let far = constants(1.0, 1.0, 4, 1.0, 0.0);
        assert_eq!(initial_condition_lhs(&far), 96.0);
        assert!(!check_initial_condition(&far));
    }

    #[test]
    fn initial_condition_boundary_is_inclusive() {
        // r₀ = 2⁻⁹ gives an exact first term 96·2⁻⁹ = 0.1875; σ₀ picked so
        // the sum reproduces 1/3 to the last bit.
        let r0 = 2f64.powi(-9);
        let sigma0 = 1.0 / 3.0 - 96.0 * r0;
        let boundary = constants(1.0, 1.0, 4, r0, sigma0);
        assert_eq!(initial_condition_lhs(&boundary), 1.0 / 3.0);
        assert!(check_initial_condition(&boundary));
        let above = constants(1.0, 1.0, 4, r0, sigma0 + 1e-15);
        assert!(!check_initial_condition(&above));
    }

    #[test]
    fn greedy_rate_bound_values() {
        assert_eq!(greedy_rate_bound(0, 7), 1.0);
        assert!((greedy_rate_bound(1, 7) - std::f64::consts::E).abs() < 1e-15);
        let v = greedy_rate_bound(4, 2); // e⁴·(1/2)³
        assert!((v - 6.8247687541430295).abs() / v < 1e-12);
        let log = greedy_rate_bound_log(4, 2);
        assert!((log - (4.0 - 3.0 * std::f64::consts::LN_2)).abs() < 1e-14);
    }

    #[test]
    fn random_rate_bound_values() {
        assert_eq!(random_rate_bound(0, 5, 0.1), 1.0);
        // One step at δ = 0.1 costs a factor 40n²e.
        for n in [2usize, 5, 17] {
            let nf = n as f64;
            let one = random_rate_bound(1, n, 0.1);
            let expect = 40.0 * nf * nf * std::f64::consts::E;
            assert!((one - expect).abs() / expect < 1e-13, "n={n}");
        }
        let v = random_rate_bound(2, 2, 0.5); // (32e)²·(2/3)^{1/2}
        assert!((v - 6177.934378045477).abs() / v < 1e-12);
    }

    #[test]
    fn jacobian_rate_bound_threshold_and_values() {
        let v = jacobian_rate_bound_greedy(11, 2, 1.0).unwrap(); // 2e·2^{-5.5}
        assert!((v - 0.1201322196299724).abs() / v < 1e-12);
        match jacobian_rate_bound_greedy(10, 2, 1.0) {
            Err(Error::ThresholdNotMet { k: 10, min_k: 11 }) => {}
            other => panic!("expected threshold error, got {other:?}"),
        }
        // Two extra iterations shrink the bound by exactly (1 − 1/n).
        for n in [2usize, 6, 30] {
            let k = 4 * n + 3;
            let a = jacobian_rate_bound_greedy(k, n, 0.7).unwrap();
            let b = jacobian_rate_bound_greedy(k + 2, n, 0.7).unwrap();
            let ratio = b / a;
            let expect = 1.0 - 1.0 / n as f64;
            assert!((ratio - expect).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn original_broyden_bound_values() {
        assert_eq!(original_broyden_bound(1), 2.0);
        assert!((original_broyden_bound(4) - 0.125).abs() < 1e-16);
        let v = original_broyden_bound(9); // 2/19683
        assert!((v - 1.0161052685058171e-4).abs() / v < 1e-12);
    }

    #[test]
    fn log_and_direct_evaluation_agree_in_safe_range() {
        for k in 0usize..40 {
            let direct: f64 = std::f64::consts::E.powi(k as i32)
                * (1.0 - 1.0 / 3.0_f64).powf((k * k.saturating_sub(1)) as f64 / 4.0);
            let via_log = greedy_rate_bound(k, 3);
            assert!((direct - via_log).abs() / direct.max(1e-300) < 1e-12, "k={k}");
        }
        for k in 1..40 {
            let direct = 2.0 * (k as f64).powf(-(k as f64) / 2.0);
            let via_log = original_broyden_bound(k);
            assert!((direct - via_log).abs() / direct < 1e-12, "k={k}");
        }
    }

    #[test]
    fn crossover_values_and_monotonicity() {
        assert_eq!(crossover_iteration(2), 29);
        assert_eq!(crossover_iteration(10), 266);
        for n in 2..100 {
            assert!(crossover_iteration(n + 1) > crossover_iteration(n), "n={n}");
        }
    }

    #[test]
    fn rate_comparison_flags_and_csv() {
        let rows = compare_rates(2, 100);
        assert_eq!(rows.len(), 100);
        assert!(!rows[0].greedy_faster); // k=1: 2 < e
        for row in &rows {
            if row.k >= crossover_iteration(2) {
                assert!(row.greedy_faster, "k={}", row.k);
            }
        }
        let csv = rate_table_csv(2, 3);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(RATE_TABLE_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("2,1,"));
    }

    #[test]
    fn rate_comparison_survives_underflow() {
        // At k = 400 both envelopes underflow to 0 in natural scale; the
        // flag must still be decided by the log forms.
        let row = &compare_rates(2, 400)[399];
        assert_eq!(row.original_bound, 0.0);
        assert_eq!(row.greedy_bound, 0.0);
        assert!(row.greedy_faster);
        assert!(original_broyden_bound_log(400) > greedy_rate_bound_log(400, 2));
    }

    #[test]
    fn qm_with_zero_distance_binds_the_gap_constraint() {
        let k = constants(2.0, 5.0, 9, 0.0, 0.1);
        let q = compute_qm(&k).unwrap();
        let cs = 0.2;
        assert!((q - cs / (1.0 - cs)).abs() < 1e-15);
    }

    #[test]
    fn qm_bisection_satisfies_and_binds_the_distance_constraint() {
        let k = constants(1.0, 1.0, 4, 1e-6, 0.0);
        let q = compute_qm(&k).unwrap();
        assert!((q - 4.923157596465836e-3).abs() < 1e-9);
        let cs = k.scaled_initial_gap();
        let margin = |q: f64| q * (1.0 - q) * (q / (1.0 + q) - cs);
        let rhs = 12.0 * 2.0 * 1e-6;
        // Feasible at q with tiny slack, infeasible a hair below: minimality.
        assert!(margin(q) >= rhs - 1e-10);
        assert!(margin(q - 1e-6) < rhs);
        // Both defining constraints hold.
        assert!(cs <= q / (1.0 + q));
    }

    #[test]
    fn qm_respects_the_feasibility_gate() {
        let k = constants(1.0, 1.0, 4, 1.0, 0.0);
        match compute_qm(&k) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn qm_random_feasible_constants_lie_in_theta_bracket() {
        use rand::RngExt;
        let mut rng = rng::stream(99, StreamId::Sampling);
        for trial in 0..100 {
            let n = rng.random_range(2..40usize);
            let c: f64 = rng.random_range(0.1..3.0);
            let sigma0 = rng.random_range(0.0..0.3) / c;
            // Pick r₀ to keep the gate satisfied with headroom.
            let budget = (1.0 / 3.0 - c * sigma0) * rng.random_range(0.05..0.95);
            let m: f64 = rng.random_range(0.1..4.0);
            let r0 = budget / (48.0 * (n as f64).sqrt() * c * m);
            let k = constants(c, m, n, r0, sigma0);
            assert!(check_initial_condition(&k));
            let q = compute_qm(&k).unwrap();
            let theta = c * sigma0 + ((n as f64).sqrt() * c * m * r0).sqrt();
            assert!(
                q >= 0.5 * theta - 1e-12 && q <= 7.0 * theta + 1e-12,
                "trial {trial}: q={q}, theta={theta}"
            );
        }
    }

    #[test]
    fn neumann_bound_values_and_domain() {
        assert_eq!(neumann_inverse_bound(0.0).unwrap(), (1.0, 0.0));
        assert_eq!(neumann_inverse_bound(0.5).unwrap(), (2.0, 1.0));
        assert!(matches!(neumann_inverse_bound(1.0), Err(Error::OutOfDomain(_))));
        assert!(matches!(neumann_inverse_bound(-0.1), Err(Error::OutOfDomain(_))));
        assert!(matches!(neumann_inverse_bound(f64::NAN), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn neumann_bound_dominates_numerical_inverse() {
        use rand::RngExt;
        let mut rng = rng::stream(3, StreamId::Sampling);
        let raw = DenseMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..=1.0));
        let spec = raw.spectral_norm().unwrap();
        let e = raw.scale(0.3 / spec);
        let i_minus_e = DenseMatrix::identity(5).sub(&e);
        let inv = i_minus_e.inverse().unwrap();
        let (inv_bound, dev_bound) = neumann_inverse_bound(0.3).unwrap();
        assert!(inv.spectral_norm().unwrap() <= inv_bound + 1e-10);
        let dev = inv.sub(&DenseMatrix::identity(5));
        assert!(dev.spectral_norm().unwrap() <= dev_bound + 1e-10);
    }

    #[test]
    fn superlinear_signature_detects_shapes() {
        let mk = |dists: &[f64]| -> Vec<TraceRow> {
            dists
                .iter()
                .enumerate()
                .map(|(k, &r)| TraceRow {
                    k,
                    res_norm: r,
                    r_k: Some(r),
                    sigma_abs: None,
                    sigma_rel: None,
                    direction_index: None,
                    step_norm: None,
                })
                .collect()
        };
        // Ratios 0.5, 0.25, 0.125, ... strictly decreasing.
        let super_rows = mk(&[1.0, 0.5, 0.125, 1.5625e-2, 9.765625e-4, 3.0517578125e-5]);
        assert!(superlinear_signature(&super_rows, 5).pass);
        // Geometric decay: constant ratios, not strictly decreasing.
        let linear_rows = mk(&[1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]);
        assert!(!superlinear_signature(&linear_rows, 5).pass);
        // Below-floor tail rows are ignored.
        let with_floor = mk(&[1.0, 0.5, 0.125, 1.5625e-2, 9.765625e-4, 1e-16, 1e-17]);
        assert_eq!(error_ratios(&with_floor, RATIO_AUDIT_FLOOR).len(), 4);
    }

    /// Shared fixture: a greedy run on one seeded regularized softmax
    /// problem with recorded σ and r columns, plus sampled constants.
    fn greedy_run_with_constants() -> (Vec<TraceRow>, ProblemConstants) {
        let problem = ProblemSpec::LogSumExp { n: 8, seed: 2, m: 12, gamma: 1.0 }
            .build()
            .unwrap();
        let mut rng = rng::stream(11, StreamId::StartPoint);
        let x0 = sample_start(&problem, StartScheme::NearSolution { rho: 0.05 }, &mut rng)
            .unwrap();
        let cfg = SolverConfig {
            method: Method::Greedy,
            record_sigma: true,
            max_iters: 120,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &x0, cfg);
        assert_eq!(trace.status(), SolveStatus::Converged);

        let mut est_rng = rng::stream(12, StreamId::Sampling);
        let est = estimate_constants(&problem, 0.5, 40, &mut est_rng).unwrap();
        let r0 = trace.rows[0].r_k.unwrap();
        let sigma0 = trace.rows[0].sigma_abs.unwrap();
        let k = ProblemConstants::from_estimates(&est, 8, r0, sigma0, GapNorm::Frobenius)
            .unwrap();
        (trace.rows, k)
    }

    #[test]
    fn recursion_audits_pass_on_a_real_greedy_run() {
        let (rows, k) = greedy_run_with_constants();
        let sigma = sigma_recursion_audit(&rows, &k);
        assert!(sigma.pass, "{}", sigma.detail);
        assert!(sigma.advisory);
        assert!(sigma.checked > 3);
        let r = r_recursion_audit(&rows, &k);
        assert!(r.pass, "{}", r.detail);
        assert!(r.checked > 3);
    }

    #[test]
    fn audits_report_missing_columns() {
        let rows = vec![TraceRow {
            k: 0,
            res_norm: 1.0,
            r_k: None,
            sigma_abs: None,
            sigma_rel: None,
            direction_index: None,
            step_norm: None,
        }];
        let k = constants(1.0, 1.0, 4, 0.0, 0.0);
        assert!(!sigma_recursion_audit(&rows, &k).pass);
        assert_eq!(sigma_recursion_audit(&rows, &k).checked, 0);
    }

    #[test]
    fn jacobian_decay_audit_runs_when_gate_holds() {
        let problem = ProblemSpec::HEquation { n: 16, seed: 0, c: 0.5 }.build().unwrap();
        let mut rng = rng::stream(7, StreamId::StartPoint);
        let x0 =
            sample_start(&problem, StartScheme::NearSolution { rho: 1e-4 }, &mut rng).unwrap();
        let cfg = SolverConfig { method: Method::Greedy, max_iters: 80, ..SolverConfig::default() };

        let mut est_rng = rng::stream(8, StreamId::Sampling);
        let est = estimate_constants(&problem, 0.1, 30, &mut est_rng).unwrap();
        let sol = problem.known_solution().unwrap();
        let r0 = x0.sub(&sol.x).norm();
        // Exact-Jacobian start: σ₀ = 0.
        let k = ProblemConstants::from_estimates(&est, 16, r0, 0.0, GapNorm::Spectral).unwrap();
        assert!(check_initial_condition(&k), "gate lhs {}", initial_condition_lhs(&k));

        let audit = sigma_linear_audit(&problem, &x0, cfg, &k).unwrap();
        assert!(audit.pass, "{}", audit.detail);
        assert!(audit.checked >= 2);

        // Infeasible constants are rejected up front.
        let bad = constants(10.0, 10.0, 16, 1.0, 0.0);
        assert!(matches!(
            sigma_linear_audit(&problem, &x0, cfg, &bad),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn constants_validation() {
        assert!(ProblemConstants::new(1.0, 1.0, 1, 0.0, 0.0).is_err());
        assert!(ProblemConstants::new(-1.0, 1.0, 4, 0.0, 0.0).is_err());
        assert!(ProblemConstants::new(1.0, f64::NAN, 4, 0.0, 0.0).is_err());
        assert_eq!(GapNorm::default(), GapNorm::Spectral);
    }
}
