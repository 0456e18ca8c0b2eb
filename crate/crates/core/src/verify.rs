//! Named verification suites: each check exercises one guarantee end to end
//! on deterministic synthetic data and reports a pass/fail line with the
//! measured slack.
//!
//! Checks are parameterized so callers can scale the sample counts; the
//! suites in [`run_suite`] use moderate defaults that finish in seconds.
//! Every check seeds its own generator streams, so consecutive invocations
//! print byte-identical reports.

use std::fmt;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::broyden::broyd_update;
use crate::densealg::{DenseMatrix, DenseVector};
use crate::error::Result;
use crate::problems::{
    estimate_constants, finite_diff_jacobian, LinearSystem, ProblemSpec, System,
};
use crate::rng::{self, StreamId};
use crate::solver::{
    sample_start, solve, InitScheme, Method, SolveStatus, SolverConfig, SolverRun, StartScheme,
    StepOutcome,
};
use crate::theory::{self, AuditOutcome, GapNorm, ProblemConstants};

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    /// Deterministic summary (counts, worst slack); never includes timings.
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name, pass, detail: detail.into() }
    }

    fn from_audit(name: &'static str, audit: &AuditOutcome) -> Self {
        let detail = if audit.advisory {
            format!("{}; advisory: sampled constants", audit.detail)
        } else {
            audit.detail.clone()
        };
        Self::new(name, audit.pass, detail)
    }

    /// The printed report line, `name: PASS (detail)`.
    pub fn line(&self) -> String {
        format!("{}: {} ({})", self.name, if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

/// True when every check passed.
pub fn all_pass(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.pass)
}

/// The named suites exposed by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifySuite {
    /// Update-level contraction and consistency guarantees, audited runs.
    Lemmas,
    /// Scalar bound evaluators, the rate-comparison table, feasibility gate.
    Bounds,
    /// Derivative correctness of the problem families.
    Jacobians,
    /// Everything above, in order.
    All,
}

impl VerifySuite {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lemmas" => Ok(Self::Lemmas),
            "bounds" => Ok(Self::Bounds),
            "jacobians" => Ok(Self::Jacobians),
            "all" => Ok(Self::All),
            other => Err(crate::error::Error::InvalidConfig(format!(
                "unknown suite {other:?}; expected lemmas|bounds|jacobians|all"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lemmas => "lemmas",
            Self::Bounds => "bounds",
            Self::Jacobians => "jacobians",
            Self::All => "all",
        }
    }
}

/// Runs the named suite with the default (seconds-scale) sample counts.
pub fn run_suite(suite: VerifySuite) -> Vec<CheckResult> {
    match suite {
        VerifySuite::Lemmas => lemmas_suite(),
        VerifySuite::Bounds => bounds_suite(),
        VerifySuite::Jacobians => jacobians_suite(),
        VerifySuite::All => {
            let mut out = lemmas_suite();
            out.extend(bounds_suite());
            out.extend(jacobians_suite());
            out
        }
    }
}

fn lemmas_suite() -> Vec<CheckResult> {
    vec![
        check_greedy_contraction(&[2, 5, 10], 10, 101),
        check_random_contraction_expectation(30, 102),
        check_random_contraction_monte_carlo(4000, 103),
        check_update_monotonicity(200, 104),
        check_gram_identity(200, 105),
        check_secant_equation(200, 106),
        check_inverse_maintenance(107),
        check_linear_sigma_envelope(&[5, 10], 108),
        check_superlinear_hequation(40, 121),
        check_jacobian_decay_envelope(110),
        check_recursion_audits(111),
    ]
}

fn bounds_suite() -> Vec<CheckResult> {
    vec![
        check_bound_spot_values(),
        check_log_direct_agreement(),
        check_crossover_table(50, 10),
        check_qm_bracket(100, 201),
        check_neumann_numeric(60, 202),
    ]
}

fn jacobians_suite() -> Vec<CheckResult> {
    vec![
        check_fd_jacobian_agreement(8, 301),
        check_jacobian_columns(302),
        check_taylor_remainder(303),
        check_softmax_curvature(304),
    ]
}

fn random_square(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

/// Greedy updates on randomly generated linear systems shrink the squared
/// gap to the true matrix by at least the factor `1 − 1/n` every step
/// (relative slack `1e-12`).
pub fn check_greedy_contraction(dims: &[usize], systems_per_dim: usize, seed: u64) -> CheckResult {
    let mut worst = f64::INFINITY;
    let mut steps = 0usize;
    let mut systems = 0usize;
    for (di, &n) in dims.iter().enumerate() {
        for s in 0..systems_per_dim {
            let sys_seed = seed + (di * systems_per_dim + s) as u64;
            let problem = match LinearSystem::generate(n, sys_seed) {
                Ok(p) => p,
                Err(e) => return CheckResult::new("greedy contraction", false, e.to_string()),
            };
            systems += 1;
            let a = problem.matrix().clone();
            let mut x_rng = rng::stream(sys_seed, StreamId::StartPoint);
            let x0 = rng::standard_normal(&mut x_rng, n);
            let cfg = SolverConfig {
                method: Method::Greedy,
                init: InitScheme::ScaledIdentity { scale: 2.0 },
                max_iters: 5 * n,
                ..SolverConfig::default()
            };
            let mut run = match SolverRun::new(&problem, &x0, cfg) {
                Ok(r) => r,
                Err(e) => return CheckResult::new("greedy contraction", false, e.to_string()),
            };
            let factor = 1.0 - 1.0 / n as f64;
            loop {
                let gap_sq = {
                    let b = run.pair().and_then(|p| p.jacobian()).expect("greedy tracks B");
                    let g = b.sub(&a).frobenius_norm();
                    g * g
                };
                if run.k() >= cfg.max_iters
                    || run.residual_norm() <= cfg.tol_residual
                    || gap_sq == 0.0
                {
                    break;
                }
                if let StepOutcome::Terminal(_) = run.step() {
                    break;
                }
                let next_sq = {
                    let b = run.pair().and_then(|p| p.jacobian()).expect("greedy tracks B");
                    let g = b.sub(&a).frobenius_norm();
                    g * g
                };
                worst = worst.min((factor * gap_sq - next_sq) / (factor * gap_sq));
                steps += 1;
            }
        }
    }
    CheckResult::new(
        "greedy contraction",
        worst >= -1e-12,
        format!("{steps} steps over {systems} linear systems, worst relative slack {worst:.3e}"),
    )
}

/// Averaging the squared gap over all `n` basis updates reproduces the
/// `1 − 1/n` contraction factor exactly (relative `1e-10`), and a
/// Monte-Carlo average over uniform draws agrees within 4 standard errors.
pub fn check_random_contraction_expectation(instances: usize, seed: u64) -> CheckResult {
    let mut rng = rng::stream(seed, StreamId::Sampling);
    let mut worst = 0.0_f64;
    for i in 0..instances {
        let n = 2 + i % 7;
        let b = random_square(&mut rng, n);
        let a = random_square(&mut rng, n);
        let gap_sq = {
            let g = b.sub(&a).frobenius_norm();
            g * g
        };
        let mut acc = 0.0;
        for j in 0..n {
            let u = DenseVector::basis(n, j);
            let g = broyd_update(&b, &a, &u).unwrap().sub(&a).frobenius_norm();
            acc += g * g;
        }
        let mean = acc / n as f64;
        let expect = (1.0 - 1.0 / n as f64) * gap_sq;
        worst = worst.max((mean - expect).abs() / expect);
    }
    CheckResult::new(
        "isotropic basis contraction (expectation)",
        worst <= 1e-10,
        format!("{instances} instances, worst relative deviation {worst:.3e}"),
    )
}

/// Monte-Carlo companion of [`check_random_contraction_expectation`].
pub fn check_random_contraction_monte_carlo(draws: usize, seed: u64) -> CheckResult {
    let n = 6usize;
    let mut rng = rng::stream(seed, StreamId::Sampling);
    let b = random_square(&mut rng, n);
    let a = random_square(&mut rng, n);
    let gap_sq = {
        let g = b.sub(&a).frobenius_norm();
        g * g
    };
    // The n possible post-update squared gaps, indexed by basis choice.
    let outcomes: Vec<f64> = (0..n)
        .map(|j| {
            let u = DenseVector::basis(n, j);
            let g = broyd_update(&b, &a, &u).unwrap().sub(&a).frobenius_norm();
            g * g
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let v = outcomes[rng.random_range(0..n)];
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    let std_err = (var / draws as f64).sqrt();
    let expect = (1.0 - 1.0 / n as f64) * gap_sq;
    let dev = (mean - expect).abs();
    CheckResult::new(
        "isotropic basis contraction (monte carlo)",
        dev <= 4.0 * std_err,
        format!("{draws} draws, |mean − expected| = {dev:.3e} vs 4·SE = {:.3e}", 4.0 * std_err),
    )
}

/// The update never increases the weighted gap `C(B − A)` in Frobenius or
/// spectral norm, for any weighting `C` and direction `u` (slack `1e-12`).
pub fn check_update_monotonicity(tuples: usize, seed: u64) -> CheckResult {
    let mut rng = rng::stream(seed, StreamId::Sampling);
    let mut worst = f64::INFINITY;
    for i in 0..tuples {
        let n = 2 + i % 7;
        let b = random_square(&mut rng, n);
        let a = random_square(&mut rng, n);
        let c = random_square(&mut rng, n);
        let u = rng::unit_sphere(&mut rng, n);
        let before = c.matmul(&b.sub(&a));
        let after = c.matmul(&broyd_update(&b, &a, &u).unwrap().sub(&a));
        let (f0, f1) = (before.frobenius_norm(), after.frobenius_norm());
        worst = worst.min((f0 - f1) / f0.max(1e-300));
        let (s0, s1) = (
            before.spectral_norm().unwrap_or(f64::NAN),
            after.spectral_norm().unwrap_or(f64::NAN),
        );
        worst = worst.min((s0 - s1) / s0.max(1e-300));
    }
    CheckResult::new(
        "weighted update monotonicity",
        worst >= -1e-12,
        format!("{tuples} tuples × 2 norms, worst relative slack {worst:.3e}"),
    )
}

/// The weighted gap's Gram matrix loses exactly the rank-one piece along the
/// update direction: with `G = C(B−A)`,
/// `G₊G₊ᵀ = GGᵀ − G u uᵀ Gᵀ / (uᵀu)` entrywise (`1e-10` against the scale).
pub fn check_gram_identity(tuples: usize, seed: u64) -> CheckResult {
    let mut rng = rng::stream(seed, StreamId::Sampling);
    let mut worst = 0.0_f64;
    for i in 0..tuples {
        let n = 2 + i % 7;
        let b = random_square(&mut rng, n);
        let a = random_square(&mut rng, n);
        let c = random_square(&mut rng, n);
        let u = rng::unit_sphere(&mut rng, n);
        let g = c.matmul(&b.sub(&a));
        let g_next = c.matmul(&broyd_update(&b, &a, &u).unwrap().sub(&a));
        let gu = g.matvec(&u);
        let mut expect = g.matmul(&g.transpose());
        expect.add_scaled_outer(-1.0 / u.dot(&u), &gu, &gu);
        let actual = g_next.matmul(&g_next.transpose());
        let scale = expect.frobenius_norm().max(1.0);
        worst = worst.max(actual.max_abs_diff(&expect) / scale);
    }
    CheckResult::new(
        "gram identity",
        worst <= 1e-10,
        format!("{tuples} tuples, worst entrywise deviation {worst:.3e}"),
    )
}

/// After an update with pair `(y, u)`, the new matrix maps `u` to `y`
/// exactly (relative `1e-12`).
pub fn check_secant_equation(tuples: usize, seed: u64) -> CheckResult {
    let mut rng = rng::stream(seed, StreamId::Sampling);
    let mut worst = 0.0_f64;
    for i in 0..tuples {
        let n = 2 + i % 7;
        let b = random_square(&mut rng, n);
        let u = rng::unit_sphere(&mut rng, n);
        let y = rng::standard_normal(&mut rng, n);
        let b_next = crate::broyden::secant_update(&b, &y, &u).unwrap();
        let dev = b_next.matvec(&u).sub(&y).norm() / y.norm().max(1e-300);
        worst = worst.max(dev);
    }
    CheckResult::new(
        "secant equation",
        worst <= 1e-12,
        format!("{tuples} updates, worst relative residual {worst:.3e}"),
    )
}

/// On converged runs of every update-based method (debug mode), the tracked
/// matrix and its maintained inverse stay consistent:
/// `‖B_k·H_k − I‖_F ≤ 1e-8·max(1, ‖B_k‖_F)` at all iterations.
pub fn check_inverse_maintenance(seed: u64) -> CheckResult {
    let problems = [
        ProblemSpec::Linear { n: 10, seed },
        ProblemSpec::LogSumExp { n: 8, seed, m: 12, gamma: 1.0 },
        ProblemSpec::HEquation { n: 12, seed, c: 0.9 },
    ];
    let methods = [Method::Classical, Method::Bad, Method::Greedy, Method::Random];
    let mut worst = 0.0_f64;
    let mut converged = 0usize;
    let mut attempted = 0usize;
    for spec in &problems {
        let problem = match spec.build() {
            Ok(p) => p,
            Err(e) => return CheckResult::new("inverse maintenance", false, e.to_string()),
        };
        let mut x_rng = rng::stream(seed, StreamId::StartPoint);
        let x0 = sample_start(&problem, StartScheme::NearSolution { rho: 0.1 }, &mut x_rng)
            .expect("generated problems store roots");
        for method in methods {
            attempted += 1;
            let cfg = SolverConfig {
                method,
                debug_checks: true,
                max_iters: 200,
                seed,
                ..SolverConfig::default()
            };
            let trace = solve(&problem, &x0, cfg);
            if trace.status() == SolveStatus::Converged {
                converged += 1;
                worst = worst.max(trace.meta.max_inverse_consistency_error.unwrap_or(0.0));
            }
        }
    }
    CheckResult::new(
        "inverse maintenance",
        converged == attempted && worst <= 1e-8,
        format!(
            "{converged}/{attempted} cells converged, max normalized ‖B·H − I‖_F = {worst:.3e}"
        ),
    )
}

/// On linear systems the greedy gap obeys the iterated envelope
/// `σ_k ≤ (1 − 1/n)^{k/2}·σ₀` deterministically for `k ≤ 5n`.
pub fn check_linear_sigma_envelope(dims: &[usize], seed: u64) -> CheckResult {
    let mut worst = f64::INFINITY;
    let mut checked = 0usize;
    for &n in dims {
        let problem = match LinearSystem::generate(n, seed) {
            Ok(p) => p,
            Err(e) => return CheckResult::new("linear-problem gap envelope", false, e.to_string()),
        };
        let a = problem.matrix().clone();
        let mut x_rng = rng::stream(seed ^ 1, StreamId::StartPoint);
        let x0 = rng::standard_normal(&mut x_rng, n);
        let cfg = SolverConfig {
            method: Method::Greedy,
            init: InitScheme::ScaledIdentity { scale: 3.0 },
            max_iters: 5 * n,
            ..SolverConfig::default()
        };
        let mut run = match SolverRun::new(&problem, &x0, cfg) {
            Ok(r) => r,
            Err(e) => return CheckResult::new("linear-problem gap envelope", false, e.to_string()),
        };
        let sigma0 = run
            .pair()
            .and_then(|p| p.jacobian())
            .map(|b| b.sub(&a).frobenius_norm())
            .expect("greedy tracks B");
        let factor = 1.0 - 1.0 / n as f64;
        loop {
            let sigma = run
                .pair()
                .and_then(|p| p.jacobian())
                .map(|b| b.sub(&a).frobenius_norm())
                .expect("greedy tracks B");
            let envelope = factor.powf(run.k() as f64 / 2.0) * sigma0;
            worst = worst.min((envelope - sigma) / envelope.max(1e-300));
            checked += 1;
            if run.k() >= 5 * n || run.residual_norm() <= cfg.tol_residual {
                break;
            }
            if let StepOutcome::Terminal(_) = run.step() {
                break;
            }
        }
    }
    CheckResult::new(
        "linear-problem gap envelope",
        worst >= -1e-12,
        format!("{checked} iterates across n ∈ {dims:?}, worst relative slack {worst:.3e}"),
    )
}

/// Integral-equation benchmark: with an exact-Jacobian start near the root,
/// greedy and randomized runs converge to `1e-12` within 50 iterations and
/// the error ratios of the final iterations shrink strictly.
pub fn check_superlinear_hequation(grid: usize, seed: u64) -> CheckResult {
    let problem = match (ProblemSpec::HEquation { n: grid, seed, c: 0.9 }).build() {
        Ok(p) => p,
        Err(e) => return CheckResult::new("h-equation superlinear signature", false, e.to_string()),
    };
    let mut x_rng = rng::stream(seed, StreamId::StartPoint);
    let x0 = sample_start(&problem, StartScheme::NearSolution { rho: 0.1 }, &mut x_rng)
        .expect("root stored");
    let mut details = Vec::new();
    let mut ok = true;
    for method in [Method::Greedy, Method::Random] {
        let cfg = SolverConfig { method, max_iters: 50, seed, ..SolverConfig::default() };
        let trace = solve(&problem, &x0, cfg);
        let converged = trace.status() == SolveStatus::Converged;
        let signature = theory::superlinear_signature(&trace.rows, 5);
        ok &= converged && signature.pass;
        details.push(format!(
            "{}: {} in {} iters, ratio decrease {:.3e}",
            method.name(),
            if converged { "converged" } else { "stalled" },
            trace.meta.iterations,
            signature.worst_slack
        ));
    }
    CheckResult::new("h-equation superlinear signature", ok, details.join("; "))
}

/// Greedy Jacobian-gap decay under the initialization gate:
/// `c·‖B_k − J(x_k)‖₂ ≤ e·(1 − 1/n)^{k/2}` along the run.
pub fn check_jacobian_decay_envelope(seed: u64) -> CheckResult {
    let n = 16usize;
    let problem = match (ProblemSpec::HEquation { n, seed, c: 0.5 }).build() {
        Ok(p) => p,
        Err(e) => return CheckResult::new("jacobian decay envelope (greedy)", false, e.to_string()),
    };
    let mut x_rng = rng::stream(seed, StreamId::StartPoint);
    let x0 = sample_start(&problem, StartScheme::NearSolution { rho: 1e-4 }, &mut x_rng)
        .expect("root stored");
    let mut est_rng = rng::stream(seed ^ 2, StreamId::Sampling);
    let est = match estimate_constants(&problem, 0.1, 30, &mut est_rng) {
        Ok(e) => e,
        Err(e) => return CheckResult::new("jacobian decay envelope (greedy)", false, e.to_string()),
    };
    let r0 = x0.sub(&problem.known_solution().unwrap().x).norm();
    let constants = match ProblemConstants::from_estimates(&est, n, r0, 0.0, GapNorm::Spectral) {
        Ok(k) => k,
        Err(e) => return CheckResult::new("jacobian decay envelope (greedy)", false, e.to_string()),
    };
    let cfg = SolverConfig { method: Method::Greedy, max_iters: 80, seed, ..SolverConfig::default() };
    match theory::sigma_linear_audit(&problem, &x0, cfg, &constants) {
        Ok(audit) => CheckResult::from_audit("jacobian decay envelope (greedy)", &audit),
        Err(e) => CheckResult::new("jacobian decay envelope (greedy)", false, e.to_string()),
    }
}

/// One-step recursions for the recorded gap and error sequences hold along a
/// greedy run with sampled constants (advisory).
pub fn check_recursion_audits(seed: u64) -> CheckResult {
    let n = 8usize;
    let problem = match (ProblemSpec::LogSumExp { n, seed, m: 12, gamma: 1.0 }).build() {
        Ok(p) => p,
        Err(e) => return CheckResult::new("gap and error recursions", false, e.to_string()),
    };
    let mut x_rng = rng::stream(seed, StreamId::StartPoint);
    let x0 = sample_start(&problem, StartScheme::NearSolution { rho: 0.05 }, &mut x_rng)
        .expect("root stored");
    let cfg = SolverConfig {
        method: Method::Greedy,
        record_sigma: true,
        max_iters: 120,
        seed,
        ..SolverConfig::default()
    };
    let trace = solve(&problem, &x0, cfg);
    if trace.status() != SolveStatus::Converged {
        return CheckResult::new("gap and error recursions", false, "driver run did not converge");
    }
    let mut est_rng = rng::stream(seed ^ 3, StreamId::Sampling);
    let est = match estimate_constants(&problem, 0.5, 40, &mut est_rng) {
        Ok(e) => e,
        Err(e) => return CheckResult::new("gap and error recursions", false, e.to_string()),
    };
    let r0 = trace.rows[0].r_k.unwrap_or(0.0);
    let sigma0 = trace.rows[0].sigma_abs.unwrap_or(0.0);
    let constants =
        match ProblemConstants::from_estimates(&est, n, r0, sigma0, GapNorm::Frobenius) {
            Ok(k) => k,
            Err(e) => return CheckResult::new("gap and error recursions", false, e.to_string()),
        };
    let sigma = theory::sigma_recursion_audit(&trace.rows, &constants);
    let r = theory::r_recursion_audit(&trace.rows, &constants);
    CheckResult::new(
        "gap and error recursions",
        sigma.pass && r.pass,
        format!("gap: {}; error: {}; advisory: sampled constants", sigma.detail, r.detail),
    )
}

/// Fixed spot values of the scalar bound evaluators.
pub fn check_bound_spot_values() -> CheckResult {
    let checks = [
        ("greedy k=0", theory::greedy_rate_bound(0, 2), 1.0),
        ("greedy (4,2)", theory::greedy_rate_bound(4, 2), 6.8247687541430295),
        ("random (2,2,0.5)", theory::random_rate_bound(2, 2, 0.5), 6177.934378045477),
        (
            "jacobian greedy (11,2,1)",
            theory::jacobian_rate_bound_greedy(11, 2, 1.0).unwrap_or(f64::NAN),
            0.1201322196299724,
        ),
        ("classical k=4", theory::original_broyden_bound(4), 0.125),
        ("classical k=9", theory::original_broyden_bound(9), 1.0161052685058171e-4),
        ("crossover n=2", theory::crossover_iteration(2) as f64, 29.0),
        ("crossover n=10", theory::crossover_iteration(10) as f64, 266.0),
    ];
    let mut worst = 0.0_f64;
    let mut worst_name = "";
    for (name, got, want) in checks {
        let dev = (got - want).abs() / want.abs().max(1e-300);
        if dev > worst {
            worst = dev;
            worst_name = name;
        }
    }
    CheckResult::new(
        "bound spot values",
        worst <= 1e-12,
        format!("8 pinned values, worst relative deviation {worst:.3e} ({worst_name})"),
    )
}

/// Log-space and direct evaluation of the envelopes agree where the direct
/// product stays in range.
pub fn check_log_direct_agreement() -> CheckResult {
    let mut worst = 0.0_f64;
    for n in [2usize, 3, 10] {
        for k in 0usize..40 {
            let direct = std::f64::consts::E.powi(k as i32)
                * (1.0 - 1.0 / n as f64).powf((k * k.saturating_sub(1)) as f64 / 4.0);
            let via_log = theory::greedy_rate_bound(k, n);
            worst = worst.max((direct - via_log).abs() / direct.max(1e-300));
        }
    }
    for k in 1usize..40 {
        let direct = 2.0 * (k as f64).powf(-(k as f64) / 2.0);
        worst = worst.max((direct - theory::original_broyden_bound(k)).abs() / direct);
    }
    CheckResult::new(
        "log-space evaluation",
        worst <= 1e-12,
        format!("159 evaluations, worst relative deviation {worst:.3e}"),
    )
}

/// Past the crossover iteration the greedy envelope stays at or below the
/// classical one, for every dimension up to `max_n` and a `mult`-fold
/// iteration horizon.
pub fn check_crossover_table(max_n: usize, mult: usize) -> CheckResult {
    let mut worst = f64::INFINITY;
    let mut checked = 0usize;
    for n in 2..=max_n {
        let k0 = theory::crossover_iteration(n);
        for k in k0..=mult * k0 {
            let slack = theory::original_broyden_bound_log(k) - theory::greedy_rate_bound_log(k, n);
            worst = worst.min(slack);
            checked += 1;
        }
    }
    CheckResult::new(
        "crossover table",
        worst >= 0.0,
        format!("{checked} (n, k) pairs, min log-margin {worst:.3e}"),
    )
}

/// The minimal linear rate lands in its two-sided bracket and its binding
/// constraint is tight (`1e-10` slack).
pub fn check_qm_bracket(trials: usize, seed: u64) -> CheckResult {
    let mut rng = rng::stream(seed, StreamId::Sampling);
    let mut worst_bracket = f64::INFINITY;
    let mut worst_slack = f64::INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(2..40usize);
        let c: f64 = rng.random_range(0.1..3.0);
        let sigma0 = rng.random_range(0.0..0.3) / c;
        let budget = (1.0 / 3.0 - c * sigma0) * rng.random_range(0.05..0.95);
        let m: f64 = rng.random_range(0.1..4.0);
        let r0 = budget / (48.0 * (n as f64).sqrt() * c * m);
        let k = match ProblemConstants::new(c, m, n, r0, sigma0) {
            Ok(k) => k,
            Err(e) => return CheckResult::new("minimal linear rate bracket", false, e.to_string()),
        };
        let q = match theory::compute_qm(&k) {
            Ok(q) => q,
            Err(e) => return CheckResult::new("minimal linear rate bracket", false, e.to_string()),
        };
        let theta = c * sigma0 + ((n as f64).sqrt() * c * m * r0).sqrt();
        worst_bracket = worst_bracket.min((q - 0.5 * theta).min(7.0 * theta - q));
        // Both defining constraints hold at q with at most 1e-10 slack on
        // the binding one.
        let gap_ok = c * sigma0 <= q / (1.0 + q) + 1e-10;
        let margin = q * (1.0 - q) * (q / (1.0 + q) - c * sigma0);
        let rhs = 12.0 * (n as f64).sqrt() * c * m * r0;
        let dist_ok = margin >= rhs - 1e-10;
        if !(gap_ok && dist_ok) {
            worst_slack = f64::NEG_INFINITY;
        }
        worst_slack = worst_slack.min(margin - rhs);
    }
    CheckResult::new(
        "minimal linear rate bracket",
        worst_bracket >= -1e-12 && worst_slack >= -1e-10,
        format!(
            "{trials} feasible constant sets, min bracket margin {worst_bracket:.3e}, \
             min constraint slack {worst_slack:.3e}"
        ),
    )
}

/// Numerically computed inverses of perturbed identities stay under the
/// geometric-series bounds (`1e-10` slack).
pub fn check_neumann_numeric(trials: usize, seed: u64) -> CheckResult {
    let mut rng = rng::stream(seed, StreamId::Sampling);
    let mut worst = f64::INFINITY;
    for i in 0..trials {
        let n = 2 + i % 7;
        let target: f64 = rng.random_range(0.01..0.9);
        let raw = random_square(&mut rng, n);
        let spectral = match raw.spectral_norm() {
            Ok(s) if s > 0.0 => s,
            _ => continue,
        };
        let e = raw.scale(target / spectral);
        let inv = match DenseMatrix::identity(n).sub(&e).inverse() {
            Ok(m) => m,
            Err(err) => {
                return CheckResult::new(
                    "perturbed-identity inverse bound",
                    false,
                    err.to_string(),
                )
            }
        };
        let (inv_bound, dev_bound) = theory::neumann_inverse_bound(target).unwrap();
        let inv_norm = inv.spectral_norm().unwrap_or(f64::INFINITY);
        let dev_norm = inv
            .sub(&DenseMatrix::identity(n))
            .spectral_norm()
            .unwrap_or(f64::INFINITY);
        worst = worst.min(inv_bound - inv_norm);
        worst = worst.min(dev_bound - dev_norm);
    }
    CheckResult::new(
        "perturbed-identity inverse bound",
        worst >= -1e-10,
        format!("{trials} perturbations, min slack {worst:.3e}"),
    )
}

/// Analytic Jacobians of the three families agree with central finite
/// differences (`1e-5` relative Frobenius; linear exact to `1e-12`).
pub fn check_fd_jacobian_agreement(points: usize, seed: u64) -> CheckResult {
    // (spec, tolerance, step). Central differences are exact for affine maps
    // at any step, so the linear case takes a large step to suppress
    // rounding; the nonlinear families use the usual small step.
    let cases: [(ProblemSpec, f64, f64); 3] = [
        (ProblemSpec::Linear { n: 10, seed }, 1e-12, 0.5),
        (ProblemSpec::LogSumExp { n: 20, seed, m: 30, gamma: 1.0 }, 1e-5, 1e-6),
        (ProblemSpec::HEquation { n: 50, seed, c: 0.9 }, 1e-5, 1e-6),
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for (spec, tol, step) in &cases {
        let problem = match spec.build() {
            Ok(p) => p,
            Err(e) => {
                return CheckResult::new("analytic vs finite-difference jacobians", false, e.to_string())
            }
        };
        let n = problem.dim();
        let mut x_rng = rng::stream(seed, StreamId::Sampling);
        let mut worst = 0.0_f64;
        for _ in 0..points {
            let x = match spec {
                // Stay inside the integral-equation domain near its root.
                ProblemSpec::HEquation { .. } => {
                    let sol = problem.known_solution().unwrap().x.clone();
                    let mut x = sol;
                    x.axpy(0.1, &rng::unit_sphere(&mut x_rng, n));
                    x
                }
                _ => rng::standard_normal(&mut x_rng, n),
            };
            let analytic = problem.jacobian(&x).unwrap();
            let fd = finite_diff_jacobian(&problem, &x, *step).unwrap();
            let rel = fd.sub(&analytic).frobenius_norm() / analytic.frobenius_norm();
            worst = worst.max(rel);
        }
        ok &= worst <= *tol;
        detail.push(format!("{}: {worst:.3e} (tol {tol:.0e})", spec.kind()));
    }
    CheckResult::new("analytic vs finite-difference jacobians", ok, detail.join("; "))
}

/// Single-column Jacobian evaluation matches the corresponding column of the
/// full Jacobian (`1e-13`).
pub fn check_jacobian_columns(seed: u64) -> CheckResult {
    let specs = [
        ProblemSpec::Linear { n: 7, seed },
        ProblemSpec::LogSumExp { n: 6, seed, m: 9, gamma: 0.5 },
        ProblemSpec::HEquation { n: 9, seed, c: 0.7 },
    ];
    let mut worst = 0.0_f64;
    for spec in &specs {
        let problem = match spec.build() {
            Ok(p) => p,
            Err(e) => return CheckResult::new("jacobian columns", false, e.to_string()),
        };
        let n = problem.dim();
        let x = match spec {
            ProblemSpec::HEquation { .. } => problem.known_solution().unwrap().x.clone(),
            _ => {
                let mut x_rng = rng::stream(seed ^ 5, StreamId::Sampling);
                rng::standard_normal(&mut x_rng, n)
            }
        };
        let full = problem.jacobian(&x).unwrap();
        for j in 0..n {
            let col = problem.jacobian_column(&x, j).unwrap();
            let dev = col.sub(&full.column(j)).norm();
            worst = worst.max(dev / full.frobenius_norm().max(1.0));
        }
    }
    CheckResult::new(
        "jacobian columns",
        worst <= 1e-13,
        format!("3 families, worst relative column deviation {worst:.3e}"),
    )
}

/// First-order expansion around the root: `‖F(x) − J(x*)(x − x*)‖` is
/// controlled by the sampled curvature constant times `‖x − x*‖²` (the
/// constant carries its safety factor; advisory).
pub fn check_taylor_remainder(seed: u64) -> CheckResult {
    let specs = [
        ProblemSpec::HEquation { n: 20, seed, c: 0.5 },
        ProblemSpec::LogSumExp { n: 10, seed, m: 15, gamma: 1.0 },
    ];
    let mut worst = f64::INFINITY;
    let mut samples = 0usize;
    for spec in &specs {
        let problem = match spec.build() {
            Ok(p) => p,
            Err(e) => return CheckResult::new("taylor remainder", false, e.to_string()),
        };
        let n = problem.dim();
        let sol = problem.known_solution().unwrap().x.clone();
        let j_star = problem.jacobian(&sol).unwrap();
        let mut est_rng = rng::stream(seed ^ 7, StreamId::Sampling);
        let est = match estimate_constants(&problem, 0.1, 40, &mut est_rng) {
            Ok(e) => e,
            Err(e) => return CheckResult::new("taylor remainder", false, e.to_string()),
        };
        let m_safe = crate::theory::LIPSCHITZ_SAFETY_FACTOR * est.lipschitz;
        let mut x_rng = rng::stream(seed ^ 8, StreamId::Sampling);
        for _ in 0..40 {
            // Radii spread log-uniformly over [1e-4, 1e-1].
            let exp: f64 = x_rng.random_range(-4.0..-1.0);
            let radius = 10f64.powf(exp);
            let mut x = sol.clone();
            x.axpy(radius, &rng::unit_sphere(&mut x_rng, n));
            let step = x.sub(&sol);
            let remainder = problem.eval(&x).unwrap().sub(&j_star.matvec(&step)).norm();
            let bound = m_safe / 2.0 * step.norm() * step.norm();
            worst = worst.min((bound - remainder) / bound.max(1e-300));
            samples += 1;
        }
    }
    CheckResult::new(
        "taylor remainder",
        worst >= 0.0,
        format!(
            "{samples} samples, min relative slack {worst:.3e}; advisory: sampled constants"
        ),
    )
}

/// The regularized softmax model's Jacobian is symmetric positive definite
/// (it is a strongly convex function's second derivative).
pub fn check_softmax_curvature(seed: u64) -> CheckResult {
    let problem = match (ProblemSpec::LogSumExp { n: 8, seed, m: 12, gamma: 0.7 }).build() {
        Ok(p) => p,
        Err(e) => return CheckResult::new("softmax model curvature", false, e.to_string()),
    };
    let mut x_rng = rng::stream(seed ^ 9, StreamId::Sampling);
    let mut min_quad = f64::INFINITY;
    let mut max_asym = 0.0_f64;
    for _ in 0..10 {
        let x = rng::standard_normal(&mut x_rng, 8);
        let j = problem.jacobian(&x).unwrap();
        max_asym = max_asym.max(j.sub(&j.transpose()).frobenius_norm());
        for _ in 0..10 {
            let v = rng::unit_sphere(&mut x_rng, 8);
            min_quad = min_quad.min(v.dot(&j.matvec(&v)));
        }
    }
    // γ lower-bounds the curvature along every direction.
    CheckResult::new(
        "softmax model curvature",
        max_asym <= 1e-12 && min_quad >= 0.7 - 1e-9,
        format!("min vᵀJv = {min_quad:.6}, max asymmetry {max_asym:.3e}"),
    )
}
