//! Iteration driver for Newton and the Broyden-family methods.
//!
//! The driver is status-oriented: [`solve`] never returns an error. Numerical
//! failures (singular initialization, degenerate updates, poles, non-finite
//! iterates) become terminal statuses recorded in the trace, so a batch of
//! runs can always be compared row by row afterwards.
//!
//! The inverse approximation `H ≈ B⁻¹` is the working representation: one
//! O(n³) inversion happens at initialization and each step costs O(n²) plus
//! problem evaluations. Methods that need the forward matrix `B` (greedy
//! direction selection, σ diagnostics, debug consistency cross-checks)
//! maintain it by the matching rank-one update.

pub mod trace;

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::broyden::{
    bad_broyden_update, greedy_direction, random_direction, DirectionKind, JacobianPair,
};
use crate::densealg::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::problems::{finite_diff_jacobian, System};
use crate::rng::{self, StreamId};

pub use trace::{IterationTrace, TraceMeta, TraceRow, TRACE_CSV_HEADER, TRACE_SCHEMA_VERSION};

/// Default residual tolerance `‖F(x)‖ ≤ tol` for declaring convergence.
pub const DEFAULT_TOL_RESIDUAL: f64 = 1e-12;

/// Default iteration cap.
pub const DEFAULT_MAX_ITERS: usize = 500;

/// Iterations whose residual norm is below this floor are excluded from
/// ratio-based convergence audits; at that scale consecutive errors are
/// rounding noise, not contraction information.
pub const RATIO_AUDIT_FLOOR: f64 = 1e-14;

/// Root-finding method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Newton's method (fresh Jacobian and LU solve every step).
    Newton,
    /// Broyden's classical ("good") method: secant update along the step.
    Classical,
    /// Broyden's "bad" method: rank-one update applied to the inverse.
    Bad,
    /// Greedy basis-direction update with steps from the maintained inverse.
    Greedy,
    /// Randomized direction update (basis, sphere, or Gaussian rule).
    Random,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Newton => "newton",
            Self::Classical => "classical",
            Self::Bad => "bad",
            Self::Greedy => "greedy",
            Self::Random => "random",
        }
    }
}

/// How the initial approximate Jacobian `B₀` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme")]
pub enum InitScheme {
    /// `B₀ = J(x₀)` — the "good initialization" of the experiments.
    #[serde(rename = "exact-j0")]
    ExactJacobianAtX0,
    /// `B₀ = s·I`.
    #[serde(rename = "scaled-identity")]
    ScaledIdentity { scale: f64 },
    /// `B₀ = s·J(x₀)`.
    #[serde(rename = "scaled-j0")]
    ScaledJacobianAtX0 { scale: f64 },
    /// `B₀ = s·J(x*)` — consults the stored root; flagged as oracle-assisted
    /// in trace metadata.
    #[serde(rename = "scaled-jstar")]
    ScaledJacobianAtStar { scale: f64 },
}

impl InitScheme {
    /// True when the scheme reads the stored root.
    pub fn is_oracle_assisted(self) -> bool {
        matches!(self, Self::ScaledJacobianAtStar { .. })
    }
}

/// Terminal (and transient) run states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    /// Still iterating (never appears in a finished trace).
    Running,
    /// `‖F(x_k)‖ ≤ tol_residual`.
    Converged,
    /// Iteration cap reached before convergence.
    MaxIters,
    /// A factorization or rank-one update degenerated.
    Degenerate,
    /// An evaluation left the problem domain or produced non-finite values.
    DomainError,
}

impl SolveStatus {
    /// Process exit code the CLI maps each terminal status to.
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Converged => 0,
            Self::MaxIters => 2,
            Self::Degenerate | Self::DomainError | Self::Running => 3,
        }
    }
}

/// Maps a numerical error to the terminal status its run ends with.
fn classify_failure(err: &Error) -> SolveStatus {
    match err {
        Error::SingularMatrix(_)
        | Error::ZeroDirection
        | Error::DegenerateUpdate(_)
        | Error::NonConvergence(_) => SolveStatus::Degenerate,
        _ => SolveStatus::DomainError,
    }
}

/// Distribution of the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case")]
pub enum StartScheme {
    /// Uniform on the unit sphere.
    Sphere,
    /// Standard normal entries.
    Normal,
    /// `x₀ = x* + ρ·s·ε` with `ε` uniform on the sphere and `s = ‖x*‖`
    /// (or 1 when the root is the origin, so the scheme stays usable).
    NearSolution { rho: f64 },
}

/// Draws a starting point for `sys` from the given scheme.
pub fn sample_start(
    sys: &dyn System,
    scheme: StartScheme,
    rng: &mut ChaCha8Rng,
) -> Result<DenseVector> {
    let n = sys.dim();
    match scheme {
        StartScheme::Sphere => Ok(rng::unit_sphere(rng, n)),
        StartScheme::Normal => Ok(rng::standard_normal(rng, n)),
        StartScheme::NearSolution { rho } => {
            let sol = sys.known_solution().ok_or_else(|| {
                Error::InvalidConfig("near-solution start needs a known root".into())
            })?;
            let norm = sol.x.norm();
            let scale = if norm > 0.0 { norm } else { 1.0 };
            let mut x = sol.x.clone();
            x.axpy(rho * scale, &rng::unit_sphere(rng, n));
            Ok(x)
        }
    }
}

/// Full configuration of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Direction rule for [`Method::Random`]; other methods ignore it.
    pub direction: DirectionKind,
    pub init: InitScheme,
    /// Convergence threshold on `‖F(x_k)‖`; must be positive.
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Seed of the per-run direction stream.
    pub seed: u64,
    /// Record `σ_k = ‖B_k − J(x_k)‖_F` each iteration. Purely observational
    /// (one extra Jacobian evaluation per iteration); iterates are bitwise
    /// identical with it on or off.
    pub record_sigma: bool,
    /// Track `‖B_k·H_k − I‖_F` every iteration and report the maximum.
    pub debug_checks: bool,
    /// Replace analytic Jacobian actions with central differences in the
    /// update targets. The convergence guarantees assume exact actions, so
    /// this mode is for experimentation only.
    pub fd_jacobian: bool,
    /// Step size for [`fd_jacobian`](Self::fd_jacobian).
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Classical,
            direction: DirectionKind::UniformBasis,
            init: InitScheme::ExactJacobianAtX0,
            tol_residual: DEFAULT_TOL_RESIDUAL,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            record_sigma: false,
            debug_checks: false,
            fd_jacobian: false,
            fd_step: 1e-6,
        }
    }
}

/// What one call to [`SolverRun::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// A new iterate was accepted.
    Stepped { direction_index: Option<usize>, step_norm: f64 },
    /// The run is over; no new iterate.
    Terminal(SolveStatus),
}

/// An in-flight run, stepped manually. [`solve`] drives it to completion and
/// records a trace; audits drive it directly to inspect matrices between
/// steps.
pub struct SolverRun<'a> {
    sys: &'a dyn System,
    cfg: SolverConfig,
    rng: ChaCha8Rng,
    x: DenseVector,
    f: DenseVector,
    pair: Option<JacobianPair>,
    k: usize,
    status: SolveStatus,
    failure: Option<String>,
    max_consistency_err: Option<f64>,
}

impl<'a> SolverRun<'a> {
    /// Validates the configuration, evaluates `F(x₀)` and builds `B₀`/`H₀`.
    pub fn new(sys: &'a dyn System, x0: &DenseVector, cfg: SolverConfig) -> Result<Self> {
        if !(cfg.tol_residual > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol_residual must be positive, got {}",
                cfg.tol_residual
            )));
        }
        if cfg.fd_jacobian && !(cfg.fd_step > 0.0) {
            return Err(Error::InvalidConfig("fd_step must be positive".into()));
        }
        if x0.len() != sys.dim() {
            return Err(Error::InvalidConfig(format!(
                "x0 has length {}, problem dimension is {}",
                x0.len(),
                sys.dim()
            )));
        }
        if !x0.is_finite() {
            return Err(Error::NonFinite("starting point".into()));
        }
        if cfg.method == Method::Random && !cfg.direction.is_random() {
            return Err(Error::InvalidConfig(format!(
                "random method needs a random direction rule, got {}",
                cfg.direction.name()
            )));
        }

        let f = sys.eval(x0)?;
        let mut run = Self {
            sys,
            cfg,
            rng: rng::stream(cfg.seed, StreamId::Directions),
            x: x0.clone(),
            f,
            pair: None,
            k: 0,
            status: SolveStatus::Running,
            failure: None,
            max_consistency_err: None,
        };
        if cfg.method != Method::Newton {
            run.pair = Some(run.initial_pair(x0)?);
            run.note_consistency();
        }
        Ok(run)
    }

    fn initial_pair(&self, x0: &DenseVector) -> Result<JacobianPair> {
        let n = self.sys.dim();
        let b0 = match self.cfg.init {
            InitScheme::ExactJacobianAtX0 => self.jacobian_action(x0)?,
            InitScheme::ScaledIdentity { scale } => {
                if scale == 0.0 {
                    return Err(Error::InvalidConfig("identity scale must be nonzero".into()));
                }
                DenseMatrix::scaled_identity(n, scale)
            }
            InitScheme::ScaledJacobianAtX0 { scale } => self.jacobian_action(x0)?.scale(scale),
            InitScheme::ScaledJacobianAtStar { scale } => {
                let sol = self.sys.known_solution().ok_or_else(|| {
                    Error::InvalidConfig("scaled-jstar init needs a known root".into())
                })?;
                self.jacobian_action(&sol.x)?.scale(scale)
            }
        };
        if self.tracks_forward_matrix() {
            JacobianPair::from_jacobian(b0)
        } else {
            JacobianPair::inverse_only(&b0)
        }
    }

    /// Whether the forward matrix `B` is maintained alongside the inverse.
    fn tracks_forward_matrix(&self) -> bool {
        matches!(self.cfg.method, Method::Greedy | Method::Random)
            || self.cfg.record_sigma
            || self.cfg.debug_checks
    }

    /// Jacobian action honoring the finite-difference switch.
    fn jacobian_action(&self, x: &DenseVector) -> Result<DenseMatrix> {
        if self.cfg.fd_jacobian {
            finite_diff_jacobian(self.sys, x, self.cfg.fd_step)
        } else {
            self.sys.jacobian(x)
        }
    }

    /// Single Jacobian column honoring the finite-difference switch.
    fn jacobian_column_action(&self, x: &DenseVector, j: usize) -> Result<DenseVector> {
        if self.cfg.fd_jacobian {
            crate::problems::finite_diff_jacobian_column(self.sys, x, j, self.cfg.fd_step)
        } else {
            self.sys.jacobian_column(x, j)
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn status(&self) -> SolveStatus {
        self.status
    }

    pub fn x(&self) -> &DenseVector {
        &self.x
    }

    /// `F` at the current iterate.
    pub fn residual(&self) -> &DenseVector {
        &self.f
    }

    pub fn residual_norm(&self) -> f64 {
        self.f.norm()
    }

    /// The maintained matrix pair (absent for Newton).
    pub fn pair(&self) -> Option<&JacobianPair> {
        self.pair.as_ref()
    }

    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    pub fn max_consistency_error(&self) -> Option<f64> {
        self.max_consistency_err
    }

    /// Distance to the stored root, when one exists.
    pub fn distance_to_root(&self) -> Option<f64> {
        self.sys.known_solution().map(|s| self.x.sub(&s.x).norm())
    }

    /// `(σ_abs, σ_rel)` at the current iterate, when observable. For the
    /// "bad" method the forward matrix is reconstituted from the inverse by
    /// LU, as it is not part of that method's state.
    pub fn sigma(&self) -> Option<(f64, f64)> {
        let pair = self.pair.as_ref()?;
        let reconstituted;
        let b = match pair.jacobian() {
            Some(b) => b,
            None => {
                reconstituted = pair.inverse().inverse().ok()?;
                &reconstituted
            }
        };
        // Observational: evaluation failures yield "unavailable", never a
        // run failure.
        let j = self.sys.jacobian(&self.x).ok()?;
        let gap = b.sub(&j).frobenius_norm();
        let j_norm = j.frobenius_norm();
        Some((gap, if j_norm > 0.0 { gap / j_norm } else { f64::INFINITY }))
    }

    fn note_consistency(&mut self) {
        if !self.cfg.debug_checks {
            return;
        }
        if let Some(err) = self.pair.as_ref().and_then(|p| p.consistency_error_normalized()) {
            let cur = self.max_consistency_err.unwrap_or(0.0);
            self.max_consistency_err = Some(cur.max(err));
        }
    }

    fn fail(&mut self, err: Error) -> StepOutcome {
        self.status = classify_failure(&err);
        self.failure = Some(err.to_string());
        StepOutcome::Terminal(self.status)
    }

    /// Marks the run converged/capped from outside (the trace loop decides
    /// when, so that `x₀ = x*` converges at `k = 0` with no step taken).
    fn finish(&mut self, status: SolveStatus) {
        self.status = status;
    }

    /// Advances one iteration. On success the run's iterate, residual and
    /// matrices reflect `k+1`.
    pub fn step(&mut self) -> StepOutcome {
        if self.status != SolveStatus::Running {
            return StepOutcome::Terminal(self.status);
        }
        match self.step_inner() {
            Ok(outcome) => {
                self.note_consistency();
                outcome
            }
            Err(err) => self.fail(err),
        }
    }

    fn step_inner(&mut self) -> Result<StepOutcome> {
        let outcome = match self.cfg.method {
            Method::Newton => self.newton_step()?,
            Method::Classical => self.secant_step(false)?,
            Method::Bad => self.secant_step(true)?,
            Method::Greedy => self.directional_step(true)?,
            Method::Random => self.directional_step(false)?,
        };
        self.k += 1;
        Ok(outcome)
    }

    /// Accepts `x₊` after checking finiteness, returning `F(x₊)`.
    fn accept(&mut self, x_next: DenseVector) -> Result<DenseVector> {
        if !x_next.is_finite() {
            return Err(Error::NonFinite(format!("iterate {}", self.k + 1)));
        }
        let f_next = self.sys.eval(&x_next)?;
        if !f_next.is_finite() {
            return Err(Error::NonFinite(format!("residual at iterate {}", self.k + 1)));
        }
        self.x = x_next;
        Ok(f_next)
    }

    fn newton_step(&mut self) -> Result<StepOutcome> {
        let j = self.sys.jacobian(&self.x)?;
        let step = j.lu_solve(&self.f)?;
        let x_next = self.x.sub(&step);
        let f_next = self.accept(x_next)?;
        self.f = f_next;
        Ok(StepOutcome::Stepped { direction_index: None, step_norm: step.norm() })
    }

    /// Classical and "bad" Broyden share the step `x₊ = x − H·F(x)` and the
    /// secant pair `u = x₊ − x`, `y = F(x₊) − F(x)`; they differ in which
    /// matrix absorbs the rank-one update.
    fn secant_step(&mut self, bad: bool) -> Result<StepOutcome> {
        let pair = self.pair.as_ref().expect("secant methods maintain a pair");
        let u = pair.inverse().matvec(&self.f).scale(-1.0);
        let x_next = self.x.add(&u);
        let f_next = self.accept(x_next)?;
        let y = f_next.sub(&self.f);
        let pair = self.pair.as_mut().expect("pair present");
        if bad {
            let h_next = bad_broyden_update(pair.inverse(), &y, &u)?;
            pair.replace_inverse(h_next);
            // The forward matrix is not part of this method's state; rebuild
            // it for diagnostics when they ask for it continuously.
            if self.cfg.debug_checks {
                if let Ok(b) = pair.inverse().inverse() {
                    pair.set_jacobian(b);
                }
            }
        } else {
            pair.apply_secant(&y, &u)?;
        }
        self.f = f_next;
        Ok(StepOutcome::Stepped { direction_index: None, step_norm: u.norm() })
    }

    /// Greedy and randomized variants: step from the inverse, then update
    /// along a chosen direction with the true Jacobian action at `x₊` as the
    /// target.
    fn directional_step(&mut self, greedy: bool) -> Result<StepOutcome> {
        let pair = self.pair.as_ref().expect("directional methods maintain a pair");
        let step = pair.inverse().matvec(&self.f).scale(-1.0);
        let x_next = self.x.add(&step);
        let f_next = self.accept(x_next)?;

        let (u, y, index) = if greedy {
            // One full Jacobian evaluation, reused for both the direction
            // choice and the update target column.
            let j_next = self.jacobian_action(&self.x)?;
            let b = self
                .pair
                .as_ref()
                .and_then(|p| p.jacobian())
                .expect("greedy maintains the forward matrix");
            let i = greedy_direction(b, &j_next);
            (DenseVector::basis(self.sys.dim(), i), j_next.column(i), Some(i))
        } else {
            let (u, index) = random_direction(self.sys.dim(), self.cfg.direction, &mut self.rng);
            let y = match index {
                // Basis rule: only one Jacobian column is evaluated.
                Some(i) => self.jacobian_column_action(&self.x, i)?,
                None => self.jacobian_action(&self.x)?.matvec(&u),
            };
            (u, y, index)
        };

        let pair = self.pair.as_mut().expect("pair present");
        pair.apply_secant(&y, &u)?;
        self.f = f_next;
        Ok(StepOutcome::Stepped { direction_index: index, step_norm: step.norm() })
    }
}

/// Runs the configured method from `x0` and records the full trace.
///
/// Never fails: configuration and initialization errors terminate the run
/// with a status and message just like mid-iteration failures do.
pub fn solve(sys: &dyn System, x0: &DenseVector, cfg: SolverConfig) -> IterationTrace {
    let started = Instant::now();
    let mut rows: Vec<TraceRow> = Vec::new();

    let mut run = match SolverRun::new(sys, x0, cfg) {
        Ok(run) => run,
        Err(err) => {
            let status = classify_failure(&err);
            return assemble_trace(sys, cfg, rows, None, status, Some(err.to_string()), None, started);
        }
    };

    loop {
        let (sigma_abs, sigma_rel) = if cfg.record_sigma {
            match run.sigma() {
                Some((a, r)) => (Some(a), Some(r)),
                None => (None, None),
            }
        } else {
            (None, None)
        };
        rows.push(TraceRow {
            k: run.k(),
            res_norm: run.residual_norm(),
            r_k: run.distance_to_root(),
            sigma_abs,
            sigma_rel,
            direction_index: None,
            step_norm: None,
        });

        if run.residual_norm() <= cfg.tol_residual {
            run.finish(SolveStatus::Converged);
            break;
        }
        if run.k() >= cfg.max_iters {
            run.finish(SolveStatus::MaxIters);
            break;
        }
        match run.step() {
            StepOutcome::Stepped { direction_index, step_norm } => {
                let row = rows.last_mut().expect("row for the departing iterate exists");
                row.direction_index = direction_index;
                row.step_norm = Some(step_norm);
            }
            StepOutcome::Terminal(_) => break,
        }
    }

    let failure = run.failure().map(str::to_owned);
    let status = run.status();
    let consistency = run.max_consistency_error();
    let final_x = Some(run.x().clone());
    assemble_trace(sys, cfg, rows, final_x, status, failure, consistency, started)
}

#[allow(clippy::too_many_arguments)]
fn assemble_trace(
    sys: &dyn System,
    cfg: SolverConfig,
    rows: Vec<TraceRow>,
    final_x: Option<DenseVector>,
    status: SolveStatus,
    failure: Option<String>,
    max_inverse_consistency_error: Option<f64>,
    started: Instant,
) -> IterationTrace {
    let meta = TraceMeta {
        schema_version: TRACE_SCHEMA_VERSION,
        status,
        iterations: rows.last().map_or(0, |r| r.k),
        final_res_norm: rows.last().map_or(f64::NAN, |r| r.res_norm),
        method: cfg.method,
        direction: cfg.direction,
        init: cfg.init,
        tol_residual: cfg.tol_residual,
        max_iters: cfg.max_iters,
        seed: cfg.seed,
        record_sigma: cfg.record_sigma,
        debug_checks: cfg.debug_checks,
        fd_jacobian: cfg.fd_jacobian,
        problem: sys.spec(),
        rng_algorithm: rng::RNG_ALGORITHM.into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        oracle_assisted_init: cfg.init.is_oracle_assisted(),
        max_inverse_consistency_error,
        failure,
    };
    IterationTrace { rows, final_x, meta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densealg::DenseMatrix;
    use crate::problems::{LinearSystem, Problem, ProblemSpec};

    fn two_by_two_diag() -> LinearSystem {
        LinearSystem::new(
            DenseMatrix::from_rows(vec![vec![2.0, 0.0], vec![0.0, 2.0]]),
            DenseVector::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn classical_step_matches_hand_computation() {
        // F(x) = diag(2,2)·x, B₀ = I, x₀ = (1,1):
        //   x₁ = x₀ − F(x₀) = (−1,−1), u = (−2,−2), y = (−4,−4),
        //   B₁ = I + (y − u)uᵀ/(uᵀu) = [[1.5, 0.5], [0.5, 1.5]].
        let sys = two_by_two_diag();
        let x0 = DenseVector::from_vec(vec![1.0, 1.0]);
        let cfg = SolverConfig {
            init: InitScheme::ScaledIdentity { scale: 1.0 },
            record_sigma: true, // keep B so the update is observable
            ..SolverConfig::default()
        };
        let mut run = SolverRun::new(&sys, &x0, cfg).unwrap();
        let outcome = run.step();
        assert!(matches!(outcome, StepOutcome::Stepped { step_norm, .. }
            if (step_norm - 8.0_f64.sqrt()).abs() < 1e-14));
        assert_eq!(run.x().as_slice(), &[-1.0, -1.0]);

        let b1 = run.pair().unwrap().jacobian().unwrap().clone();
        let expect = DenseMatrix::from_rows(vec![vec![1.5, 0.5], vec![0.5, 1.5]]);
        assert!(b1.max_abs_diff(&expect) < 1e-14);

        // The maintained inverse tracks B₁⁻¹ = [[0.75, −0.25], [−0.25, 0.75]].
        let h1 = run.pair().unwrap().inverse().clone();
        let expect_inv = DenseMatrix::from_rows(vec![vec![0.75, -0.25], vec![-0.25, 0.75]]);
        assert!(h1.max_abs_diff(&expect_inv) < 1e-14);
    }

    #[test]
    fn starting_at_the_root_converges_at_k0() {
        let problem = ProblemSpec::Linear { n: 4, seed: 1 }.build().unwrap();
        let x_star = problem.known_solution().unwrap().x.clone();
        for method in [Method::Newton, Method::Classical, Method::Greedy] {
            let cfg = SolverConfig { method, tol_residual: 1e-9, ..SolverConfig::default() };
            let trace = solve(&problem, &x_star, cfg);
            assert_eq!(trace.status(), SolveStatus::Converged, "{method:?}");
            assert_eq!(trace.rows.len(), 1);
            assert_eq!(trace.rows[0].k, 0);
            assert!(trace.rows[0].step_norm.is_none());
        }
    }

    #[test]
    fn all_methods_converge_on_seeded_linear_problems() {
        let problem = ProblemSpec::Linear { n: 8, seed: 3 }.build().unwrap();
        let x0 = DenseVector::ones(8);
        for method in [Method::Newton, Method::Classical, Method::Bad, Method::Greedy, Method::Random] {
            let cfg = SolverConfig {
                method,
                max_iters: 200,
                record_sigma: true,
                debug_checks: true,
                ..SolverConfig::default()
            };
            let trace = solve(&problem, &x0, cfg);
            assert_eq!(trace.status(), SolveStatus::Converged, "{method:?}: {:?}", trace.meta.failure);
            assert!(trace.meta.final_res_norm <= 1e-12);
            // Trace bookkeeping: k runs 0..=iterations, last row closes the run.
            for (idx, row) in trace.rows.iter().enumerate() {
                assert_eq!(row.k, idx);
            }
            assert!(trace.rows.last().unwrap().step_norm.is_none());
            if method != Method::Newton {
                let max_err = trace.meta.max_inverse_consistency_error.unwrap();
                assert!(max_err <= 1e-6, "{method:?} drifted: {max_err}");
            }
        }
    }

    #[test]
    fn newton_converges_quadratically_on_hequation() {
        let problem = ProblemSpec::HEquation { n: 30, seed: 0, c: 0.9 }.build().unwrap();
        let x0 = DenseVector::ones(30);
        let cfg = SolverConfig { method: Method::Newton, ..SolverConfig::default() };
        let trace = solve(&problem, &x0, cfg);
        assert_eq!(trace.status(), SolveStatus::Converged);
        assert!(trace.meta.iterations <= 10);
    }

    #[test]
    fn sigma_recording_is_observational() {
        let problem = ProblemSpec::LogSumExp { n: 6, seed: 5, m: 9, gamma: 1.0 }.build().unwrap();
        let mut rng = rng::stream(17, StreamId::StartPoint);
        let x0 = sample_start(&problem, StartScheme::Normal, &mut rng).unwrap();
        let base = SolverConfig {
            method: Method::Random,
            direction: DirectionKind::UniformBasis,
            init: InitScheme::ScaledIdentity { scale: 2.0 },
            max_iters: 40,
            tol_residual: 1e-300,
            seed: 7,
            ..SolverConfig::default()
        };
        let plain = solve(&problem, &x0, base);
        let recorded = solve(&problem, &x0, SolverConfig { record_sigma: true, ..base });
        assert_eq!(plain.rows.len(), recorded.rows.len());
        for (a, b) in plain.rows.iter().zip(&recorded.rows) {
            // Bitwise identical run, σ columns filled only in the second.
            assert_eq!(a.res_norm.to_bits(), b.res_norm.to_bits());
            assert_eq!(a.step_norm.map(f64::to_bits), b.step_norm.map(f64::to_bits));
            assert_eq!(a.direction_index, b.direction_index);
            assert!(a.sigma_abs.is_none());
            assert!(b.sigma_abs.is_some());
        }
        assert_eq!(
            plain.final_x.unwrap().as_slice(),
            recorded.final_x.unwrap().as_slice()
        );
    }

    #[test]
    fn degenerate_initialization_is_a_status_not_a_panic() {
        let problem = ProblemSpec::Linear { n: 3, seed: 2 }.build().unwrap();
        let x0 = DenseVector::ones(3);
        let cfg = SolverConfig {
            init: InitScheme::ScaledIdentity { scale: 0.0 },
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &x0, cfg);
        assert_eq!(trace.status(), SolveStatus::DomainError);
        assert!(trace.meta.failure.is_some());
    }

    #[test]
    fn pole_during_iteration_yields_domain_error_status() {
        // One-point H-equation: K = c/4 = 0.125 with c = 0.5; starting close
        // to the pole x = 8 makes the first Broyden step overshoot it.
        let problem = ProblemSpec::HEquation { n: 1, seed: 0, c: 0.5 }.build().unwrap();
        let x0 = DenseVector::from_vec(vec![7.9]);
        let cfg = SolverConfig {
            method: Method::Classical,
            init: InitScheme::ScaledIdentity { scale: 0.05 },
            max_iters: 5,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &x0, cfg);
        assert!(
            matches!(trace.status(), SolveStatus::DomainError | SolveStatus::MaxIters),
            "unexpected status {:?}",
            trace.status()
        );
    }

    #[test]
    fn max_iters_status_and_exit_codes() {
        let problem = ProblemSpec::Linear { n: 5, seed: 9 }.build().unwrap();
        let x0 = DenseVector::ones(5);
        let cfg = SolverConfig {
            method: Method::Classical,
            init: InitScheme::ScaledIdentity { scale: 50.0 },
            max_iters: 3,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &x0, cfg);
        assert_eq!(trace.status(), SolveStatus::MaxIters);
        assert_eq!(trace.rows.last().unwrap().k, 3);
        assert_eq!(SolveStatus::Converged.exit_code(), 0);
        assert_eq!(SolveStatus::MaxIters.exit_code(), 2);
        assert_eq!(SolveStatus::Degenerate.exit_code(), 3);
        assert_eq!(SolveStatus::DomainError.exit_code(), 3);
    }

    #[test]
    fn traces_save_and_parse_back(){
        let problem = ProblemSpec::Linear { n: 4, seed: 11 }.build().unwrap();
        let x0 = DenseVector::ones(4);
        let cfg = SolverConfig { record_sigma: true, ..SolverConfig::default() };
        let trace = solve(&problem, &x0, cfg);
        let dir = tempfile::tempdir().unwrap();
        let csv_path = trace.save_into(dir.path(), "run").unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let rows = IterationTrace::parse_csv_rows(&text).unwrap();
        assert_eq!(rows, trace.rows);
        let meta: TraceMeta = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("run.meta.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(meta.status, trace.meta.status);
        assert_eq!(meta.problem, Some(ProblemSpec::Linear { n: 4, seed: 11 }));
    }

    #[test]
    fn greedy_matches_manual_stepping() {
        // solve() and a manually driven SolverRun agree bit for bit.
        let problem = ProblemSpec::Linear { n: 6, seed: 21 }.build().unwrap();
        let x0 = DenseVector::ones(6);
        let cfg = SolverConfig {
            method: Method::Greedy,
            init: InitScheme::ScaledIdentity { scale: 3.0 },
            max_iters: 30,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &x0, cfg);
        let mut run = SolverRun::new(&problem, &x0, cfg).unwrap();
        for row in &trace.rows {
            assert_eq!(run.residual_norm().to_bits(), row.res_norm.to_bits());
            if row.step_norm.is_some() {
                match run.step() {
                    StepOutcome::Stepped { direction_index, .. } => {
                        assert_eq!(direction_index, row.direction_index)
                    }
                    StepOutcome::Terminal(s) => panic!("early terminal {s:?}"),
                }
            }
        }
    }

    #[test]
    fn fd_jacobian_mode_still_converges() {
        let problem = ProblemSpec::LogSumExp { n: 5, seed: 8, m: 8, gamma: 1.0 }.build().unwrap();
        let mut rng = rng::stream(3, StreamId::StartPoint);
        let x0 = sample_start(&problem, StartScheme::Sphere, &mut rng).unwrap();
        let cfg = SolverConfig {
            method: Method::Greedy,
            fd_jacobian: true,
            tol_residual: 1e-9,
            max_iters: 100,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &x0, cfg);
        assert_eq!(trace.status(), SolveStatus::Converged, "{:?}", trace.meta.failure);
    }

    #[test]
    fn near_solution_start_has_requested_radius() {
        let problem = ProblemSpec::HEquation { n: 12, seed: 0, c: 0.9 }.build().unwrap();
        let mut rng = rng::stream(5, StreamId::StartPoint);
        let rho = 0.1;
        let x0 = sample_start(&problem, StartScheme::NearSolution { rho }, &mut rng).unwrap();
        let sol = problem.known_solution().unwrap();
        let dist = x0.sub(&sol.x).norm();
        assert!((dist - rho * sol.x.norm()).abs() < 1e-12);
    }

    #[test]
    fn problem_enum_solves_via_trait_object() {
        let problem: Problem = ProblemSpec::Linear { n: 3, seed: 4 }.build().unwrap();
        let trace = solve(&problem, &DenseVector::ones(3), SolverConfig::default());
        assert_eq!(trace.status(), SolveStatus::Converged);
    }
}
