//! C ABI for the solver library: opaque handles, integer error codes, and
//! plain-old-data trace rows. The generated header lands in
//! `include/broyden_lab.h` at build time.
//!
//! Conventions:
//! - Constructors write through an out-pointer and return [`BrCode`];
//!   every handle has exactly one `br_*_free`, and `free(NULL)` is a no-op.
//! - Missing optional values surface as NaN (floats) or -1 (indices).
//! - No call unwinds across the boundary; a caught panic maps to
//!   [`BrCode::Panic`].
//! - `br_last_error_message` returns a thread-local, NUL-terminated detail
//!   string for the most recent failure on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use broyden_lab::broyden::DirectionKind;
use broyden_lab::densealg::DenseVector;
use broyden_lab::problems::{Problem, ProblemSpec, System};
use broyden_lab::rng::{self, StreamId};
use broyden_lab::solver::{
    sample_start, solve, InitScheme, IterationTrace, Method, SolveStatus, SolverConfig,
    StartScheme,
};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).ok();
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

/// Result code of every fallible `br_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrCode {
    /// Success.
    Ok = 0,
    /// A pointer argument that must not be NULL was NULL.
    NullPointer = 1,
    /// An argument value was rejected (bad enum tag, bad length, NaN, …).
    InvalidArgument = 2,
    /// Problem construction or solver preparation failed numerically.
    Numeric = 3,
    /// An index was out of range.
    OutOfRange = 4,
    /// The callee panicked; state is unchanged. See `br_last_error_message`.
    Panic = 5,
}

/// Terminal state of a solve, mirrored from the solver.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrSolveStatus {
    Converged = 0,
    MaxIters = 2,
    Degenerate = 3,
    DomainError = 4,
}

/// Method selector for [`br_config_set_method`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrMethod {
    Newton = 0,
    Classical = 1,
    Bad = 2,
    Greedy = 3,
    Random = 4,
}

/// Direction rule for the random method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrDirection {
    /// Uniformly random standard basis vector.
    Basis = 0,
    /// Uniform draw from the unit sphere.
    Sphere = 1,
    /// Standard normal vector.
    Gaussian = 2,
}

/// Initialization scheme for the approximate Jacobian.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrInit {
    /// `B0 = J(x0)`; `scale` is ignored.
    ExactJ0 = 0,
    /// `B0 = scale * I`.
    ScaledIdentity = 1,
    /// `B0 = scale * J(x0)`.
    ScaledJ0 = 2,
    /// `B0 = scale * J(x*)` (requires a stored root).
    ScaledJstar = 3,
}

/// Start-point distribution for [`br_sample_start`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrStart {
    /// Uniform on the unit sphere.
    Sphere = 0,
    /// Standard normal entries.
    Normal = 1,
    /// `x* + rho * max(norm(x*), 1) * eps` near the stored root.
    NearSolution = 2,
}

/// One iteration record. Optional fields are NaN when absent;
/// `direction_index` is -1 when absent.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BrTraceRow {
    pub k: usize,
    pub res_norm: f64,
    pub r_k: f64,
    pub sigma_abs: f64,
    pub sigma_rel: f64,
    pub direction_index: i64,
    pub step_norm: f64,
}

/// Opaque problem instance.
pub struct BrProblem {
    inner: Problem,
}

/// Opaque solver configuration.
pub struct BrConfig {
    inner: SolverConfig,
}

/// Opaque iteration trace.
pub struct BrTrace {
    inner: IterationTrace,
}

fn guard(body: impl FnOnce() -> BrCode) -> BrCode {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".to_owned());
            set_last_error(&msg);
            BrCode::Panic
        }
    }
}

/// # Safety
/// `out` must be valid for writes.
unsafe fn emit_problem(spec: ProblemSpec, out: *mut *mut BrProblem) -> BrCode {
    if out.is_null() {
        set_last_error("out pointer is NULL");
        return BrCode::NullPointer;
    }
    match spec.build() {
        Ok(inner) => {
            clear_last_error();
            *out = Box::into_raw(Box::new(BrProblem { inner }));
            BrCode::Ok
        }
        Err(e) => {
            set_last_error(&e.to_string());
            *out = ptr::null_mut();
            BrCode::Numeric
        }
    }
}

/// Creates a seeded diagonally dominant linear system of size `n`.
///
/// # Safety
/// `out` must be a valid pointer to a `BrProblem*` slot.
#[no_mangle]
pub unsafe extern "C" fn br_problem_linear(n: usize, seed: u64, out: *mut *mut BrProblem) -> BrCode {
    guard(|| emit_problem(ProblemSpec::Linear { n, seed }, out))
}

/// Creates the regularized softmax gradient system (`m` terms, strength
/// `gamma`).
///
/// # Safety
/// `out` must be a valid pointer to a `BrProblem*` slot.
#[no_mangle]
pub unsafe extern "C" fn br_problem_logsumexp(
    n: usize,
    seed: u64,
    m: usize,
    gamma: f64,
    out: *mut *mut BrProblem,
) -> BrCode {
    guard(|| emit_problem(ProblemSpec::LogSumExp { n, seed, m, gamma }, out))
}

/// Creates the discretized Chandrasekhar integral equation (`n` nodes,
/// kernel constant `c` in (0, 1]).
///
/// # Safety
/// `out` must be a valid pointer to a `BrProblem*` slot.
#[no_mangle]
pub unsafe extern "C" fn br_problem_hequation(
    n: usize,
    seed: u64,
    c: f64,
    out: *mut *mut BrProblem,
) -> BrCode {
    guard(|| emit_problem(ProblemSpec::HEquation { n, seed, c }, out))
}

/// Writes the problem dimension to `dim_out`.
///
/// # Safety
/// `problem` must be a live handle; `dim_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_problem_dim(problem: *const BrProblem, dim_out: *mut usize) -> BrCode {
    guard(|| {
        if problem.is_null() || dim_out.is_null() {
            set_last_error("NULL handle or out pointer");
            return BrCode::NullPointer;
        }
        *dim_out = (*problem).inner.dim();
        clear_last_error();
        BrCode::Ok
    })
}

/// Releases a problem handle. NULL is a no-op.
///
/// # Safety
/// `problem` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn br_problem_free(problem: *mut BrProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Creates a configuration with library defaults (classical method, exact
/// start-point Jacobian, residual tolerance 1e-12, 500 iterations, seed 0).
///
/// # Safety
/// `out` must be a valid pointer to a `BrConfig*` slot.
#[no_mangle]
pub unsafe extern "C" fn br_config_new(out: *mut *mut BrConfig) -> BrCode {
    guard(|| {
        if out.is_null() {
            set_last_error("out pointer is NULL");
            return BrCode::NullPointer;
        }
        *out = Box::into_raw(Box::new(BrConfig { inner: SolverConfig::default() }));
        clear_last_error();
        BrCode::Ok
    })
}

unsafe fn with_config(
    config: *mut BrConfig,
    apply: impl FnOnce(&mut SolverConfig) -> BrCode,
) -> BrCode {
    if config.is_null() {
        set_last_error("config handle is NULL");
        return BrCode::NullPointer;
    }
    apply(&mut (*config).inner)
}

/// Selects the iteration method.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_method(config: *mut BrConfig, method: BrMethod) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            cfg.method = match method {
                BrMethod::Newton => Method::Newton,
                BrMethod::Classical => Method::Classical,
                BrMethod::Bad => Method::Bad,
                BrMethod::Greedy => Method::Greedy,
                BrMethod::Random => Method::Random,
            };
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Selects the direction rule used by the random method.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_direction(
    config: *mut BrConfig,
    direction: BrDirection,
) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            cfg.direction = match direction {
                BrDirection::Basis => DirectionKind::UniformBasis,
                BrDirection::Sphere => DirectionKind::Sphere,
                BrDirection::Gaussian => DirectionKind::Gaussian,
            };
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Selects the initialization scheme; `scale` applies to the scaled
/// variants and must be finite.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_init(
    config: *mut BrConfig,
    init: BrInit,
    scale: f64,
) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            if !scale.is_finite() {
                set_last_error("init scale must be finite");
                return BrCode::InvalidArgument;
            }
            cfg.init = match init {
                BrInit::ExactJ0 => InitScheme::ExactJacobianAtX0,
                BrInit::ScaledIdentity => InitScheme::ScaledIdentity { scale },
                BrInit::ScaledJ0 => InitScheme::ScaledJacobianAtX0 { scale },
                BrInit::ScaledJstar => InitScheme::ScaledJacobianAtStar { scale },
            };
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Sets the residual-norm convergence threshold (must be positive).
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_tol(config: *mut BrConfig, tol: f64) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            if !(tol > 0.0) || !tol.is_finite() {
                set_last_error("tolerance must be a positive finite number");
                return BrCode::InvalidArgument;
            }
            cfg.tol_residual = tol;
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Sets the iteration cap.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_max_iters(config: *mut BrConfig, max_iters: usize) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            cfg.max_iters = max_iters;
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Sets the master seed for the direction stream.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_seed(config: *mut BrConfig, seed: u64) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            cfg.seed = seed;
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Enables or disables per-iteration Jacobian-gap recording.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_record_sigma(config: *mut BrConfig, on: bool) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            cfg.record_sigma = on;
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Enables or disables per-iteration inverse-consistency tracking.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_config_set_debug_checks(config: *mut BrConfig, on: bool) -> BrCode {
    guard(|| {
        with_config(config, |cfg| {
            cfg.debug_checks = on;
            clear_last_error();
            BrCode::Ok
        })
    })
}

/// Releases a configuration handle. NULL is a no-op.
///
/// # Safety
/// `config` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn br_config_free(config: *mut BrConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Samples a start point into `x0_out` (length `len` must equal the problem
/// dimension). `rho` is used by the near-solution scheme only.
///
/// # Safety
/// `problem` must be a live handle; `x0_out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn br_sample_start(
    problem: *const BrProblem,
    scheme: BrStart,
    rho: f64,
    seed: u64,
    x0_out: *mut f64,
    len: usize,
) -> BrCode {
    guard(|| {
        if problem.is_null() || x0_out.is_null() {
            set_last_error("NULL handle or buffer");
            return BrCode::NullPointer;
        }
        let sys = &(*problem).inner;
        if len != sys.dim() {
            set_last_error("buffer length does not match the problem dimension");
            return BrCode::InvalidArgument;
        }
        let scheme = match scheme {
            BrStart::Sphere => StartScheme::Sphere,
            BrStart::Normal => StartScheme::Normal,
            BrStart::NearSolution => StartScheme::NearSolution { rho },
        };
        let mut x_rng = rng::stream(seed, StreamId::StartPoint);
        match sample_start(sys, scheme, &mut x_rng) {
            Ok(x0) => {
                ptr::copy_nonoverlapping(x0.as_slice().as_ptr(), x0_out, len);
                clear_last_error();
                BrCode::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                BrCode::Numeric
            }
        }
    })
}

/// Runs the solver from `x0` (length `len` must equal the problem
/// dimension) and returns a trace handle. The trace is produced even when
/// the run ends degenerately; inspect `br_trace_status`.
///
/// # Safety
/// `problem` and `config` must be live handles; `x0` must be valid for
/// `len` reads; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_solve(
    problem: *const BrProblem,
    config: *const BrConfig,
    x0: *const f64,
    len: usize,
    out: *mut *mut BrTrace,
) -> BrCode {
    guard(|| {
        if problem.is_null() || config.is_null() || x0.is_null() || out.is_null() {
            set_last_error("NULL handle, buffer, or out pointer");
            return BrCode::NullPointer;
        }
        let sys = &(*problem).inner;
        if len != sys.dim() {
            set_last_error("x0 length does not match the problem dimension");
            *out = ptr::null_mut();
            return BrCode::InvalidArgument;
        }
        let x0 = DenseVector::from_vec(std::slice::from_raw_parts(x0, len).to_vec());
        let trace = solve(sys, &x0, (*config).inner);
        clear_last_error();
        *out = Box::into_raw(Box::new(BrTrace { inner: trace }));
        BrCode::Ok
    })
}

/// Terminal status of the traced run.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_trace_status(trace: *const BrTrace) -> BrSolveStatus {
    if trace.is_null() {
        return BrSolveStatus::DomainError;
    }
    match (*trace).inner.status() {
        SolveStatus::Converged => BrSolveStatus::Converged,
        SolveStatus::MaxIters => BrSolveStatus::MaxIters,
        SolveStatus::Degenerate | SolveStatus::Running => BrSolveStatus::Degenerate,
        SolveStatus::DomainError => BrSolveStatus::DomainError,
    }
}

/// Number of recorded iteration rows.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_trace_len(trace: *const BrTrace) -> usize {
    if trace.is_null() {
        return 0;
    }
    (*trace).inner.rows.len()
}

/// Copies row `index` into `row_out`.
///
/// # Safety
/// `trace` must be a live handle; `row_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_trace_row(
    trace: *const BrTrace,
    index: usize,
    row_out: *mut BrTraceRow,
) -> BrCode {
    guard(|| {
        if trace.is_null() || row_out.is_null() {
            set_last_error("NULL handle or out pointer");
            return BrCode::NullPointer;
        }
        let rows = &(*trace).inner.rows;
        let Some(row) = rows.get(index) else {
            set_last_error("row index out of range");
            return BrCode::OutOfRange;
        };
        *row_out = BrTraceRow {
            k: row.k,
            res_norm: row.res_norm,
            r_k: row.r_k.unwrap_or(f64::NAN),
            sigma_abs: row.sigma_abs.unwrap_or(f64::NAN),
            sigma_rel: row.sigma_rel.unwrap_or(f64::NAN),
            direction_index: row.direction_index.map_or(-1, |i| i as i64),
            step_norm: row.step_norm.unwrap_or(f64::NAN),
        };
        clear_last_error();
        BrCode::Ok
    })
}

/// Final residual norm of the run (NaN when no iterations were recorded).
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_trace_final_res_norm(trace: *const BrTrace) -> f64 {
    if trace.is_null() {
        return f64::NAN;
    }
    (*trace).inner.meta.final_res_norm
}

/// Copies the final iterate into `x_out` (length `len` must equal the
/// problem dimension). Fails with `OutOfRange` when the run terminated
/// before producing one.
///
/// # Safety
/// `trace` must be a live handle; `x_out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn br_trace_final_x(
    trace: *const BrTrace,
    x_out: *mut f64,
    len: usize,
) -> BrCode {
    guard(|| {
        if trace.is_null() || x_out.is_null() {
            set_last_error("NULL handle or buffer");
            return BrCode::NullPointer;
        }
        let Some(x) = &(*trace).inner.final_x else {
            set_last_error("run has no final iterate");
            return BrCode::OutOfRange;
        };
        if x.len() != len {
            set_last_error("buffer length does not match the iterate dimension");
            return BrCode::InvalidArgument;
        }
        ptr::copy_nonoverlapping(x.as_slice().as_ptr(), x_out, len);
        clear_last_error();
        BrCode::Ok
    })
}

/// Returns the trace as a heap-allocated CSV string (header + one line per
/// iteration). Free it with [`br_string_free`]. NULL on failure.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_trace_csv(trace: *const BrTrace) -> *mut c_char {
    if trace.is_null() {
        return ptr::null_mut();
    }
    match CString::new((*trace).inner.csv_string()) {
        Ok(s) => s.into_raw(),
        Err(_) => ptr::null_mut(),
    }
}

/// Returns the run metadata as a heap-allocated JSON string. Free it with
/// [`br_string_free`]. NULL on failure.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_trace_meta_json(trace: *const BrTrace) -> *mut c_char {
    if trace.is_null() {
        return ptr::null_mut();
    }
    match (*trace).inner.meta_json_string() {
        Ok(json) => match CString::new(json) {
            Ok(s) => s.into_raw(),
            Err(_) => ptr::null_mut(),
        },
        Err(_) => ptr::null_mut(),
    }
}

/// Releases a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from `br_trace_csv` /
/// `br_trace_meta_json`, not freed before.
#[no_mangle]
pub unsafe extern "C" fn br_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a trace handle. NULL is a no-op.
///
/// # Safety
/// `trace` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn br_trace_free(trace: *mut BrTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Detail message for the most recent failure on this thread, or NULL.
/// The pointer is valid until the next `br_*` call on the same thread.
#[no_mangle]
pub extern "C" fn br_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version string.
#[no_mangle]
pub extern "C" fn br_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    unsafe fn make_problem() -> *mut BrProblem {
        let mut p: *mut BrProblem = ptr::null_mut();
        assert_eq!(br_problem_hequation(12, 3, 0.5, &mut p), BrCode::Ok);
        assert!(!p.is_null());
        p
    }

    #[test]
    fn end_to_end_solve_through_the_c_surface() {
        unsafe {
            let p = make_problem();
            let mut dim = 0usize;
            assert_eq!(br_problem_dim(p, &mut dim), BrCode::Ok);
            assert_eq!(dim, 12);

            let mut cfg: *mut BrConfig = ptr::null_mut();
            assert_eq!(br_config_new(&mut cfg), BrCode::Ok);
            assert_eq!(br_config_set_method(cfg, BrMethod::Greedy), BrCode::Ok);
            assert_eq!(br_config_set_record_sigma(cfg, true), BrCode::Ok);
            assert_eq!(br_config_set_seed(cfg, 7), BrCode::Ok);

            let mut x0 = vec![0.0f64; dim];
            assert_eq!(
                br_sample_start(p, BrStart::NearSolution, 0.1, 7, x0.as_mut_ptr(), dim),
                BrCode::Ok
            );

            let mut trace: *mut BrTrace = ptr::null_mut();
            assert_eq!(br_solve(p, cfg, x0.as_ptr(), dim, &mut trace), BrCode::Ok);
            assert_eq!(br_trace_status(trace), BrSolveStatus::Converged);
            assert!(br_trace_final_res_norm(trace) <= 1e-12);

            let rows = br_trace_len(trace);
            assert!(rows >= 2);
            let mut row = BrTraceRow {
                k: 0,
                res_norm: 0.0,
                r_k: 0.0,
                sigma_abs: 0.0,
                sigma_rel: 0.0,
                direction_index: 0,
                step_norm: 0.0,
            };
            assert_eq!(br_trace_row(trace, 0, &mut row), BrCode::Ok);
            assert_eq!(row.k, 0);
            assert!(row.sigma_rel.is_finite(), "sigma recording was requested");
            assert_eq!(br_trace_row(trace, rows, &mut row), BrCode::OutOfRange);

            let mut x_final = vec![0.0f64; dim];
            assert_eq!(br_trace_final_x(trace, x_final.as_mut_ptr(), dim), BrCode::Ok);
            assert!(x_final.iter().all(|v| v.is_finite()));

            let csv = br_trace_csv(trace);
            assert!(!csv.is_null());
            let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
            assert!(text.starts_with("k,res_norm,"));
            br_string_free(csv);

            let json = br_trace_meta_json(trace);
            assert!(!json.is_null());
            let parsed: serde_json::Value =
                serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
            assert_eq!(parsed["status"], "converged");
            br_string_free(json);

            br_trace_free(trace);
            br_config_free(cfg);
            br_problem_free(p);
        }
    }

    #[test]
    fn error_paths_set_codes_and_messages() {
        unsafe {
            let mut p: *mut BrProblem = ptr::null_mut();
            // Kernel constant outside (0, 1] must be rejected numerically.
            assert_eq!(br_problem_hequation(8, 0, 2.0, &mut p), BrCode::Numeric);
            assert!(p.is_null());
            let msg = br_last_error_message();
            assert!(!msg.is_null());
            assert!(!CStr::from_ptr(msg).to_bytes().is_empty());

            assert_eq!(br_problem_linear(5, 0, ptr::null_mut()), BrCode::NullPointer);
            assert_eq!(br_config_set_method(ptr::null_mut(), BrMethod::Newton), BrCode::NullPointer);

            let q = make_problem();
            let mut cfg: *mut BrConfig = ptr::null_mut();
            assert_eq!(br_config_new(&mut cfg), BrCode::Ok);
            assert_eq!(br_config_set_tol(cfg, -1.0), BrCode::InvalidArgument);
            assert_eq!(br_config_set_init(cfg, BrInit::ScaledIdentity, f64::NAN), BrCode::InvalidArgument);

            // Mismatched buffer length.
            let mut trace: *mut BrTrace = ptr::null_mut();
            let x0 = [1.0f64; 3];
            assert_eq!(br_solve(q, cfg, x0.as_ptr(), 3, &mut trace), BrCode::InvalidArgument);
            assert!(trace.is_null());

            br_config_free(cfg);
            br_problem_free(q);
            // Frees of NULL are no-ops.
            br_problem_free(ptr::null_mut());
            br_config_free(ptr::null_mut());
            br_trace_free(ptr::null_mut());
            br_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn version_and_status_mapping_are_stable() {
        unsafe {
            let v = CStr::from_ptr(br_version()).to_str().unwrap();
            assert_eq!(v, env!("CARGO_PKG_VERSION"));

            // A capped run maps to MaxIters.
            let p = make_problem();
            let mut cfg: *mut BrConfig = ptr::null_mut();
            assert_eq!(br_config_new(&mut cfg), BrCode::Ok);
            assert_eq!(br_config_set_max_iters(cfg, 0), BrCode::Ok);
            let mut x0 = vec![0.0f64; 12];
            assert_eq!(br_sample_start(p, BrStart::Normal, 0.0, 1, x0.as_mut_ptr(), 12), BrCode::Ok);
            let mut trace: *mut BrTrace = ptr::null_mut();
            assert_eq!(br_solve(p, cfg, x0.as_ptr(), 12, &mut trace), BrCode::Ok);
            assert_eq!(br_trace_status(trace), BrSolveStatus::MaxIters);
            br_trace_free(trace);
            br_config_free(cfg);
            br_problem_free(p);
        }
    }
}
