//! Command-line harness: single solves with trace output, benchmark sweeps
//! over method × initialization grids, verification suites, and the
//! envelope-comparison table.
//!
//! Exit codes: `0` success (solve: converged), `1` usage/configuration
//! error, `2` iteration cap reached, `3` degenerate or domain failure.
//! All randomness flows from `--seed`/experiment-file seeds; nothing is seeded
//! from the clock, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::broyden::DirectionKind;
use crate::densealg::DenseVector;
use crate::error::{Error, Result};
use crate::problems::{Problem, ProblemSpec};
use crate::rng::{self, StreamId};
use crate::solver::{
    sample_start, solve, InitScheme, IterationTrace, Method, SolveStatus, SolverConfig,
    StartScheme, DEFAULT_MAX_ITERS, DEFAULT_TOL_RESIDUAL,
};
use crate::theory;
use crate::verify::{self, VerifySuite};

/// Environment variable capping how many benchmark cells run concurrently.
pub const THREADS_ENV_VAR: &str = "BROYDEN_LAB_THREADS";

/// Version stamp of the experiment-file and summary JSON layouts.
pub const BENCH_SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "broyden-lab",
    version,
    about = "Quasi-Newton solver laboratory: Broyden-family methods with \
             greedy and randomized secant directions"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one solver configuration and emit its iteration trace.
    Solve(Box<SolveArgs>),
    /// Run a method × initialization sweep described by a JSON experiment file.
    Bench(BenchArgs),
    /// Run a named verification suite and print one line per check.
    Verify(VerifyArgs),
    /// Emit the classical-vs-greedy envelope comparison table as CSV.
    Rates(RatesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemKindArg {
    /// Seeded diagonally dominant linear system.
    Linear,
    /// Regularized softmax (log-sum-exp) gradient system.
    Logsumexp,
    /// Discretized Chandrasekhar integral equation.
    Hequation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Newton,
    Classical,
    Bad,
    Greedy,
    Random,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Newton => Method::Newton,
            MethodArg::Classical => Method::Classical,
            MethodArg::Bad => Method::Bad,
            MethodArg::Greedy => Method::Greedy,
            MethodArg::Random => Method::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    /// Uniformly random standard basis vector.
    Basis,
    /// Uniform draw from the unit sphere.
    Sphere,
    /// Standard Gaussian vector.
    Gaussian,
}

impl From<DirectionArg> for DirectionKind {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Basis => DirectionKind::UniformBasis,
            DirectionArg::Sphere => DirectionKind::Sphere,
            DirectionArg::Gaussian => DirectionKind::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    /// `B₀ = J(x₀)`.
    #[value(name = "exact-j0")]
    ExactJ0,
    /// `B₀ = s·I`.
    ScaledIdentity,
    /// `B₀ = s·J(x₀)`.
    #[value(name = "scaled-j0")]
    ScaledJ0,
    /// `B₀ = s·J(x*)` (oracle-assisted; needs the stored root).
    ScaledJstar,
}

impl InitArg {
    fn into_scheme(self, scale: f64) -> InitScheme {
        match self {
            Self::ExactJ0 => InitScheme::ExactJacobianAtX0,
            Self::ScaledIdentity => InitScheme::ScaledIdentity { scale },
            Self::ScaledJ0 => InitScheme::ScaledJacobianAtX0 { scale },
            Self::ScaledJstar => InitScheme::ScaledJacobianAtStar { scale },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum X0Arg {
    /// Uniform on the unit sphere.
    Sphere,
    /// Standard normal entries.
    Normal,
    /// `x* + ρ·‖x*‖·ε` near the stored root.
    NearSolution,
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// Problem family.
    #[arg(long, value_enum)]
    problem: ProblemKindArg,
    /// Problem dimension (grid size for the integral equation).
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Component count for the softmax family (default 3n/2).
    #[arg(long)]
    m: Option<usize>,
    /// Regularization strength for the softmax family.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Kernel constant of the integral equation, in (0, 1].
    #[arg(long = "c-const", default_value_t = 0.9)]
    c_const: f64,
    /// Master seed: problem data, start point, and directions derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Classical)]
    method: MethodArg,
    /// Direction rule for the random method.
    #[arg(long, value_enum, default_value_t = DirectionArg::Basis)]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = InitArg::ExactJ0)]
    init: InitArg,
    /// Scale `s` for the scaled initialization schemes.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Start-point distribution.
    #[arg(long, value_enum, default_value_t = X0Arg::Normal)]
    x0: X0Arg,
    /// Relative start radius for `--x0 near-solution`.
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    /// Residual-norm convergence threshold.
    #[arg(long, default_value_t = DEFAULT_TOL_RESIDUAL)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Directory for trace.csv and trace.meta.json; omitted = CSV to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record the Jacobian gap each iteration (observational).
    #[arg(long = "record-sigma")]
    record_sigma: bool,
    /// Track inverse-consistency each iteration and report the maximum.
    #[arg(long = "debug-checks")]
    debug_checks: bool,
    /// Replace analytic Jacobian actions in the updates with central
    /// differences (experimental; outside the convergence guarantees).
    #[arg(long = "fd-jacobian")]
    fd_jacobian: bool,
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    /// JSON experiment file.
    spec: PathBuf,
    /// Output directory (overrides the experiment file's `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    /// Suite to run: lemmas, bounds, jacobians, or all.
    #[arg(default_value = "all")]
    suite: String,
}

#[derive(clap::Args, Debug)]
struct RatesArgs {
    /// Dimension the greedy envelope is evaluated at.
    #[arg(long)]
    n: usize,
    /// Largest iteration in the table (default: 10× the crossover point).
    #[arg(long = "k-max")]
    k_max: Option<usize>,
    /// Output CSV path; omitted = stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` and runs the selected command, returning the process exit
/// code. Usage errors print to stderr and map to exit 1; `--help` and
/// `--version` print to stdout and map to exit 0.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Rates(args) => cmd_rates(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn build_problem_spec(args: &SolveArgs) -> ProblemSpec {
    match args.problem {
        ProblemKindArg::Linear => ProblemSpec::Linear { n: args.n, seed: args.seed },
        ProblemKindArg::Logsumexp => ProblemSpec::LogSumExp {
            n: args.n,
            seed: args.seed,
            m: args.m.unwrap_or((3 * args.n).div_ceil(2)),
            gamma: args.gamma,
        },
        ProblemKindArg::Hequation => {
            ProblemSpec::HEquation { n: args.n, seed: args.seed, c: args.c_const }
        }
    }
}

fn start_scheme(args: &SolveArgs) -> StartScheme {
    match args.x0 {
        X0Arg::Sphere => StartScheme::Sphere,
        X0Arg::Normal => StartScheme::Normal,
        X0Arg::NearSolution => StartScheme::NearSolution { rho: args.rho },
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let spec = build_problem_spec(args);
    let problem = spec.build()?;
    let mut x0_rng = rng::stream(args.seed, StreamId::StartPoint);
    let x0 = sample_start(&problem, start_scheme(args), &mut x0_rng)?;
    let cfg = SolverConfig {
        method: args.method.into(),
        direction: args.direction.into(),
        init: args.init.into_scheme(args.scale),
        tol_residual: args.tol,
        max_iters: args.max_iters,
        seed: args.seed,
        record_sigma: args.record_sigma,
        debug_checks: args.debug_checks,
        fd_jacobian: args.fd_jacobian,
        fd_step: 1e-6,
    };
    let trace = solve(&problem, &x0, cfg);

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let csv_path = trace.save_into(dir, "trace")?;
        println!("wrote {}", csv_path.display());
        println!("wrote {}", dir.join("trace.meta.json").display());
    } else {
        print!("{}", trace.csv_string());
    }
    eprintln!(
        "status: {} after {} iterations, final residual {:.3e}",
        status_name(trace.status()),
        trace.meta.iterations,
        trace.meta.final_res_norm
    );
    if let Some(failure) = &trace.meta.failure {
        eprintln!("failure: {failure}");
    }
    Ok(trace.status().exit_code())
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Running => "running",
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max-iters",
        SolveStatus::Degenerate => "degenerate",
        SolveStatus::DomainError => "domain-error",
    }
}

/// Per-method overrides of the shared solver settings in an experiment file.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_sigma: Option<bool>,
}

/// A benchmark sweep: one problem instance, a method list, one or more
/// initialization schemes, and shared solver settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Must equal [`BENCH_SCHEMA_VERSION`].
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    pub inits: Vec<InitScheme>,
    /// Start-point distribution (same JSON shape as the solver's).
    pub x0: StartScheme,
    /// Draw one start point for every cell (default) or one per cell.
    #[serde(default = "default_true")]
    pub shared_x0: bool,
    /// Master seed for start points and direction streams.
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol_residual: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Benchmarks record the Jacobian gap by default; that is the quantity
    /// the sweeps exist to plot.
    #[serde(default = "default_true")]
    pub record_sigma: bool,
    /// Direction rule for the random method.
    #[serde(default)]
    pub direction: Option<DirectionKind>,
    /// Output directory; `--out` overrides.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Per-method overrides, keyed by method name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, ConfigOverride>,
}

fn default_true() -> bool {
    true
}
fn default_tol() -> f64 {
    DEFAULT_TOL_RESIDUAL
}
fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != BENCH_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema_version {}, expected {BENCH_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("method list is empty".into()));
        }
        if self.inits.is_empty() {
            return Err(Error::InvalidConfig("initialization list is empty".into()));
        }
        for name in self.overrides.keys() {
            if !self.methods.iter().any(|m| m.name() == name) {
                return Err(Error::InvalidConfig(format!(
                    "override for {name:?} does not match any listed method"
                )));
            }
        }
        Ok(())
    }
}

fn init_slug(init: &InitScheme) -> &'static str {
    match init {
        InitScheme::ExactJacobianAtX0 => "exact-j0",
        InitScheme::ScaledIdentity { .. } => "scaled-identity",
        InitScheme::ScaledJacobianAtX0 { .. } => "scaled-j0",
        InitScheme::ScaledJacobianAtStar { .. } => "scaled-jstar",
    }
}

/// Cell names are `<method>_<init>`; a numeric suffix disambiguates repeated
/// schemes (e.g. two scaled-identity entries with different scales).
fn cell_name(method: Method, inits: &[InitScheme], idx: usize) -> String {
    let slug = init_slug(&inits[idx]);
    let duplicated = inits
        .iter()
        .enumerate()
        .any(|(j, other)| j != idx && init_slug(other) == slug);
    if duplicated {
        format!("{}_{}-{}", method.name(), slug, idx)
    } else {
        format!("{}_{}", method.name(), slug)
    }
}

/// One cell's result within a bench summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub name: String,
    pub method: Method,
    pub init: InitScheme,
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_res_norm: Option<f64>,
    /// Last recorded relative Jacobian gap.
    pub final_sigma_rel: Option<f64>,
    /// First iteration whose residual met the tolerance.
    pub iters_to_tol: Option<usize>,
    /// Least-squares slope of `ln σ_rel` against `k` (gap decay rate).
    pub sigma_decay_slope: Option<f64>,
    pub trace_file: String,
    pub failure: Option<String>,
}

/// Deterministic sweep report written as `summary.json` (no timings, so
/// reruns are byte-identical).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSummary {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub seed: u64,
    pub shared_x0: bool,
    pub rng_algorithm: String,
    pub cells: Vec<CellSummary>,
}

/// Least-squares slope of `ln(values)` against the iteration index, ignoring
/// non-positive and non-finite entries; `None` with fewer than two points.
pub fn log_decay_slope(points: impl IntoIterator<Item = (usize, f64)>) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .into_iter()
        .filter(|(_, v)| v.is_finite() && *v > 0.0)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mean_k = logs.iter().map(|(k, _)| k).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let cov: f64 = logs.iter().map(|(k, y)| (k - mean_k) * (y - mean_y)).sum();
    let var: f64 = logs.iter().map(|(k, _)| (k - mean_k) * (k - mean_k)).sum();
    if var == 0.0 {
        return None;
    }
    Some(cov / var)
}

fn summarize_cell(name: &str, trace: &IterationTrace, tol: f64) -> CellSummary {
    let final_res = trace.rows.last().map(|r| r.res_norm);
    let final_sigma_rel = trace.rows.last().and_then(|r| r.sigma_rel);
    let iters_to_tol = trace.rows.iter().find(|r| r.res_norm <= tol).map(|r| r.k);
    let slope = log_decay_slope(
        trace.rows.iter().filter_map(|r| r.sigma_rel.map(|s| (r.k, s))),
    );
    CellSummary {
        name: name.to_owned(),
        method: trace.meta.method,
        init: trace.meta.init,
        status: trace.meta.status,
        iterations: trace.meta.iterations,
        final_res_norm: final_res,
        final_sigma_rel,
        iters_to_tol,
        sigma_decay_slope: slope,
        trace_file: format!("{name}.csv"),
        failure: trace.meta.failure.clone(),
    }
}

/// Writes `content` to `path` atomically (temp file + rename), so partially
/// written cells never appear even when runs race or are interrupted.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn thread_cap(cells: usize) -> usize {
    let hw = std::thread::available_parallelism().map_or(1, |p| p.get());
    let cap = std::env::var(THREADS_ENV_VAR)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(hw);
    cap.min(cells).max(1)
}

struct CellPlan {
    name: String,
    cfg: SolverConfig,
    x0: DenseVector,
}

/// Runs every (method × init) cell of a parsed experiment and returns the traces
/// in cell order. Concurrency is capped by [`THREADS_ENV_VAR`]; results are
/// independent of the cap because every cell owns its streams.
pub fn run_bench_cells(
    spec: &ExperimentSpec,
    problem: &Problem,
) -> Result<Vec<(String, IterationTrace)>> {
    let shared_x0 = {
        let mut x0_rng = rng::substream(spec.seed, StreamId::StartPoint, 0);
        sample_start(problem, spec.x0, &mut x0_rng)?
    };
    let mut plans: Vec<CellPlan> = Vec::new();
    for method in &spec.methods {
        let over = spec.overrides.get(method.name()).copied().unwrap_or_default();
        for (idx, init) in spec.inits.iter().enumerate() {
            let cell_index = plans.len();
            let x0 = if spec.shared_x0 {
                shared_x0.clone()
            } else {
                let mut x0_rng =
                    rng::substream(spec.seed, StreamId::StartPoint, cell_index as u64 + 1);
                sample_start(problem, spec.x0, &mut x0_rng)?
            };
            let cfg = SolverConfig {
                method: *method,
                direction: over
                    .direction
                    .or(spec.direction)
                    .unwrap_or(DirectionKind::UniformBasis),
                init: *init,
                tol_residual: over.tol_residual.unwrap_or(spec.tol_residual),
                max_iters: over.max_iters.unwrap_or(spec.max_iters),
                seed: spec.seed,
                record_sigma: over.record_sigma.unwrap_or(spec.record_sigma),
                debug_checks: false,
                fd_jacobian: false,
                fd_step: 1e-6,
            };
            plans.push(CellPlan { name: cell_name(*method, &spec.inits, idx), cfg, x0 });
        }
    }

    let threads = thread_cap(plans.len());
    let mut results: Vec<Option<(String, IterationTrace)>> =
        (0..plans.len()).map(|_| None).collect();
    for (wave_idx, wave) in plans.chunks(threads).enumerate() {
        let offset = wave_idx * threads;
        std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|plan| {
                    scope.spawn(move || {
                        (plan.name.clone(), solve(problem, &plan.x0, plan.cfg))
                    })
                })
                .collect();
            for (i, handle) in handles.into_iter().enumerate() {
                results[offset + i] = Some(handle.join().expect("solver threads do not panic"));
            }
        });
    }
    Ok(results.into_iter().map(|r| r.expect("every cell ran")).collect())
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.spec)?;
    let spec = ExperimentSpec::from_json(&text)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| spec.out_dir.clone())
        .ok_or_else(|| Error::InvalidConfig("no output directory (experiment out_dir or --out)".into()))?;
    std::fs::create_dir_all(&out_dir)?;

    let problem = spec.problem.build()?;
    let traces = run_bench_cells(&spec, &problem)?;

    let mut cells = Vec::with_capacity(traces.len());
    for (name, trace) in &traces {
        write_atomic(&out_dir.join(format!("{name}.csv")), &trace.csv_string())?;
        let tol = trace.meta.tol_residual;
        cells.push(summarize_cell(name, trace, tol));
        println!(
            "{name}: {} after {} iterations, final residual {:.3e}",
            status_name(trace.status()),
            trace.meta.iterations,
            trace.meta.final_res_norm
        );
    }
    let summary = BenchSummary {
        schema_version: BENCH_SCHEMA_VERSION,
        problem: spec.problem,
        seed: spec.seed,
        shared_x0: spec.shared_x0,
        rng_algorithm: rng::RNG_ALGORITHM.into(),
        cells,
    };
    let summary_json = serde_json::to_string_pretty(&summary)?;
    write_atomic(&out_dir.join("summary.json"), &summary_json)?;
    println!("wrote {}", out_dir.join("summary.json").display());

    let all_failed = summary.cells.iter().all(|c| {
        matches!(c.status, SolveStatus::Degenerate | SolveStatus::DomainError)
    });
    Ok(if all_failed { 1 } else { 0 })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let suite = VerifySuite::parse(&args.suite)?;
    let results = verify::run_suite(suite);
    for result in &results {
        println!("{result}");
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{}: {passed}/{} checks passed", suite.name(), results.len());
    Ok(if verify::all_pass(&results) { 0 } else { 1 })
}

fn cmd_rates(args: &RatesArgs) -> Result<i32> {
    if args.n < 2 {
        return Err(Error::InvalidConfig(format!(
            "the comparison needs dimension ≥ 2, got {}",
            args.n
        )));
    }
    let k_max = args.k_max.unwrap_or_else(|| 10 * theory::crossover_iteration(args.n));
    let csv = theory::rate_table_csv(args.n, k_max);
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            write_atomic(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_spec_json() -> String {
        r#"{
            "schema_version": 1,
            "problem": {"kind": "linear", "n": 6, "seed": 4},
            "methods": ["classical", "greedy"],
            "inits": [{"scheme": "scaled-identity", "scale": 2.0}],
            "x0": {"dist": "normal"},
            "seed": 11
        }"#
        .to_owned()
    }

    #[test]
    fn spec_parses_with_defaults() {
        let spec = ExperimentSpec::from_json(&minimal_spec_json()).unwrap();
        assert!(spec.shared_x0);
        assert!(spec.record_sigma);
        assert_eq!(spec.tol_residual, DEFAULT_TOL_RESIDUAL);
        assert_eq!(spec.max_iters, DEFAULT_MAX_ITERS);
        assert_eq!(spec.methods, vec![Method::Classical, Method::Greedy]);
    }

    #[test]
    fn spec_rejects_bad_inputs() {
        let missing_version = r#"{
            "problem": {"kind": "linear", "n": 6, "seed": 4},
            "methods": ["classical"],
            "inits": [{"scheme": "exact-j0"}],
            "x0": {"dist": "normal"},
            "seed": 1
        }"#;
        assert!(ExperimentSpec::from_json(missing_version).is_err());

        let empty_methods = minimal_spec_json().replace(
            r#""methods": ["classical", "greedy"]"#,
            r#""methods": []"#,
        );
        assert!(ExperimentSpec::from_json(&empty_methods).is_err());

        let wrong_version = minimal_spec_json().replace(
            r#""schema_version": 1"#,
            r#""schema_version": 99"#,
        );
        assert!(ExperimentSpec::from_json(&wrong_version).is_err());

        let stray_override = minimal_spec_json().replace(
            r#""seed": 11"#,
            r#""seed": 11, "overrides": {"newton": {"max_iters": 3}}"#,
        );
        assert!(ExperimentSpec::from_json(&stray_override).is_err());
    }

    #[test]
    fn cell_names_disambiguate_duplicate_schemes() {
        let unique = vec![
            InitScheme::ExactJacobianAtX0,
            InitScheme::ScaledIdentity { scale: 2.0 },
        ];
        assert_eq!(cell_name(Method::Greedy, &unique, 0), "greedy_exact-j0");
        assert_eq!(cell_name(Method::Greedy, &unique, 1), "greedy_scaled-identity");
        let dup = vec![
            InitScheme::ScaledIdentity { scale: 2.0 },
            InitScheme::ScaledIdentity { scale: 8.0 },
        ];
        assert_eq!(cell_name(Method::Bad, &dup, 0), "bad_scaled-identity-0");
        assert_eq!(cell_name(Method::Bad, &dup, 1), "bad_scaled-identity-1");
    }

    #[test]
    fn bench_cells_share_the_start_point_when_asked() {
        let spec = ExperimentSpec::from_json(&minimal_spec_json()).unwrap();
        let problem = spec.problem.build().unwrap();
        let traces = run_bench_cells(&spec, &problem).unwrap();
        assert_eq!(traces.len(), 2);
        // Same x₀ ⇒ identical k = 0 residual in every cell.
        let first = traces[0].1.rows[0].res_norm;
        for (_, trace) in &traces {
            assert_eq!(trace.rows[0].res_norm.to_bits(), first.to_bits());
        }
    }

    #[test]
    fn bench_runs_are_deterministic_end_to_end() {
        let spec = ExperimentSpec::from_json(&minimal_spec_json()).unwrap();
        let problem = spec.problem.build().unwrap();
        let a = run_bench_cells(&spec, &problem).unwrap();
        let b = run_bench_cells(&spec, &problem).unwrap();
        for ((name_a, trace_a), (name_b, trace_b)) in a.iter().zip(&b) {
            assert_eq!(name_a, name_b);
            assert_eq!(trace_a.csv_string(), trace_b.csv_string());
        }
    }

    #[test]
    fn decay_slope_recovers_exact_geometric_decay() {
        // σ_k = 4·e^{-0.3k} has ln-slope exactly −0.3.
        let points = (0..30).map(|k| (k, 4.0 * (-0.3 * k as f64).exp()));
        let slope = log_decay_slope(points).unwrap();
        assert!((slope + 0.3).abs() < 1e-12);
        assert_eq!(log_decay_slope([(0, 1.0)]), None);
        assert_eq!(log_decay_slope([(0, -1.0), (1, 0.0), (2, f64::NAN)]), None);
    }

    #[test]
    fn summary_serialization_shape() {
        let spec = ExperimentSpec::from_json(&minimal_spec_json()).unwrap();
        let problem = spec.problem.build().unwrap();
        let traces = run_bench_cells(&spec, &problem).unwrap();
        let cells: Vec<CellSummary> = traces
            .iter()
            .map(|(name, t)| summarize_cell(name, t, t.meta.tol_residual))
            .collect();
        let summary = BenchSummary {
            schema_version: BENCH_SCHEMA_VERSION,
            problem: spec.problem,
            seed: spec.seed,
            shared_x0: spec.shared_x0,
            rng_algorithm: rng::RNG_ALGORITHM.into(),
            cells,
        };
        let json: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&summary).unwrap()).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["problem"]["kind"], "linear");
        assert_eq!(json["cells"][0]["method"], "classical");
        assert_eq!(json["cells"][0]["status"], "converged");
        assert_eq!(json["cells"][0]["trace_file"], "classical_scaled-identity.csv");
        assert!(json["cells"][0]["final_sigma_rel"].is_number());
        assert!(json["cells"][0]["sigma_decay_slope"].is_number());
        // Round-trips through the declared types.
        let back: BenchSummary = serde_json::from_value(json).unwrap();
        assert_eq!(back.cells.len(), 2);
    }

    #[test]
    fn run_maps_usage_errors_to_exit_1_and_help_to_0() {
        assert_eq!(run(["broyden-lab", "solve", "--method", "sorcery"]), 1);
        assert_eq!(run(["broyden-lab", "definitely-not-a-command"]), 1);
        assert_eq!(run(["broyden-lab", "--help"]), 0);
    }
}
