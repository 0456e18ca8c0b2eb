//! Per-iteration traces and their on-disk form.
//!
//! A run produces one CSV file (one row per accepted iterate, fixed header,
//! floats printed with 17 significant digits so they parse back bit-exactly)
//! plus a JSON metadata sidecar carrying the configuration echo, the problem
//! descriptor, the generator identity, the terminal status and wall time.
//! Reruns of the same configuration and seed produce bitwise-identical CSV;
//! only the sidecar's wall time may differ.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::broyden::DirectionKind;
use crate::densealg::DenseVector;
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::solver::{InitScheme, Method, SolveStatus};

/// Exact column header of trace CSV files.
pub const TRACE_CSV_HEADER: &str = "k,res_norm,r_k,sigma_abs,sigma_rel,direction_index,step_norm";

/// Version stamp written into every metadata sidecar.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Formats a float with 17 significant digits (round-trip exact for `f64`).
pub fn format_f64_exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// One accepted iterate.
///
/// Fields that are unavailable (unknown root, σ recording off, terminal row
/// with no outgoing step) serialize as empty CSV cells. `direction_index`
/// and `step_norm` on row `k` describe the step *leaving* iterate `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// `‖F(x_k)‖`.
    pub res_norm: f64,
    /// `‖x_k − x*‖` when the root is known.
    pub r_k: Option<f64>,
    /// `‖B_k − J(x_k)‖_F` when σ recording is on and `B_k` exists.
    pub sigma_abs: Option<f64>,
    /// `sigma_abs / ‖J(x_k)‖_F`.
    pub sigma_rel: Option<f64>,
    /// 0-based basis index chosen by greedy or uniform-basis rules.
    pub direction_index: Option<usize>,
    /// `‖x_{k+1} − x_k‖`.
    pub step_norm: Option<f64>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(format_f64_exact).unwrap_or_default()
}

fn parse_opt_f64(cell: &str, what: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad {what} value {cell:?}")))
}

impl TraceRow {
    /// Serializes one row as a CSV line (no trailing newline).
    pub fn to_csv_line(&self) -> String {
        let mut line = String::new();
        let _ = write!(
            line,
            "{},{},{},{},{},{},{}",
            self.k,
            format_f64_exact(self.res_norm),
            opt_cell(self.r_k),
            opt_cell(self.sigma_abs),
            opt_cell(self.sigma_rel),
            self.direction_index.map(|i| i.to_string()).unwrap_or_default(),
            opt_cell(self.step_norm),
        );
        line
    }

    /// Parses one CSV data line; empty cells become `None`.
    pub fn from_csv_line(line: &str) -> Result<Self> {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 7 {
            return Err(Error::Parse(format!(
                "trace row has {} cells, expected 7: {line:?}",
                cells.len()
            )));
        }
        let k = cells[0]
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad iteration index {:?}", cells[0])))?;
        let res_norm = cells[1]
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad res_norm {:?}", cells[1])))?;
        let direction_index = if cells[5].is_empty() {
            None
        } else {
            Some(
                cells[5]
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad direction_index {:?}", cells[5])))?,
            )
        };
        Ok(Self {
            k,
            res_norm,
            r_k: parse_opt_f64(cells[2], "r_k")?,
            sigma_abs: parse_opt_f64(cells[3], "sigma_abs")?,
            sigma_rel: parse_opt_f64(cells[4], "sigma_rel")?,
            direction_index,
            step_norm: parse_opt_f64(cells[6], "step_norm")?,
        })
    }
}

/// JSON cannot carry non-finite floats, so serializers emit `null`; read it
/// back as NaN instead of failing.
fn f64_null_as_nan<'de, D>(d: D) -> std::result::Result<f64, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Configuration echo + provenance written next to every trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMeta {
    pub schema_version: u32,
    pub status: SolveStatus,
    /// Final iteration index (number of steps taken).
    pub iterations: usize,
    /// `‖F‖` at the last recorded iterate. NaN (serialized as JSON `null`)
    /// when the run failed before recording any row.
    #[serde(deserialize_with = "f64_null_as_nan")]
    pub final_res_norm: f64,
    pub method: Method,
    pub direction: DirectionKind,
    pub init: InitScheme,
    pub tol_residual: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub record_sigma: bool,
    pub debug_checks: bool,
    pub fd_jacobian: bool,
    /// Descriptor of the problem instance, when it has one.
    pub problem: Option<ProblemSpec>,
    /// Random-generator identity (see [`crate::rng::RNG_ALGORITHM`]).
    pub rng_algorithm: String,
    pub wall_time_s: f64,
    /// True when initialization consulted the stored root (`J(x*)` scaling).
    pub oracle_assisted_init: bool,
    /// Largest `‖B_k·H_k − I‖_F / max(1, ‖B_k‖_F)` observed, when debug
    /// checks ran.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_inverse_consistency_error: Option<f64>,
    /// Message of the error that terminated the run, for degenerate/domain
    /// statuses.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

/// Complete record of one solver run.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    /// Last accepted iterate (absent only when initialization itself failed).
    pub final_x: Option<DenseVector>,
    pub meta: TraceMeta,
}

impl IterationTrace {
    pub fn status(&self) -> SolveStatus {
        self.meta.status
    }

    /// Renders the CSV body (header plus one line per accepted iterate).
    pub fn csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }

    /// Parses rows back from [`csv_string`](Self::csv_string) output.
    pub fn parse_csv_rows(text: &str) -> Result<Vec<TraceRow>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == TRACE_CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "bad trace header {other:?}, expected {TRACE_CSV_HEADER:?}"
                )))
            }
        }
        lines.map(TraceRow::from_csv_line).collect()
    }

    pub fn meta_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta)?)
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json` into `dir`; returns the
    /// CSV path.
    pub fn save_into(&self, dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, self.csv_string())?;
        std::fs::write(dir.join(format!("{stem}.meta.json")), self.meta_json_string()?)?;
        Ok(csv_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<TraceRow> {
        vec![
            TraceRow {
                k: 0,
                res_norm: 2.0 / 3.0,
                r_k: Some(1.0 / 7.0),
                sigma_abs: None,
                sigma_rel: None,
                direction_index: None,
                step_norm: Some(0.125),
            },
            TraceRow {
                k: 1,
                res_norm: 1e-13,
                r_k: None,
                sigma_abs: Some(3.5e-2),
                sigma_rel: Some(1.2e-3),
                direction_index: Some(4),
                step_norm: None,
            },
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let trace = IterationTrace {
            rows: sample_rows(),
            final_x: None,
            meta: dummy_meta(),
        };
        let text = trace.csv_string();
        assert!(text.starts_with(TRACE_CSV_HEADER));
        let parsed = IterationTrace::parse_csv_rows(&text).unwrap();
        assert_eq!(parsed, trace.rows);
    }

    #[test]
    fn seventeen_digit_floats_round_trip() {
        for &v in &[1.0 / 3.0, 0.1, 1e-300, 2.2250738585072014e-308, 9.87e307] {
            let s = format_f64_exact(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(IterationTrace::parse_csv_rows("nope\n").is_err());
        let bad_cells = format!("{TRACE_CSV_HEADER}\n1,2,3\n");
        assert!(IterationTrace::parse_csv_rows(&bad_cells).is_err());
        let bad_value = format!("{TRACE_CSV_HEADER}\n1,abc,,,,,\n");
        assert!(IterationTrace::parse_csv_rows(&bad_value).is_err());
    }

    fn dummy_meta() -> TraceMeta {
        TraceMeta {
            schema_version: TRACE_SCHEMA_VERSION,
            status: SolveStatus::Converged,
            iterations: 1,
            final_res_norm: 1e-13,
            method: Method::Greedy,
            direction: DirectionKind::GreedyBasis,
            init: InitScheme::ExactJacobianAtX0,
            tol_residual: 1e-12,
            max_iters: 500,
            seed: 0,
            record_sigma: true,
            debug_checks: false,
            fd_jacobian: false,
            problem: None,
            rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
            wall_time_s: 0.0,
            oracle_assisted_init: false,
            max_inverse_consistency_error: None,
            failure: None,
        }
    }

    #[test]
    fn meta_serializes_with_stable_field_names() {
        let trace = IterationTrace { rows: vec![], final_x: None, meta: dummy_meta() };
        let json = trace.meta_json_string().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["schema_version"], 1);
        assert_eq!(value["status"], "converged");
        assert_eq!(value["method"], "greedy");
        assert_eq!(value["rng_algorithm"], "chacha8");
        assert_eq!(value["init"]["scheme"], "exact-j0");
        let back: TraceMeta = serde_json::from_str(&json).unwrap();
        assert_eq!(back.iterations, 1);
    }
}
