//! The benchmark summary JSON must conform to the shipped draft-07 schema,
//! and the schema must actually reject malformed summaries.

use broyden_lab::cli::{BenchSummary, CellSummary, ExperimentSpec, BENCH_SCHEMA_VERSION};
use broyden_lab::rng::RNG_ALGORITHM;
use serde_json::{json, Value};

fn schema() -> Value {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../schemas/bench_summary.schema.json"
    );
    serde_json::from_str(&std::fs::read_to_string(path).expect("schema file exists"))
        .expect("schema file is valid JSON")
}

fn produce_summary(record_sigma: bool) -> Value {
    let spec_json = format!(
        r#"{{
            "schema_version": 1,
            "problem": {{"kind": "hequation", "n": 8, "seed": 3, "c": 0.5}},
            "methods": ["newton", "classical", "bad", "greedy", "random"],
            "inits": [{{"scheme": "exact-j0"}}, {{"scheme": "scaled-identity", "scale": 1.0}}],
            "x0": {{"dist": "near-solution", "rho": 0.2}},
            "seed": 7,
            "record_sigma": {record_sigma}
        }}"#
    );
    let spec = ExperimentSpec::from_json(&spec_json).unwrap();
    let problem = spec.problem.build().unwrap();
    let traces = broyden_lab::cli::run_bench_cells(&spec, &problem).unwrap();
    let cells: Vec<CellSummary> = traces
        .iter()
        .map(|(name, trace)| {
            let row = trace.rows.last();
            CellSummary {
                name: name.clone(),
                method: trace.meta.method,
                init: trace.meta.init,
                status: trace.meta.status,
                iterations: trace.meta.iterations,
                final_res_norm: row.map(|r| r.res_norm),
                final_sigma_rel: row.and_then(|r| r.sigma_rel),
                iters_to_tol: trace
                    .rows
                    .iter()
                    .find(|r| r.res_norm <= trace.meta.tol_residual)
                    .map(|r| r.k),
                sigma_decay_slope: broyden_lab::cli::log_decay_slope(
                    trace.rows.iter().filter_map(|r| r.sigma_rel.map(|s| (r.k, s))),
                ),
                trace_file: format!("{name}.csv"),
                failure: trace.meta.failure.clone(),
            }
        })
        .collect();
    serde_json::to_value(BenchSummary {
        schema_version: BENCH_SCHEMA_VERSION,
        problem: spec.problem,
        seed: spec.seed,
        shared_x0: spec.shared_x0,
        rng_algorithm: RNG_ALGORITHM.into(),
        cells,
    })
    .unwrap()
}

#[test]
fn produced_summaries_validate_against_the_schema() {
    let validator = jsonschema::validator_for(&schema()).expect("schema compiles");
    for record_sigma in [true, false] {
        let summary = produce_summary(record_sigma);
        let errors: Vec<String> = validator
            .iter_errors(&summary)
            .map(|e| format!("{} at {}", e, e.instance_path()))
            .collect();
        assert!(
            errors.is_empty(),
            "summary (record_sigma={record_sigma}) violates schema: {errors:?}"
        );
    }
}

#[test]
fn schema_rejects_malformed_summaries() {
    let validator = jsonschema::validator_for(&schema()).expect("schema compiles");
    let good = produce_summary(true);
    assert!(validator.is_valid(&good));

    let mut missing_field = good.clone();
    missing_field.as_object_mut().unwrap().remove("rng_algorithm");
    assert!(!validator.is_valid(&missing_field));

    let mut bad_status = good.clone();
    bad_status["cells"][0]["status"] = json!("exploded");
    assert!(!validator.is_valid(&bad_status));

    let mut bad_version = good.clone();
    bad_version["schema_version"] = json!(2);
    assert!(!validator.is_valid(&bad_version));

    let mut empty_cells = good.clone();
    empty_cells["cells"] = json!([]);
    assert!(!validator.is_valid(&empty_cells));

    let mut negative_residual = good.clone();
    negative_residual["cells"][0]["final_res_norm"] = json!(-1.0);
    assert!(!validator.is_valid(&negative_residual));

    let mut stray_key = good.clone();
    stray_key["wall_time_s"] = json!(0.5);
    assert!(!validator.is_valid(&stray_key));

    let mut bad_trace_name = good;
    bad_trace_name["cells"][0]["trace_file"] = json!("classical_exact-j0.json");
    assert!(!validator.is_valid(&bad_trace_name));
}
