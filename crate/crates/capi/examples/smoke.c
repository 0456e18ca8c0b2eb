#include "broyden_lab.h"
#include <assert.h>
#include <math.h>
#include <stdio.h>

int main(void) {
    BrProblem *p = NULL;
    assert(br_problem_hequation(10, 1, 0.5, &p) == BR_CODE_OK);
    size_t dim = 0;
    assert(br_problem_dim(p, &dim) == BR_CODE_OK && dim == 10);

    BrConfig *cfg = NULL;
    assert(br_config_new(&cfg) == BR_CODE_OK);
    assert(br_config_set_method(cfg, BR_METHOD_GREEDY) == BR_CODE_OK);
    assert(br_config_set_record_sigma(cfg, true) == BR_CODE_OK);

    double x0[10];
    assert(br_sample_start(p, BR_START_NEAR_SOLUTION, 0.1, 5, x0, dim) == BR_CODE_OK);

    BrTrace *trace = NULL;
    assert(br_solve(p, cfg, x0, dim, &trace) == BR_CODE_OK);
    assert(br_trace_status(trace) == BR_SOLVE_STATUS_CONVERGED);
    assert(br_trace_final_res_norm(trace) <= 1e-12);

    size_t rows = br_trace_len(trace);
    assert(rows >= 2);
    BrTraceRow row;
    assert(br_trace_row(trace, rows - 1, &row) == BR_CODE_OK);
    assert(row.k == rows - 1);
    assert(isfinite(row.sigma_rel));

    char *csv = br_trace_csv(trace);
    assert(csv != NULL);
    br_string_free(csv);

    assert(br_problem_linear(4, 0, NULL) == BR_CODE_NULL_POINTER);
    assert(br_last_error_message() != NULL);

    br_trace_free(trace);
    br_config_free(cfg);
    br_problem_free(p);
    printf("c smoke test passed (version %s, %zu rows)\n", br_version(), rows);
    return 0;
}
