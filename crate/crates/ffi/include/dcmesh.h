#ifndef DCMESH_H
#define DCMESH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  DCM_STATUS_OK = 0,
  DCM_STATUS_NULL_POINTER = 1,
  DCM_STATUS_INVALID_ARGUMENT = 2,
  DCM_STATUS_DIMENSION = 3,
  DCM_STATUS_GRAPH = 4,
  DCM_STATUS_IO = 5,
  DCM_STATUS_PARSE = 6,
  DCM_STATUS_NUMERIC = 7,
  DCM_STATUS_OUT_OF_RANGE = 8,
  DCM_STATUS_PANIC = 9,
} DcmStatus;

typedef enum {
  DCM_ALGORITHM_PDC = 0,
  DCM_ALGORITHM_DC = 1,
  DCM_ALGORITHM_RPDC = 2,
} DcmAlgorithm;

typedef struct DcmGraph DcmGraph;

typedef struct DcmProblem DcmProblem;

typedef struct DcmTrace DcmTrace;

/**
 * Solver settings. Start from [`dcm_solver_options_default`].
 */
typedef struct {
  DcmAlgorithm algorithm;
  double c;
  /**
   * Proximal parameter; a value `<= 0` means `tau = c`.
   */
  double tau;
  double eps_inner;
  double beta_factor;
  double c1;
  size_t inner_cap;
  size_t max_iters;
  double stop_tol;
  /**
   * Run every iteration up to `max_iters` and ignore `stop_tol`.
   */
  bool fixed_iterations;
  uint64_t seed;
  /**
   * Agent ON probability (randomized method).
   */
  double alpha;
  /**
   * Link failure probability (randomized method).
   */
  double pe;
  bool debug;
} DcmSolverOptions;

/**
 * One row of a run trace. `acc` is NaN when no reference objective was given.
 */
typedef struct {
  size_t k;
  double objective;
  double acc;
  double feas;
  double coupling_residual;
  double consensus_residual;
  size_t inner_iterations;
} DcmTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *dcm_last_error(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from a dcmesh call and not have been freed yet.
 */
void dcm_string_free(char *s);

/**
 * Loads a problem from its JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
DcmStatus dcm_problem_load(const char *path, DcmProblem **out);

/**
 * Saves a problem as JSON.
 *
 * # Safety
 * `problem` must be a live handle and `path` a NUL-terminated string.
 */
DcmStatus dcm_problem_save(const DcmProblem *problem, const char *path);

/**
 * Random constrained LASSO instance with `n_agents + 1` agents.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
DcmStatus dcm_problem_generate_lasso(size_t n_agents,
                                     size_t k,
                                     size_t l,
                                     size_t p,
                                     double lambda,
                                     uint64_t seed,
                                     DcmProblem **out);

/**
 * Random load control instance with `n_agents + 1` agents.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
DcmStatus dcm_problem_generate_load_control(size_t n_agents,
                                            size_t k,
                                            size_t l,
                                            size_t p,
                                            uint64_t seed,
                                            DcmProblem **out);

/**
 * Number of agents, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t dcm_problem_n_agents(const DcmProblem *problem);

/**
 * # Safety
 * `problem` must be NULL or a handle not yet freed.
 */
void dcm_problem_free(DcmProblem *problem);

/**
 * Connected Erdos-Renyi graph on `n` nodes.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
DcmStatus dcm_graph_random(size_t n, double edge_prob, uint64_t seed, DcmGraph **out);

/**
 * Graph from `n_edges` node pairs stored flat in `edges` (`2 * n_edges` entries).
 *
 * # Safety
 * `edges` must point to `2 * n_edges` readable values (or be NULL when
 * `n_edges` is 0) and `out` must be writable.
 */
DcmStatus dcm_graph_from_edges(size_t n, const size_t *edges, size_t n_edges, DcmGraph **out);

/**
 * # Safety
 * `graph` must be NULL or a live handle.
 */
size_t dcm_graph_num_edges(const DcmGraph *graph);

/**
 * # Safety
 * `graph` must be NULL or a handle not yet freed.
 */
void dcm_graph_free(DcmGraph *graph);

DcmSolverOptions dcm_solver_options_default(void);

/**
 * Runs one solve. `obj_star` is the reference objective, or NaN for none.
 * `options` may be NULL for the defaults.
 *
 * # Safety
 * `problem` and `graph` must be live handles, `options` NULL or readable,
 * and `out` writable.
 */
DcmStatus dcm_solve(const DcmProblem *problem,
                    const DcmGraph *graph,
                    const DcmSolverOptions *options,
                    double obj_star,
                    DcmTrace **out);

/**
 * High-accuracy reference solve. Writes the optimal value and the KKT
 * residual reached; either output may be NULL.
 *
 * # Safety
 * `problem` must be a live handle; non-NULL outputs must be writable.
 */
DcmStatus dcm_reference_solve(const DcmProblem *problem,
                              double tol,
                              double *obj_star,
                              double *kkt,
                              bool *converged);

/**
 * Number of recorded iterations, or 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t dcm_trace_iterations(const DcmTrace *trace);

/**
 * Whether the stop rule fired before the iteration cap.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
bool dcm_trace_converged(const DcmTrace *trace);

/**
 * Copies row `index` (0-based) of the trace into `row`.
 *
 * # Safety
 * `trace` must be a live handle and `row` writable.
 */
DcmStatus dcm_trace_row(const DcmTrace *trace, size_t index, DcmTraceRow *row);

/**
 * Writes the trace as CSV.
 *
 * # Safety
 * `trace` must be a live handle and `path` a NUL-terminated string.
 */
DcmStatus dcm_trace_write_csv(const DcmTrace *trace, const char *path);

/**
 * Run summary as a JSON string; free it with [`dcm_string_free`]. NULL on failure.
 *
 * # Safety
 * `trace` must be a live handle.
 */
char *dcm_trace_summary_json(const DcmTrace *trace);

/**
 * # Safety
 * `trace` must be NULL or a handle not yet freed.
 */
void dcm_trace_free(DcmTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCMESH_H */
