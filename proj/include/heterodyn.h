/*
 * heterodyn — evolutionary dynamics in heterogeneous populations.
 *
 * C interface to the simulation core. All functions are thread-compatible:
 * distinct handles may be used from distinct threads, a single handle must
 * not be shared without external synchronization. Error messages are
 * thread-local and survive until the next failing call on the same thread.
 */
#ifndef HETERODYN_H
#define HETERODYN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hd_status {
  HD_OK = 0,
  HD_ERR_INVALID_ARGUMENT = 1, /* null handle or out-of-domain parameter */
  HD_ERR_VALIDATION = 2,       /* scenario document failed validation */
  HD_ERR_IO = 3,               /* file could not be read or written */
  HD_ERR_RUNTIME = 4           /* computation failed (e.g. divergence) */
} hd_status;

typedef struct hd_scenario hd_scenario; /* opaque parsed scenario */
typedef struct hd_grid hd_grid;         /* opaque quadrature grid */

/* Library version string; static storage, never freed. */
const char* hd_version(void);

/* Message for the most recent failure on the calling thread ("" if none). */
const char* hd_last_error(void);

/* ---- scenarios -------------------------------------------------------- */

/* Parses a scenario JSON document; on success stores a new handle in *out.
 * Validation failures return HD_ERR_VALIDATION with every problem listed
 * in hd_last_error(). */
hd_status hd_scenario_parse(const char* json_text, hd_scenario** out);

/* Reads and parses a scenario file. */
hd_status hd_scenario_load(const char* path, hd_scenario** out);

void hd_scenario_free(hd_scenario* sc);

/* Scenario name; pointer owned by the handle. */
const char* hd_scenario_name(const hd_scenario* sc);

/* Canonical serialization; round-trips through hd_scenario_parse.
 * Release the string with hd_string_free. */
hd_status hd_scenario_to_json(const hd_scenario* sc, char** out);

void hd_string_free(char* s);

/* Overrides applied to later hd_run calls on the same handle. The seed
 * override steers every seeded block of the scenario (random initial state,
 * gradient-check pairs, probe states, assumption samples). */
hd_status hd_scenario_set_seed(hd_scenario* sc, uint64_t seed);
hd_status hd_scenario_set_dt(hd_scenario* sc, double dt);
hd_status hd_scenario_set_t_end(hd_scenario* sc, double t_end);
hd_status hd_scenario_set_out_dir(hd_scenario* sc, const char* dir);

/* ---- running ----------------------------------------------------------- */

/* Runs one command against the scenario and writes its artifacts into the
 * scenario's output directory. Commands: "simulate", "equilibrium",
 * "potential-check", "aggregability-demo", "assumptions".
 *
 * *exit_code receives the process-style status: 0 all requested checks
 * passed, 1 check failure, 2 configuration problem, 3 I/O failure,
 * 4 runtime failure. If summary_out is non-null it receives the summary
 * JSON text (release with hd_string_free). The hd_status return reports
 * API misuse only; domain failures are in *exit_code and the summary. */
hd_status hd_run(hd_scenario* sc, const char* command, int* exit_code,
                 char** summary_out);

/* ---- grids ------------------------------------------------------------- */

/* Discretizes the scenario's type distribution. */
hd_status hd_grid_build(const hd_scenario* sc, hd_grid** out);
void hd_grid_free(hd_grid* g);

int hd_grid_size(const hd_grid* g); /* node count, -1 on null */
int hd_grid_dim(const hd_grid* g);  /* type dimension, -1 on null */

/* Copies node coordinates (size*dim doubles, row-major) or quadrature
 * weights (size doubles) into caller storage of the stated length. */
hd_status hd_grid_nodes(const hd_grid* g, double* out, size_t len);
hd_status hd_grid_weights(const hd_grid* g, double* out, size_t len);

/* Weighted column sums of a conditional state (size x n_strategies,
 * row-major); out receives n_strategies doubles. */
hd_status hd_grid_aggregate(const hd_grid* g, const double* state,
                            int n_strategies, double* out);

/* Weight-integrated L1 norm of a state-space difference. */
hd_status hd_grid_variational_norm(const hd_grid* g, const double* delta,
                                   int n_strategies, double* out);

#ifdef __cplusplus
}
#endif

#endif /* HETERODYN_H */
