#ifndef OLAB_OLAB_H
#define OLAB_OLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(OLAB_BUILDING_LIBRARY)
#define OLAB_API __attribute__((visibility("default")))
#else
#define OLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; on failure olab_last_error() holds a
   message for the calling thread until its next failing call. Output
   pointers are left untouched on failure. */
typedef enum olab_status {
  OLAB_OK = 0,
  OLAB_ERR_ARGUMENT = 1,   /* null handle, bad enum value */
  OLAB_ERR_VALIDATION = 2, /* malformed config, grid or problem */
  OLAB_ERR_DOMAIN = 3,     /* point outside the grid */
  OLAB_ERR_NUMERICAL = 4,
  OLAB_ERR_INVARIANT = 5,
  OLAB_ERR_DIVERGENCE = 6, /* Newton failed to converge */
  OLAB_ERR_CYCLING = 7,    /* active sets did not settle */
  OLAB_ERR_IO = 8,
  OLAB_ERR_INTERNAL = 9
} olab_status;

OLAB_API const char* olab_version(void);
OLAB_API const char* olab_status_name(olab_status status);
OLAB_API const char* olab_last_error(void);

/* ---- run configs ---- */

typedef struct olab_config olab_config;

OLAB_API olab_status olab_config_load(const char* path, olab_config** out);
/* source_name is used in error messages; may be NULL. */
OLAB_API olab_status olab_config_parse(const char* text, const char* source_name, olab_config** out);
OLAB_API void olab_config_free(olab_config* cfg);

OLAB_API olab_status olab_config_set_output_dir(olab_config* cfg, const char* dir);
/* "penalty" or "pdas" */
OLAB_API olab_status olab_config_set_solver(olab_config* cfg, const char* kind);
/* counts become (c - 1) k + 1; k >= 1 */
OLAB_API olab_status olab_config_set_grid_scale(olab_config* cfg, int k);
OLAB_API olab_status olab_config_set_seed(olab_config* cfg, uint64_t seed);
OLAB_API const char* olab_config_name(const olab_config* cfg);

/* ---- runs ---- */

typedef struct olab_run olab_run;

/* A run that finishes returns OLAB_OK even when it diverged or a diagnostic
   failed; olab_run_exit_code() tells those apart (0, 3, 4). */
OLAB_API olab_status olab_run_solve(const olab_config* cfg, olab_run** out);
OLAB_API olab_status olab_run_diagnose(const olab_config* cfg, olab_run** out);
/* max_growth <= 0 selects 0.10 */
OLAB_API olab_status olab_run_convergence(const olab_config* cfg, double max_growth, olab_run** out);
OLAB_API void olab_run_free(olab_run* run);

OLAB_API int olab_run_exit_code(const olab_run* run);
OLAB_API const char* olab_run_status(const olab_run* run);
OLAB_API const char* olab_run_message(const olab_run* run);
OLAB_API const char* olab_run_output_dir(const olab_run* run);
OLAB_API size_t olab_run_artifact_count(const olab_run* run);
OLAB_API const char* olab_run_artifact(const olab_run* run, size_t i);
OLAB_API size_t olab_run_failed_count(const olab_run* run);
OLAB_API const char* olab_run_failed(const olab_run* run, size_t i);

/* ---- comparing two output directories ---- */

typedef struct olab_compare olab_compare;

/* Tolerances <= 0 select the defaults (1e-8 on fields, 1e-6 relative on
   report numbers). */
OLAB_API olab_status olab_compare_runs(const char* dir_a, const char* dir_b, double field_abs,
                                       double report_rel, olab_compare** out);
OLAB_API void olab_compare_free(olab_compare* cmp);
OLAB_API int olab_compare_pass(const olab_compare* cmp);
OLAB_API double olab_compare_max_field_diff(const olab_compare* cmp);
OLAB_API size_t olab_compare_differing_count(const olab_compare* cmp);
OLAB_API const char* olab_compare_json(const olab_compare* cmp);

/* ---- grids and fields ---- */

typedef struct olab_grid olab_grid;
typedef struct olab_field olab_field;

OLAB_API olab_status olab_grid_create(int dim, const double* lo, const double* hi, const int* counts,
                                      olab_grid** out);
OLAB_API void olab_grid_free(olab_grid* grid);
OLAB_API int olab_grid_dim(const olab_grid* grid);
OLAB_API size_t olab_grid_size(const olab_grid* grid);
OLAB_API double olab_grid_h(const olab_grid* grid, int axis);

/* Copies n == olab_grid_size(grid) values, row-major with the last axis
   fastest. */
OLAB_API olab_status olab_field_create(const olab_grid* grid, const double* values, size_t n,
                                       olab_field** out);
OLAB_API olab_status olab_field_load(const char* stem, olab_field** out);
OLAB_API olab_status olab_field_save(const olab_field* field, const char* stem);
OLAB_API void olab_field_free(olab_field* field);
OLAB_API size_t olab_field_size(const olab_field* field);
/* Borrowed pointer, valid while the field lives. */
OLAB_API const double* olab_field_values(const olab_field* field);
OLAB_API olab_status olab_field_interpolate(const olab_field* field, const double* x, double* out);

/* ---- operators ---- */

typedef struct olab_operator olab_operator;

/* kind: "laplacian", "pucci_plus" or "pucci_minus"; lambdas are ignored for
   the Laplacian. */
OLAB_API olab_status olab_operator_create(const char* kind, int dim, double lambda0, double lambda1,
                                          olab_operator** out);
/* Constant coefficients, dim x dim row-major and symmetric. */
OLAB_API olab_status olab_operator_create_linear(int dim, const double* A, olab_operator** out);
OLAB_API void olab_operator_free(olab_operator* op);
/* F(H, x) with H dim x dim row-major (upper triangle read). */
OLAB_API olab_status olab_operator_eval(const olab_operator* op, const double* H, const double* x,
                                        double* out);

/* ---- problems and solves ---- */

typedef struct olab_problem olab_problem;

/* g is a full nodal field whose boundary values are used; f may be NULL.
   reduced != 0 declares the reduced form (phi1 == 0). */
OLAB_API olab_status olab_problem_create(const olab_operator* op, const olab_field* phi1,
                                         const olab_field* phi2, const olab_field* g,
                                         const olab_field* f, int reduced, olab_problem** out);
OLAB_API void olab_problem_free(olab_problem* problem);
/* Subtracts phi1; the result is in reduced form. */
OLAB_API olab_status olab_problem_reduce(const olab_problem* problem, olab_problem** out);
OLAB_API double olab_problem_penalty_bound(const olab_problem* problem);

/* schedule may be NULL (n ignored) for the default; init_upper != 0 starts
   from phi2. */
OLAB_API olab_status olab_solve_penalty(const olab_problem* problem, const double* schedule, size_t n,
                                        int init_upper, olab_field** out);
OLAB_API olab_status olab_solve_pdas(const olab_problem* problem, olab_field** out);

#ifdef __cplusplus
}
#endif

#endif
