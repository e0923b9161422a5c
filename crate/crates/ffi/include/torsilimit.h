#ifndef TORSILIMIT_H
#define TORSILIMIT_H

#include <stddef.h>
#include <stdint.h>

typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  TL_STATUS_INVALID_ARGUMENT = 2,
  TL_STATUS_IO = 3,
  TL_STATUS_PARSE = 4,
  TL_STATUS_NUMERICAL = 5,
  TL_STATUS_INFEASIBLE = 6,
  TL_STATUS_PANIC = 7,
} TlStatus;

typedef struct TlCase TlCase;

typedef struct TlIfMatrix TlIfMatrix;

typedef struct TlLimitProfile TlLimitProfile;

typedef struct TlMaterial TlMaterial;

typedef struct TlShaft TlShaft;

typedef struct TlLimitOptions {
  double cap_fraction;
  double delta_f_max_hz;
  double grid_step_hz;
  double grid_refine_hz;
} TlLimitOptions;

/**
 * Single-machine infinite-bus operating point, p.u. on the machine base.
 */
typedef struct TlOperatingPoint {
  double e;
  double v;
  double x;
  /**
   * Electrical power.
   */
  double p;
} TlOperatingPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tl_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tl_last_error_message(void);

struct TlLimitOptions tl_limit_options_default(void);

enum TlStatus tl_shaft_load(const char *path, struct TlShaft **out);

enum TlStatus tl_shaft_from_json(const char *json, struct TlShaft **out);

void tl_shaft_free(struct TlShaft *shaft);

size_t tl_shaft_mass_count(const struct TlShaft *shaft);

/**
 * Free-free torsional mode frequencies in rad/s, ascending. Writes at most
 * `capacity` values; `*len` receives the number of modes.
 */
enum TlStatus tl_shaft_torsional_modes(const struct TlShaft *shaft,
                                       double *out,
                                       size_t capacity,
                                       size_t *len);

enum TlStatus tl_material_load(const char *path, struct TlMaterial **out);

enum TlStatus tl_material_from_json(const char *json, struct TlMaterial **out);

void tl_material_free(struct TlMaterial *material);

enum TlStatus tl_case_load(const char *path, struct TlCase **out);

enum TlStatus tl_case_from_json(const char *json, struct TlCase **out);

void tl_case_free(struct TlCase *case_);

/**
 * Limit profile of a machine at an infinite-bus operating point. `options`
 * may be NULL for defaults.
 */
enum TlStatus tl_limit_profile_compute(const struct TlShaft *shaft,
                                       const struct TlMaterial *material,
                                       const struct TlOperatingPoint *op,
                                       const struct TlLimitOptions *options,
                                       struct TlLimitProfile **out);

void tl_limit_profile_free(struct TlLimitProfile *profile);

/**
 * Multi-frequency bound P_e^max, MW.
 */
enum TlStatus tl_limit_profile_p_e_max(const struct TlLimitProfile *profile, double *out);

size_t tl_limit_profile_len(const struct TlLimitProfile *profile);

/**
 * Copies up to `capacity` grid points: frequency (Hz) and the combined
 * limit curve (MW). Either output may be NULL.
 */
enum TlStatus tl_limit_profile_curve(const struct TlLimitProfile *profile,
                                     double *freqs_hz,
                                     double *p_max_mw,
                                     size_t capacity);

/**
 * Interaction factors of every synchronous generator for the given load
 * buses. A nonpositive `perturbation_mw` selects the default.
 */
enum TlStatus tl_if_matrix_compute(const struct TlCase *case_,
                                   const uint32_t *buses,
                                   size_t n_buses,
                                   double perturbation_mw,
                                   struct TlIfMatrix **out);

void tl_if_matrix_free(struct TlIfMatrix *m);

size_t tl_if_matrix_generator_count(const struct TlIfMatrix *m);

size_t tl_if_matrix_site_count(const struct TlIfMatrix *m);

/**
 * IF between generator `gen` and site `site`; NaN for a column whose load
 * flow failed.
 */
enum TlStatus tl_if_matrix_get(const struct TlIfMatrix *m, size_t gen, size_t site, double *out);

/**
 * 1 if the column of `site` was computed, 0 otherwise (or out of range).
 */
int tl_if_matrix_column_valid(const struct TlIfMatrix *m, size_t site);

/**
 * Copies the id of generator `gen` into `buf` (NUL-terminated, truncated to
 * `capacity`). `*needed` receives the full length including the NUL.
 */
enum TlStatus tl_if_matrix_generator_id(const struct TlIfMatrix *m,
                                        size_t gen,
                                        char *buf,
                                        size_t capacity,
                                        size_t *needed);

/**
 * Per-site bound `min(min_i P_e_max[i]/w[i][j], 0.25·rating[j])`, in input
 * order (not ranked). `weights` is row-major `n_generators × n_sites`.
 */
enum TlStatus tl_site_bounds(const double *p_e_max,
                             size_t n_generators,
                             const double *weights,
                             const double *ratings_mw,
                             size_t n_sites,
                             double *out_bounds);

/**
 * Iterative allocation LP. Returns `TL_STATUS_INFEASIBLE` if no `α ≥ 0`
 * gives a feasible program. Any of `out_alpha`, `out_iterations` may be
 * NULL.
 */
enum TlStatus tl_optimize_allocations(const double *p_e_max,
                                      size_t n_generators,
                                      const double *weights,
                                      const double *bounds_mw,
                                      size_t n_sites,
                                      double beta,
                                      double *out_allocations,
                                      double *out_alpha,
                                      size_t *out_iterations);

/**
 * FFT compliance of a 10 s window. `*out_pass` is 1 on pass, 0 on fail.
 */
enum TlStatus tl_compliance_check(const double *series_mw,
                                  size_t n,
                                  double sample_rate_hz,
                                  double f_sync_hz,
                                  double limit_mw,
                                  double *out_amplitude_sum,
                                  int *out_pass);

/**
 * Rainflow cycles of a series. Writes at most `capacity` cycles; `*len`
 * receives the total number. Counts are 1 for full and 0.5 for half cycles.
 */
enum TlStatus tl_rainflow(const double *series,
                          size_t n,
                          double *ranges,
                          double *means,
                          double *counts,
                          size_t capacity,
                          size_t *len);

/**
 * Miner damage of a stress series against a material.
 */
enum TlStatus tl_miner_damage(const double *series,
                              size_t n,
                              const struct TlMaterial *material,
                              double *out_damage);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TORSILIMIT_H */
