#ifndef SARDLAB_H
#define SARDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SardlabStatus {
  SARDLAB_STATUS_OK = 0,
  SARDLAB_STATUS_NULL_POINTER = 1,
  SARDLAB_STATUS_INVALID_ARGUMENT = 2,
  SARDLAB_STATUS_PARSE = 3,
  // Non-convergence, exhausted searches, infeasible budgets.
  SARDLAB_STATUS_NUMERICAL = 4,
  SARDLAB_STATUS_IO = 5,
  SARDLAB_STATUS_BUFFER_TOO_SMALL = 6,
  // A Rust panic was caught at the boundary.
  SARDLAB_STATUS_PANIC = 7,
} SardlabStatus;

// Surjectivity certificate of a group's Endpoint map.
typedef struct SardlabCertificate SardlabCertificate;

// Symbolic Endpoint map restricted to a finite control subspace.
typedef struct SardlabEndpointMap SardlabEndpointMap;

// Carnot group handle.
typedef struct SardlabGroup SardlabGroup;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *sardlab_version(void);

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *sardlab_last_error_message(void);

void sardlab_clear_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void sardlab_string_free(char *s);

// Builds `heisenberg`, `engel` or `free(k,s)`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum SardlabStatus sardlab_group_builtin(const char *name, struct SardlabGroup **out);

// Builds a group from its JSON description (rank, strata dimensions and
// brackets of basis vectors, 1-based).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum SardlabStatus sardlab_group_from_json(const char *json, struct SardlabGroup **out);

// # Safety
// `g` must come from a group constructor and not have been freed.
void sardlab_group_free(struct SardlabGroup *g);

// Topological dimension; 0 for NULL.
//
// # Safety
// `g` must be NULL or a live group handle.
size_t sardlab_group_dim(const struct SardlabGroup *g);

// Dimension of the first stratum; 0 for NULL.
//
// # Safety
// `g` must be NULL or a live group handle.
size_t sardlab_group_rank(const struct SardlabGroup *g);

// Nilpotency step; 0 for NULL.
//
// # Safety
// `g` must be NULL or a live group handle.
size_t sardlab_group_step(const struct SardlabGroup *g);

// Writes the `dim` coordinate weights.
//
// # Safety
// `g` must be a live group handle and `out` hold `cap` values.
enum SardlabStatus sardlab_group_weights(const struct SardlabGroup *g, uint32_t *out, size_t cap);

// Dilation `δ_λ(x)`; `x` and `out` hold `dim` values.
//
// # Safety
// `g` must be a live group handle, `x` hold `len` values and `out` `cap`.
enum SardlabStatus sardlab_group_dilate(const struct SardlabGroup *g,
                                        double lambda,
                                        const double *x,
                                        size_t len,
                                        double *out,
                                        size_t cap);

// Group product `x · y` in exponential coordinates.
//
// # Safety
// `g` must be a live group handle, `x` and `y` hold `len` values and `out` `cap`.
enum SardlabStatus sardlab_group_product(const struct SardlabGroup *g,
                                         const double *x,
                                         const double *y,
                                         size_t len,
                                         double *out,
                                         size_t cap);

// Builds the Endpoint map of `g` on a control subspace named like the CLI's
// `--basis`: `poly_degree(d)`, `piecewise_const(l)`, `piecewise_poly(l,d)`
// or `piecewise_legendre(l,d)`.
//
// # Safety
// `g` must be a live group handle, `basis` NUL-terminated and `out` valid.
enum SardlabStatus sardlab_endpoint_build(const struct SardlabGroup *g,
                                          const char *basis,
                                          struct SardlabEndpointMap **out);

// # Safety
// `f` must come from [`sardlab_endpoint_build`] and not have been freed.
void sardlab_endpoint_free(struct SardlabEndpointMap *f);

// Number of subspace coordinates; 0 for NULL.
//
// # Safety
// `f` must be NULL or a live map handle.
size_t sardlab_endpoint_nvars(const struct SardlabEndpointMap *f);

// Number of components (the group dimension); 0 for NULL.
//
// # Safety
// `f` must be NULL or a live map handle.
size_t sardlab_endpoint_ncomps(const struct SardlabEndpointMap *f);

// Total degree of each component.
//
// # Safety
// `f` must be a live map handle and `out` hold `cap` values.
enum SardlabStatus sardlab_endpoint_degrees(const struct SardlabEndpointMap *f,
                                            uint32_t *out,
                                            size_t cap);

// Endpoint of the control with subspace coordinates `s`.
//
// # Safety
// `f` must be a live map handle, `s` hold `len` values and `out` `cap`.
enum SardlabStatus sardlab_endpoint_eval(const struct SardlabEndpointMap *f,
                                         const double *s,
                                         size_t len,
                                         double *out,
                                         size_t cap);

// Jacobian at `s`, row-major `ncomps × nvars`.
//
// # Safety
// `f` must be a live map handle, `s` hold `len` values and `out` `cap`.
enum SardlabStatus sardlab_endpoint_jacobian(const struct SardlabEndpointMap *f,
                                             const double *s,
                                             size_t len,
                                             double *out,
                                             size_t cap);

// Endpoint of the same control by RK4 integration of the horizontal system.
//
// # Safety
// `f` must be a live map handle, `s` hold `len` values and `out` `cap`.
enum SardlabStatus sardlab_endpoint_integrate(const struct SardlabEndpointMap *f,
                                              const double *s,
                                              size_t len,
                                              size_t steps,
                                              double *out,
                                              size_t cap);

// Builds a surjectivity certificate with the group's default options.
//
// # Safety
// `g` must be a live group handle and `out` valid.
enum SardlabStatus sardlab_certificate_build(const struct SardlabGroup *g,
                                             size_t degree_budget,
                                             uint64_t seed,
                                             struct SardlabCertificate **out);

// # Safety
// `c` must come from [`sardlab_certificate_build`] and not have been freed.
void sardlab_certificate_free(struct SardlabCertificate *c);

// Certified singular-value bound σ, control degree and covered ball radius.
//
// # Safety
// `c` must be a live certificate; each out pointer may be NULL to skip it.
enum SardlabStatus sardlab_certificate_info(const struct SardlabCertificate *c,
                                            double *sigma,
                                            size_t *degree,
                                            double *covered_ball);

// Certificate as JSON; release with [`sardlab_string_free`].
//
// # Safety
// `c` must be a live certificate and `out` valid.
enum SardlabStatus sardlab_certificate_to_json(const struct SardlabCertificate *c, char **out);

// Solves `End(u) = target`. On success writes the dilation factor λ, the
// residual and, when `coords` is not NULL, the `dim` span coordinates of
// the control `λ (q₀ + Σ s_i p_i)`.
//
// # Safety
// `c` must be a live certificate, `target` hold `len` values, `coords`
// be NULL or hold `cap` values.
enum SardlabStatus sardlab_certificate_reach(const struct SardlabCertificate *c,
                                             const double *target,
                                             size_t len,
                                             double *lambda,
                                             double *residual,
                                             double *coords,
                                             size_t cap);

// Singular values of a row-major `rows × cols` matrix, non-increasing,
// padded with zeros to `rows` entries.
//
// # Safety
// `data` must hold `rows * cols` values and `out` `cap`.
enum SardlabStatus sardlab_singular_values(const double *data,
                                           size_t rows,
                                           size_t cols,
                                           double *out,
                                           size_t cap);

// Entropy dimension of `count` points of `ℝ^dim` (row-major) over a
// geometric ε ladder; writes the fitted dimension and its half-width.
//
// # Safety
// `points` must hold `count * dim` values, `eps` `neps` values, and the
// out pointers be valid.
enum SardlabStatus sardlab_entropy_dimension(const double *points,
                                             size_t count,
                                             size_t dim,
                                             const double *eps,
                                             size_t neps,
                                             double *dimension,
                                             double *half_width);

// Runs a named experiment (as the CLI subcommand of the same name) with a
// JSON configuration, writing artifacts to its output directory. The
// process-style exit code (0 all checks passed, 2 a check failed) goes to
// `exit_code`.
//
// # Safety
// `name` and `config_json` must be NUL-terminated (the latter may be NULL
// for defaults) and `exit_code` valid.
enum SardlabStatus sardlab_run_experiment(const char *name,
                                          const char *config_json,
                                          int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SARDLAB_H */
