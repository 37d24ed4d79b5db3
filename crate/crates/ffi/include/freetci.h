#ifndef FREETCI_H
#define FREETCI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FreetciStatus {
  FREETCI_STATUS_OK = 0,
  FREETCI_STATUS_NULL_POINTER = 1,
  FREETCI_STATUS_INVALID_INPUT = 2,
  FREETCI_STATUS_NUMERICAL = 3,
  FREETCI_STATUS_IO = 4,
  FREETCI_STATUS_PANIC = 5,
} FreetciStatus;

// Opaque grid-measure handle.
typedef struct FreetciMeasure FreetciMeasure;

// Opaque potential handle.
typedef struct FreetciPotential FreetciPotential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *freetci_last_error(void);

// Library version as a static string.
const char *freetci_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void freetci_string_free(char *s);

// Parses a potential such as `quadratic`, `line:0,0,1,0,0.25@2` or
// `circle:0|0.5|@0`.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` writable.
enum FreetciStatus freetci_potential_parse(const char *spec, struct FreetciPotential **out);

// Convexity modulus carried by the potential.
//
// # Safety
// `q` must be a live handle or null.
enum FreetciStatus freetci_potential_rho(const struct FreetciPotential *q, double *out);

// # Safety
// `q` must come from [`freetci_potential_parse`] and not have been freed.
void freetci_potential_free(struct FreetciPotential *q);

// Equilibrium measure of `q` on `cells` cells of `[-radius, radius]` (the
// radius is ignored for circle potentials).
//
// # Safety
// `q` must be a live handle and `out` writable.
enum FreetciStatus freetci_equilibrium(const struct FreetciPotential *q,
                                       double radius,
                                       size_t cells,
                                       struct FreetciMeasure **out);

// Builds a measure from `len` non-negative weights (normalised here) on
// the grid [`freetci_equilibrium`] uses for that carrier and cell count.
//
// # Safety
// `weights` must point to `len` doubles.
enum FreetciStatus freetci_measure_from_weights(bool circle,
                                                double radius,
                                                const double *weights,
                                                size_t len,
                                                struct FreetciMeasure **out);

// Number of cells.
//
// # Safety
// `mu` must be a live handle or null (which yields 0).
size_t freetci_measure_len(const struct FreetciMeasure *mu);

// Copies nodes and weights into caller buffers of `len` doubles each;
// either buffer may be null.
//
// # Safety
// Non-null buffers must hold `len` doubles.
enum FreetciStatus freetci_measure_copy(const struct FreetciMeasure *mu,
                                        double *nodes,
                                        double *weights,
                                        size_t len);

// Logarithmic energy `Sigma(mu)`.
//
// # Safety
// `mu` must be a live handle and `out` writable.
enum FreetciStatus freetci_measure_log_energy(const struct FreetciMeasure *mu, double *out);

// # Safety
// `mu` must come from this library and not have been freed.
void freetci_measure_free(struct FreetciMeasure *mu);

// Free transportation-cost check of `mu` against the equilibrium measure
// of `q`; writes the report as JSON. A negative `rho` on the line (or
// `rho <= -1/2` on the circle) is rejected.
//
// # Safety
// Handles must be live and `out` writable.
enum FreetciStatus freetci_tci_check(const struct FreetciMeasure *mu,
                                     const struct FreetciPotential *q,
                                     double rho,
                                     char **out);

// Runs a named test family (`shifted-semicircle`, `scaled-semicircle`,
// `uniform`, `arcsine`, `line`, `trigonometric`) and writes the JSON
// array of reports.
//
// # Safety
// `family` must be a NUL-terminated string, `q` a live handle and `out`
// writable.
enum FreetciStatus freetci_tci_suite(const char *family,
                                     const struct FreetciPotential *q,
                                     double rho,
                                     char **out);

// Truncated pressure of the single-letter potential `h` at each of the
// `count` sizes in `dims`, with the large-N extrapolation, as JSON.
//
// # Safety
// `dims` must point to `count` sizes, `h` be a live handle and `out`
// writable.
enum FreetciStatus freetci_pressure(const struct FreetciPotential *h,
                                    const size_t *dims,
                                    size_t count,
                                    double radius,
                                    uint64_t seed,
                                    char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREETCI_H */
