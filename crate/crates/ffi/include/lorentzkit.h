#ifndef LORENTZKIT_H
#define LORENTZKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible function.
 */
typedef enum LkStatus {
  LK_STATUS_OK = 0,
  LK_STATUS_NULL_POINTER = 1,
  LK_STATUS_INVALID_ARGUMENT = 2,
  /*
   An index or exponent outside the domain of the quantity.
   */
  LK_STATUS_DOMAIN = 3,
  LK_STATUS_INADMISSIBLE = 4,
  LK_STATUS_UNKNOWN_CASE = 5,
  /*
   A verification ran but its verdict was not the expected one.
   */
  LK_STATUS_FAILED = 6,
  LK_STATUS_BUFFER_TOO_SMALL = 7,
  LK_STATUS_PANIC = 8,
} LkStatus;

/*
 Opaque sampled field.
 */
typedef struct LkField LkField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *lk_last_error(void);

/*
 Creates a field from `components × points^dim` samples, component-major.

 # Safety
 `values` must point to `len` readable doubles; `out` must be writable.
 */
enum LkStatus lk_field_create(size_t dim,
                              size_t points,
                              double length,
                              size_t components,
                              const double *values,
                              size_t len,
                              struct LkField **out);

/*
 Samples an analytic profile given as JSON, e.g.
 `{"family":"gaussian","params":{"width":2}}`.

 # Safety
 `profile_json` must be a NUL-terminated string; `out` must be writable.
 */
enum LkStatus lk_field_from_profile(const char *profile_json,
                                    size_t dim,
                                    size_t points,
                                    double length,
                                    struct LkField **out);

/*
 Releases a field. Null is ignored.

 # Safety
 `field` must come from this library and not be used afterwards.
 */
void lk_field_free(struct LkField *field);

/*
 Number of stored values (`components × points^dim`).

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_field_len(const struct LkField *field, size_t *out);

/*
 Copies the samples into `buf`, which must hold `lk_field_len` doubles.

 # Safety
 `buf` must be writable for `len` doubles.
 */
enum LkStatus lk_field_values(const struct LkField *field, double *buf, size_t len);

/*
 `‖f‖_{L^{p,q}}`; `star != 0` selects the `f**` variant. Pass
 `INFINITY` for `q = ∞`.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_lorentz_norm(const struct LkField *field,
                              double p,
                              double q,
                              int star,
                              double *out);

/*
 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_lp_norm(const struct LkField *field, double p, double *out);

/*
 Homogeneous Besov-Lorentz norm `‖u‖_{Ḃ^s_{p,q,r}}`.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_besov_norm(const struct LkField *field,
                            double s,
                            double p,
                            double q,
                            double r,
                            double *out);

/*
 Homogeneous Triebel-Lizorkin-Lorentz norm `‖u‖_{Ḟ^s_{p,q,r}}`.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_triebel_norm(const struct LkField *field,
                              double s,
                              double p,
                              double q,
                              double r,
                              double *out);

/*
 `Λ^s f` as a new handle.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_fractional_laplacian(const struct LkField *field, double s, struct LkField **out);

/*
 Leray projection of a three-component field on a 3D grid.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_leray_project(const struct LkField *field, struct LkField **out);

/*
 Energy flux `Π_Q` of a divergence-free field.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_flux(const struct LkField *field, int q, double *out);

/*
 Dyadic bound on `|Π_Q|` from nonhomogeneous block `L³` norms.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum LkStatus lk_dyadic_flux_bound(const struct LkField *field, int q, double *out);

/*
 Runs a registered verification case and returns its JSON-lines report
 body in `*out_json`, to be released with `lk_string_free`. The report is
 produced also when the status is `Failed` or `Inadmissible`.

 # Safety
 `case_id` must be a NUL-terminated string; `out_json` must be writable.
 */
enum LkStatus lk_verify_json(const char *case_id, uint64_t seed, char **out_json);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void lk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LORENTZKIT_H */
