#ifndef VSSLAB_H
#define VSSLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum VssStatus {
  VSS_STATUS_OK = 0,
  VSS_STATUS_NULL_POINTER = 1,
  // Exponents outside the admissible range.
  VSS_STATUS_RANGE = 2,
  // Argument outside a function's domain.
  VSS_STATUS_DOMAIN = 3,
  // Shooting, integration or tail fit failed.
  VSS_STATUS_NUMERICAL = 4,
  // A panic was caught at the boundary.
  VSS_STATUS_INTERNAL = 5,
} VssStatus;

// Opaque handle to a constructed profile.
typedef struct VssProfile VssProfile;

// Derived exponents of an admissible `(p, q, N)`.
typedef struct VssExponents {
  double p;
  double q;
  uint32_t n;
  double p_c;
  double q_star;
  double alpha;
  double beta;
  double eta;
  double gamma;
  double tail_barrier_exp;
  double tail_profile_exp;
} VssExponents;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null if none.
//
// The pointer stays valid until the next failing call on the same thread.
const char *vss_last_error(void);

// Fills `out` with the exponents of `(p, q, n)`.
//
// # Safety
// `out` must be null or point to writable memory for one `VssExponents`.
enum VssStatus vss_exponents(double p, double q, uint32_t n, struct VssExponents *out);

// Barrier value `γ r^{−α/β}`.
//
// # Safety
// `out` must be null or point to a writable `double`.
enum VssStatus vss_friendly_giant(double p, double q, uint32_t n, double r, double *out);

// Shooting threshold to absolute tolerance `tol`.
//
// # Safety
// `out` must be null or point to a writable `double`.
enum VssStatus vss_find_a_star(double p, double q, uint32_t n, double tol, double *out);

// Builds the profile; on success `*out` owns a handle to release with [`vss_profile_free`].
//
// # Safety
// `out` must be null or point to a writable handle pointer.
enum VssStatus vss_profile_build(double p,
                                 double q,
                                 uint32_t n,
                                 double tol,
                                 struct VssProfile **out);

// Releases a handle; null is ignored.
//
// # Safety
// `h` must be null or a handle from [`vss_profile_build`] not yet freed.
void vss_profile_free(struct VssProfile *h);

// Profile height `f_U(0)`.
//
// # Safety
// `h` must be a live handle or null; `out` a writable `double` or null.
enum VssStatus vss_profile_height(const struct VssProfile *h, double *out);

// Fitted tail amplitude and log–log tail slope.
//
// # Safety
// `h` must be a live handle or null; `omega` and `slope` writable `double`s or null.
enum VssStatus vss_profile_tail(const struct VssProfile *h, double *omega, double *slope);

// `f_U(rho)`, `rho ≥ 0`.
//
// # Safety
// `h` must be a live handle or null; `out` a writable `double` or null.
enum VssStatus vss_profile_eval(const struct VssProfile *h, double rho, double *out);

// `U(t, r) = t^{−α} f_U(r t^{−β})`.
//
// # Safety
// `h` must be a live handle or null; `out` a writable `double` or null.
enum VssStatus vss_profile_eval_u(const struct VssProfile *h, double t, double r, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VSSLAB_H */
