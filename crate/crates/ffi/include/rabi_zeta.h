#ifndef RABI_ZETA_H
#define RABI_ZETA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Status code of every fallible call.
 */
typedef enum RzStatus {
  /*
   Success.
   */
  RZ_STATUS_OK = 0,
  /*
   An argument sits on a pole.
   */
  RZ_STATUS_POLE = 1,
  /*
   A parameter lies outside the domain of the operation.
   */
  RZ_STATUS_DOMAIN = 2,
  /*
   A parameter is at an excluded half-integer.
   */
  RZ_STATUS_HALF_INTEGER_POLE = 3,
  /*
   A series or iteration did not converge.
   */
  RZ_STATUS_NO_CONVERGENCE = 4,
  /*
   A truncation dimension is invalid.
   */
  RZ_STATUS_INVALID_DIMENSION = 5,
  /*
   A truncated operator is numerically singular.
   */
  RZ_STATUS_SINGULAR_OPERATOR = 6,
  /*
   A combinatorial expansion is too large.
   */
  RZ_STATUS_COMBINATORIAL_BLOWUP = 7,
  /*
   The eigenvalue solver failed.
   */
  RZ_STATUS_EIGEN_FAILURE = 8,
  /*
   λ is too close to the spectrum.
   */
  RZ_STATUS_NEAR_POLE = 9,
  /*
   A vector has the wrong length.
   */
  RZ_STATUS_LENGTH_MISMATCH = 10,
  /*
   A quadrature node hit a singularity.
   */
  RZ_STATUS_NODE_SINGULARITY = 11,
  /*
   The coupling series is outside its radius of convergence.
   */
  RZ_STATUS_RADIUS_EXCEEDED = 12,
  /*
   Two independent evaluation routes disagree.
   */
  RZ_STATUS_INCONSISTENT = 13,
  /*
   A required pointer argument was NULL.
   */
  RZ_STATUS_NULL_POINTER = 20,
  /*
   An enum or index argument is out of range.
   */
  RZ_STATUS_INVALID_ARGUMENT = 21,
  /*
   The library panicked; this is a bug.
   */
  RZ_STATUS_PANIC = 99,
} RzStatus;

/*
 Evaluation route of a zeta value.
 */
typedef enum RzMethod {
  /*
   Integral route for real λ inside its domain, operator route otherwise.
   */
  RZ_METHOD_DEFAULT = 0,
  /*
   Coupling series with integral coefficients.
   */
  RZ_METHOD_SERIES_INTEGRAL = 1,
  /*
   Coupling series with operator coefficients.
   */
  RZ_METHOD_SERIES_OPERATOR = 2,
  /*
   Eigenvalue sum of the truncated Hamiltonian.
   */
  RZ_METHOD_EIGEN_ORACLE = 3,
} RzMethod;

/*
 Trace-term family.
 */
typedef enum RzFamily {
  /*
   Fock-space family.
   */
  RZ_FAMILY_FLAT = 0,
  /*
   Single Bergman block of weight `nu`.
   */
  RZ_FAMILY_NU = 1,
  /*
   Sum of the ν = 1/2 and ν = 3/2 blocks.
   */
  RZ_FAMILY_PLUS = 2,
  /*
   Difference of the ν = 1/2 and ν = 3/2 blocks.
   */
  RZ_FAMILY_MINUS = 3,
} RzFamily;

/*
 Trace-term evaluation route.
 */
typedef enum RzTraceMethod {
  /*
   Truncated operators.
   */
  RZ_TRACE_METHOD_OPERATOR = 0,
  /*
   Tensor quadrature of the integral representation.
   */
  RZ_TRACE_METHOD_INTEGRAL = 1,
} RzTraceMethod;

/*
 Opaque table of classical Apéry numbers.
 */
typedef struct RzAperyTable RzAperyTable;

/*
 Opaque Hamiltonian handle.
 */
typedef struct RzModel RzModel;

/*
 Opaque zeta-value result handle.
 */
typedef struct RzZetaResult RzZetaResult;

/*
 Complex number passed by value.
 */
typedef struct RzComplex {
  /*
   Real part.
   */
  double re;
  /*
   Imaginary part.
   */
  double im;
} RzComplex;

/*
 A value with its error estimate.
 */
typedef struct RzValue {
  /*
   The value.
   */
  struct RzComplex value;
  /*
   Absolute error estimate.
   */
  double abs_error;
} RzValue;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failing call on this thread (empty if none). The
 pointer stays valid until the next failing call on the same thread.
 */
const char *rz_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *rz_version(void);

/*
 Releases a string returned by this library.
 */
void rz_string_free(char *s);

/*
 One-photon model with coupling g, splitting Δ and bias ε.
 */
enum RzStatus rz_model_one_photon(double g, double delta, double eps, struct RzModel **out);

/*
 Two-photon model with coupling g, splitting Δ and bias ε.
 */
enum RzStatus rz_model_two_photon(double g, double delta, double eps, struct RzModel **out);

/*
 Single weighted-Bergman block of weight ν > 0.
 */
enum RzStatus rz_model_bergman(double nu, double g, double delta, double eps, struct RzModel **out);

/*
 Non-commutative harmonic oscillator with α, β > 0, αβ > 1.
 */
enum RzStatus rz_model_ncho(double alpha, double beta, double eta, struct RzModel **out);

/*
 Releases a model handle.
 */
void rz_model_free(struct RzModel *model);

/*
 The Δ-radius 1/C of the model at λ.
 */
enum RzStatus rz_convergence_radius(const struct RzModel *model,
                                    struct RzComplex lambda,
                                    double *out);

/*
 ζ(H; n, λ). Zero `max_m`, non-positive `tol` and zero `trunc_n` select the
 library defaults.
 */
enum RzStatus rz_zeta_value(const struct RzModel *model,
                            uint32_t n,
                            struct RzComplex lambda,
                            enum RzMethod method,
                            size_t max_m,
                            double tol,
                            size_t trunc_n,
                            struct RzZetaResult **out);

/*
 Even-sector minus odd-sector zeta value (two-photon model and oscillator);
 arguments as in [`rz_zeta_value`].
 */
enum RzStatus rz_parity_difference(const struct RzModel *model,
                                   uint32_t n,
                                   struct RzComplex lambda,
                                   enum RzMethod method,
                                   size_t max_m,
                                   double tol,
                                   size_t trunc_n,
                                   struct RzZetaResult **out);

/*
 Value and error estimate of a zeta result.
 */
enum RzStatus rz_zeta_result_value(const struct RzZetaResult *res, struct RzValue *out);

/*
 The coupling-free Hurwitz-zeta part of a zeta result.
 */
enum RzStatus rz_zeta_result_base_term(const struct RzZetaResult *res, struct RzComplex *out);

/*
 Number of per-m terms (0 for a NULL handle).
 */
size_t rz_zeta_result_num_terms(const struct RzZetaResult *res);

/*
 The per-m term with zero-based index `i` (m = i + 1).
 */
enum RzStatus rz_zeta_result_term(const struct RzZetaResult *res, size_t i, struct RzComplex *out);

/*
 Releases a zeta result handle.
 */
void rz_zeta_result_free(struct RzZetaResult *res);

/*
 ∂ⁿR_m of a family by the operator route (`trunc_n`, 0 for the default) or
 the integral route (`level` of the tanh–sinh rule, 0 for the default rule).
 */
enum RzStatus rz_trace_term(enum RzFamily family,
                            double nu,
                            struct RzComplex lambda,
                            double g,
                            struct RzComplex eps,
                            size_t m,
                            size_t deriv,
                            enum RzTraceMethod method,
                            size_t trunc_n,
                            uint32_t level,
                            struct RzValue *out);

/*
 Classical Apéry numbers Aₙ, Bₙ for n ≤ `n_max`, exactly.
 */
enum RzStatus rz_apery_classic(size_t n_max, struct RzAperyTable **out);

/*
 Number of entries (n_max + 1) of an Apéry table (0 for NULL).
 */
size_t rz_apery_table_len(const struct RzAperyTable *table);

/*
 Aₙ (`which` = 0) or Bₙ (`which` = 1) as a decimal `p` or `p/q` string;
 release it with [`rz_string_free`].
 */
enum RzStatus rz_apery_table_entry(const struct RzAperyTable *table,
                                   uint32_t which,
                                   size_t n,
                                   char **out);

/*
 Releases an Apéry table.
 */
void rz_apery_table_free(struct RzAperyTable *table);

/*
 |(−1)ⁿJ♭ₙ(n+1, 0) − (Aₙζ(2) − Bₙ)|.
 */
enum RzStatus rz_beukers_residual(uint32_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RABI_ZETA_H */
