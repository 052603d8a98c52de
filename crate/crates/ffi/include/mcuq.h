#ifndef MCUQ_H
#define MCUQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum McuqStatus {
  MCUQ_STATUS_OK = 0,
  MCUQ_STATUS_NULL_POINTER = 1,
  MCUQ_STATUS_INVALID_UTF8 = 2,
  MCUQ_STATUS_INVALID_INPUT = 3,
  MCUQ_STATUS_INVALID_CHAIN = 4,
  MCUQ_STATUS_INVALID_MODEL = 5,
  MCUQ_STATUS_NUMERICAL = 6,
  MCUQ_STATUS_CONFIG = 7,
  MCUQ_STATUS_IO = 8,
  MCUQ_STATUS_JSON = 9,
  MCUQ_STATUS_BUFFER_TOO_SMALL = 10,
  MCUQ_STATUS_PANIC = 11,
} McuqStatus;

/**
 * Validated Markov chain.
 */
typedef struct McuqChain McuqChain;

/**
 * Markov reward process with linear features.
 */
typedef struct McuqMrp McuqMrp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mcuq_version(void);

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when there is no error.
 */
size_t mcuq_last_error(char *buf, size_t len);

/**
 * Release a string returned by this library.
 */
void mcuq_string_free(char *s);

/**
 * Build a chain from an `n × n` row-major kernel. A null `initial` starts at the
 * stationary law; otherwise `initial` holds `n` probabilities and the density
 * ratio is measured in the sup norm.
 */
enum McuqStatus mcuq_chain_new(const double *kernel,
                               size_t n,
                               const double *initial,
                               struct McuqChain **out);

/**
 * Build a chain from a JSON chain spec (`kernel`, optional `initial`,
 * `density_p`, `mixing`).
 */
enum McuqStatus mcuq_chain_from_json(const char *spec, struct McuqChain **out);

void mcuq_chain_free(struct McuqChain *chain);

enum McuqStatus mcuq_chain_n_states(const struct McuqChain *chain, size_t *out);

/**
 * Stationary distribution; `out` must hold `n_states` values.
 */
enum McuqStatus mcuq_chain_stationary(const struct McuqChain *chain, double *out, size_t len);

enum McuqStatus mcuq_chain_spectral_expansion(const struct McuqChain *chain, double *out);

/**
 * Mixing constants `(m, ρ)` with `sup_s d_TV(P^t(s, ·), μ) ≤ m ρ^t`.
 */
enum McuqStatus mcuq_chain_mixing(const struct McuqChain *chain, double *m, double *rho);

enum McuqStatus mcuq_chain_mixing_time(const struct McuqChain *chain, double eps, size_t *out);

/**
 * Build an MRP on a copy of `chain` with `n × d` row-major features and `n`
 * rewards in `[0, 1]`.
 */
enum McuqStatus mcuq_mrp_new(const struct McuqChain *chain,
                             const double *features,
                             size_t dim,
                             const double *rewards,
                             double gamma,
                             struct McuqMrp **out);

/**
 * Build an MRP from a JSON model spec (`chain`, `features`, `rewards`, `gamma`).
 */
enum McuqStatus mcuq_mrp_from_json(const char *spec, struct McuqMrp **out);

void mcuq_mrp_free(struct McuqMrp *mrp);

enum McuqStatus mcuq_mrp_dim(const struct McuqMrp *mrp, size_t *out);

/**
 * TD fixed point; `out` must hold `dim` values.
 */
enum McuqStatus mcuq_mrp_theta_star(const struct McuqMrp *mrp, double *out, size_t len);

enum McuqStatus mcuq_mrp_default_eta0(const struct McuqMrp *mrp, double *out);

/**
 * Noise covariance `Γ̃` and limiting covariance `Λ̃* = A⁻¹ Γ̃ A⁻ᵀ`, each
 * `dim × dim` row-major. Either output may be null.
 */
enum McuqStatus mcuq_mrp_covariance(const struct McuqMrp *mrp,
                                    double *gamma_out,
                                    double *lambda_out,
                                    size_t len);

/**
 * Finite-horizon covariance `Λ̃_T` of `√T (θ̄_T − θ*)` for stepsizes
 * `η_t = eta0 t^{−alpha}`; `out` is `dim × dim` row-major.
 */
enum McuqStatus mcuq_mrp_lambda_t(const struct McuqMrp *mrp,
                                  double eta0,
                                  double alpha,
                                  uint64_t horizon,
                                  double *out,
                                  size_t len);

/**
 * One averaged TD run of length `horizon` from `θ_0 = 0`. Writes `θ̄_T`
 * (`dim` values) and `‖θ̄_T − θ*‖`. Runs are reproducible in `(seed, stream_id)`.
 */
enum McuqStatus mcuq_td_run(const struct McuqMrp *mrp,
                            double eta0,
                            double alpha,
                            uint64_t horizon,
                            uint64_t seed,
                            uint64_t stream_id,
                            double *theta_bar,
                            size_t len,
                            double *error);

/**
 * Run an experiment described by a JSON config, writing its files under the
 * config's output directory. On success `*report` receives the JSON report
 * (free with [`mcuq_string_free`]) and `*strict_violation` is set when a bound
 * with explicit constants was violated. Either output may be null.
 */
enum McuqStatus mcuq_run_experiment(const char *config, char **report, bool *strict_violation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCUQ_H */
