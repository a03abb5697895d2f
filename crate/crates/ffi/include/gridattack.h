#ifndef GRIDATTACK_H
#define GRIDATTACK_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum GaStatus {
  GA_STATUS_OK = 0,
  GA_STATUS_NULL_POINTER = 1,
  GA_STATUS_INVALID_ARGUMENT = 2,
  GA_STATUS_SHAPE_MISMATCH = 3,
  // The call was not valid in the object's current state.
  GA_STATUS_CONTRACT = 4,
  // The grid collapsed or an integration step failed.
  GA_STATUS_SIMULATION = 5,
  GA_STATUS_IO = 6,
  GA_STATUS_PARSE = 7,
  GA_STATUS_MODEL = 8,
  GA_STATUS_BUFFER_TOO_SMALL = 9,
  GA_STATUS_PANIC = 10,
} GaStatus;

// Opaque attack environment.
typedef struct GaEnv GaEnv;

// Opaque trained policy.
typedef struct GaPolicy GaPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of this thread into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ga_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ga_version(void);

// Create an environment for a bundled scenario such as `"gov-G1-narrow"`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum GaStatus ga_env_new(const char *name, struct GaEnv **out);

// Create an environment from scenario TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum GaStatus ga_env_from_toml(const char *toml, struct GaEnv **out);

// # Safety
// `env` must be null or a handle from `ga_env_new`/`ga_env_from_toml` not
// already freed.
void ga_env_free(struct GaEnv *env);

// Observation length; 0 for a null handle.
//
// # Safety
// `env` must be null or a live handle.
size_t ga_env_observation_dim(const struct GaEnv *env);

// Action length; 0 for a null handle.
//
// # Safety
// `env` must be null or a live handle.
size_t ga_env_action_dim(const struct GaEnv *env);

// Start an episode and write the first observation.
//
// # Safety
// `env` must be a live handle and `obs` point to `obs_len` writable doubles.
enum GaStatus ga_env_reset(struct GaEnv *env, uint64_t seed, double *obs, size_t obs_len);

// Advance one action window. `action` is in normalized units `[-1, 1]`.
//
// # Safety
// `env` must be a live handle, `action` point to `action_len` doubles,
// `obs` to `obs_len` writable doubles, and `reward` and `done` to writable
// values.
enum GaStatus ga_env_step(struct GaEnv *env,
                          const double *action,
                          size_t action_len,
                          double *obs,
                          size_t obs_len,
                          double *reward,
                          bool *done);

// Load a checkpoint written by `gridattack train`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum GaStatus ga_policy_load(const char *path, struct GaPolicy **out);

// # Safety
// `policy` must be null or a handle from `ga_policy_load` not already freed.
void ga_policy_free(struct GaPolicy *policy);

// Check that `policy` fits the observation and action sizes of `env`.
//
// # Safety
// Both handles must be live.
enum GaStatus ga_policy_check(const struct GaPolicy *policy, const struct GaEnv *env);

// Deterministic (mean) action for an observation.
//
// # Safety
// `policy` must be a live handle, `obs` point to `obs_len` doubles and
// `action` to `action_len` writable doubles.
enum GaStatus ga_policy_act(const struct GaPolicy *policy,
                            const double *obs,
                            size_t obs_len,
                            double *action,
                            size_t action_len);

// Dominant oscillatory eigenvalue of the bundled grid at equilibrium.
//
// # Safety
// `re` and `im` must be writable.
enum GaStatus ga_dominant_mode(double *re, double *im);

// Angular frequency, rad/s, of the largest spectral peak of a uniformly
// sampled signal. Writes 0 for a constant signal.
//
// # Safety
// `signal` must point to `len` doubles and `omega` be writable.
enum GaStatus ga_fft_peak(const double *signal, size_t len, double sample_time, double *omega);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDATTACK_H */
