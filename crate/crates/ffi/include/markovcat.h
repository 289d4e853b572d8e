#ifndef MARKOVCAT_H
#define MARKOVCAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the nonzero values match the command-line exit codes where they overlap.
 */
typedef enum McStatus {
  MC_STATUS_OK = 0,
  /**
   * A null pointer or a string that is not UTF-8.
   */
  MC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Parse, validation or domain error in the inputs.
   */
  MC_STATUS_INVALID_INPUT = 2,
  MC_STATUS_RESOURCE_CAP = 3,
  /**
   * A verification suite ran and failed; the report is still returned.
   */
  MC_STATUS_SUITE_FAILED = 4,
  MC_STATUS_UNSUPPORTED = 5,
  MC_STATUS_PANIC = 6,
} McStatus;

typedef enum McMethod {
  MC_METHOD_FORWARD_BACKWARD = 0,
  MC_METHOD_FIXED_INTERVAL = 1,
} McMethod;

typedef enum McSuite {
  MC_SUITE_LAWS = 0,
  MC_SUITE_MARKOV = 1,
  MC_SUITE_FILTER_ORACLE = 2,
  MC_SUITE_SMOOTHER_ORACLE = 3,
  MC_SUITE_FILTER_CHAIN = 4,
} McSuite;

/**
 * A validated model or joint fixture.
 */
typedef struct McModel McModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parse and validate a model (or joint fixture) from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 * The handle must be released with [`mc_model_free`].
 */
enum McStatus mc_model_from_json(const char *json, struct McModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`mc_model_from_json`] not yet freed.
 */
void mc_model_free(struct McModel *model);

/**
 * Horizon `n` of an hmm model (time points `0..=n`); 0 for joint fixtures or null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mc_model_horizon(const struct McModel *model);

/**
 * Category tag of the model (`"finstoch"`, `"finsetmulti"` or `"gauss"`),
 * a static string; null for joint fixtures or a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *mc_model_category(const struct McModel *model);

/**
 * Run the filter; writes the JSON report to `*out`.
 *
 * # Safety
 * `model` must be a live handle, `observations` a NUL-terminated string,
 * `out` a valid pointer.
 */
enum McStatus mc_filter(const struct McModel *model, const char *observations, char **out);

/**
 * Smooth a full observation sequence.
 *
 * # Safety
 * As [`mc_filter`].
 */
enum McStatus mc_smooth(const struct McModel *model,
                        const char *observations,
                        enum McMethod method,
                        char **out);

/**
 * Sample `steps` time points (0 for the whole horizon).
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum McStatus mc_simulate(const struct McModel *model, uint64_t seed, size_t steps, char **out);

/**
 * Run a verification suite on the model. `observations` may be null.
 * Returns [`McStatus::SuiteFailed`] with the report in `*out` when a check fails.
 *
 * # Safety
 * `model` must be a live handle, `observations` null or a NUL-terminated
 * string, `out` a valid pointer.
 */
enum McStatus mc_verify(const struct McModel *model,
                        enum McSuite suite,
                        const char *observations,
                        uint64_t seed,
                        size_t cases,
                        char **out);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *mc_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void mc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOVCAT_H */
