#ifndef RGM_H
#define RGM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RgmStatus {
  RGM_STATUS_OK = 0,
  RGM_STATUS_NULL_POINTER = 1,
  RGM_STATUS_INVALID_ARGUMENT = 2,
  RGM_STATUS_PARSE_ERROR = 3,
  RGM_STATUS_IO_ERROR = 4,
  RGM_STATUS_RUNTIME_ERROR = 5,
  RGM_STATUS_PANIC = 6,
} RgmStatus;

typedef struct RgmConfig RgmConfig;

typedef struct RgmDataset RgmDataset;

typedef struct RgmTrace RgmTrace;

/**
 * Message for the last failed call on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *rgm_last_error_message(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RgmStatus rgm_config_default(struct RgmConfig **out);

/**
 * Set one configuration key from its text form, as in a configuration file.
 *
 * # Safety
 * `config` must come from [`rgm_config_default`]; `key` and `value` must be
 * null-terminated strings.
 */
enum RgmStatus rgm_config_set(struct RgmConfig *config, const char *key, const char *value);

/**
 * # Safety
 * `config` must be null or a handle not yet freed.
 */
void rgm_config_free(struct RgmConfig *config);

/**
 * Dataset of `n` observations in dimension `p`, copied from row-major `obs`.
 *
 * # Safety
 * `obs` must point to `n * p` readable doubles.
 */
enum RgmStatus rgm_dataset_new(const double *obs, size_t n, size_t p, struct RgmDataset **out);

/**
 * Synthetic dataset; `scenario` is one of `trimodal`, `emg`, `ten-d`, `thirteen`.
 *
 * # Safety
 * `scenario` must be a null-terminated string and `out` writable.
 */
enum RgmStatus rgm_dataset_simulate(const char *scenario,
                                    size_t n,
                                    uint64_t seed,
                                    struct RgmDataset **out);

/**
 * Number of observations, or 0 for a null handle.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
size_t rgm_dataset_n(const struct RgmDataset *data);

/**
 * Dimension, or 0 for a null handle.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
size_t rgm_dataset_p(const struct RgmDataset *data);

/**
 * # Safety
 * `data` must be null or a handle not yet freed.
 */
void rgm_dataset_free(struct RgmDataset *data);

/**
 * Run one chain. Sweeps after `burn_in` are retained every `thin` sweeps.
 *
 * # Safety
 * `data` and `config` must be live handles and `out` writable.
 */
enum RgmStatus rgm_run_chain(const struct RgmDataset *data,
                             const struct RgmConfig *config,
                             size_t sweeps,
                             size_t burn_in,
                             size_t thin,
                             uint64_t seed,
                             struct RgmTrace **out);

/**
 * Retained sweeps, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t rgm_trace_len(const struct RgmTrace *trace);

/**
 * Number of components `K` in retained sweep `index`.
 *
 * # Safety
 * `trace` must be a live handle and `out_k` writable.
 */
enum RgmStatus rgm_trace_k(const struct RgmTrace *trace, size_t index, size_t *out_k);

/**
 * Copy the cluster labels of retained sweep `index` into `buf`, whose length
 * `len` must equal the number of observations.
 *
 * # Safety
 * `trace` must be a live handle and `buf` must hold `len` writable values.
 */
enum RgmStatus rgm_trace_assignments(const struct RgmTrace *trace,
                                     size_t index,
                                     size_t *buf,
                                     size_t len);

/**
 * Log conditional predictive ordinate summed over observations.
 *
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum RgmStatus rgm_trace_log_cpo(const struct RgmTrace *trace, double *out);

/**
 * Write the trace as JSON lines to `path`.
 *
 * # Safety
 * `trace` must be a live handle and `path` a null-terminated string.
 */
enum RgmStatus rgm_trace_write(const struct RgmTrace *trace, const char *path);

/**
 * # Safety
 * `trace` must be null or a handle not yet freed.
 */
void rgm_trace_free(struct RgmTrace *trace);

#endif  /* RGM_H */
