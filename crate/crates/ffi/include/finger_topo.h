#ifndef FINGER_TOPO_H
#define FINGER_TOPO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes. Values 3 and 4 match the command-line exit codes.
 */
typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_NULL_ARGUMENT = 1,
  FT_STATUS_INVALID_UTF8 = 2,
  FT_STATUS_CONFIG = 3,
  FT_STATUS_RUNTIME = 4,
  FT_STATUS_OUT_OF_RANGE = 5,
  FT_STATUS_PANIC = 6,
} FtStatus;

/*
 Parsed configuration.
 */
typedef struct FtConfig FtConfig;

/*
 Outcome of one optimization run.
 */
typedef struct FtResult FtResult;

/*
 One iteration of the history.
 */
typedef struct FtHistoryRow {
  size_t iter;
  double phi;
  /*
   mm
   */
  double mean_output_disp;
  /*
   N mm
   */
  double strain_energy;
  double volume_fraction;
  double max_density_change;
} FtHistoryRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. Valid until the next
 failing call on the same thread.
 */
const char *ft_last_error(void);

/*
 Library version, static storage.
 */
const char *ft_version(void);

/*
 Configuration with every key at its default.

 # Safety
 `out` must be a valid pointer.
 */
enum FtStatus ft_config_default(struct FtConfig **out);

/*
 Parse TOML text in the command-line config format.

 # Safety
 `toml` must be a nul-terminated string and `out` a valid pointer.
 */
enum FtStatus ft_config_parse(const char *toml, struct FtConfig **out);

/*
 Apply a `key=value` or `section.key=value` override in place.

 # Safety
 `config` must come from this library; `item` must be a nul-terminated string.
 */
enum FtStatus ft_config_set(struct FtConfig *config, const char *item);

/*
 # Safety
 `config` must come from this library or be null.
 */
void ft_config_free(struct FtConfig *config);

/*
 Run one optimization.

 # Safety
 `config` must come from this library and `out` must be a valid pointer.
 */
enum FtStatus ft_optimize(const struct FtConfig *config, struct FtResult **out);

/*
 # Safety
 `result` must come from this library or be null.
 */
void ft_result_free(struct FtResult *result);

/*
 Number of rows in the history (iterations + 1), 0 for null.

 # Safety
 `result` must come from this library or be null.
 */
size_t ft_result_history_len(const struct FtResult *result);

/*
 1 if the run met its convergence tolerance, 0 otherwise.

 # Safety
 `result` must come from this library or be null.
 */
int32_t ft_result_converged(const struct FtResult *result);

/*
 Copy history row `index` into `out`.

 # Safety
 `result` must come from this library and `out` must be a valid pointer.
 */
enum FtStatus ft_result_history(const struct FtResult *result,
                                size_t index,
                                struct FtHistoryRow *out);

/*
 Number of active elements in the final density field, 0 for null.

 # Safety
 `result` must come from this library or be null.
 */
size_t ft_result_density_len(const struct FtResult *result);

/*
 Copy the final density field into `out`, which holds `len` doubles. `len` must be
 at least [`ft_result_density_len`].

 # Safety
 `result` must come from this library and `out` must point to `len` writable doubles.
 */
enum FtStatus ft_result_density(const struct FtResult *result, double *out, size_t len);

/*
 Write the run directory `<dir>/<run_id>/` with the same files as the command line.

 # Safety
 `result` must come from this library; `dir` and `run_id` must be nul-terminated.
 */
enum FtStatus ft_result_write(const struct FtResult *result, const char *dir, const char *run_id);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINGER_TOPO_H */
