#ifndef INDEXPAIR_H
#define INDEXPAIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Zero is success.
 */
typedef enum {
  IP_STATUS_OK = 0,
  IP_STATUS_NULL_POINTER = 1,
  IP_STATUS_INVALID_ARGUMENT = 2,
  IP_STATUS_IO = 3,
  /**
   * A rigorous check failed (isolation, pair, acyclicity, certification).
   */
  IP_STATUS_CHECK_FAILED = 4,
  IP_STATUS_PANIC = 5,
} IpStatus;

/**
 * Run configuration.
 */
typedef struct IpConfig IpConfig;

/**
 * Result of a finished run.
 */
typedef struct IpRun IpRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last error on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *ip_last_error(void);

/**
 * Library version as a static string.
 */
const char *ip_version(void);

/**
 * New configuration for `map` ("standard", "henon" or "horseshoe") with
 * default settings. Returns null on an unknown map.
 *
 * # Safety
 * `map` must be a valid NUL-terminated string.
 */
IpConfig *ip_config_new(const char *map);

/**
 * # Safety
 * `cfg` must come from [`ip_config_new`] and not be used afterwards.
 */
void ip_config_free(IpConfig *cfg);

/**
 * Parameter interval as decimal strings, rounded outward.
 *
 * # Safety
 * `cfg` must be a live handle; `lo` and `hi` valid C strings.
 */
IpStatus ip_config_set_eps(IpConfig *cfg, const char *lo, const char *hi);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
IpStatus ip_config_set_depth(IpConfig *cfg, uint32_t start, uint32_t end);

/**
 * Seeding mode: "homoclinic", "periodic" or "periodic-plus-orbits".
 *
 * # Safety
 * `cfg` must be a live handle; `mode` a valid C string.
 */
IpStatus ip_config_set_mode(IpConfig *cfg, const char *mode, uintptr_t max_period);

/**
 * Output directory for artifacts; null clears it.
 *
 * # Safety
 * `cfg` must be a live handle; `dir` null or a valid C string.
 */
IpStatus ip_config_set_out(IpConfig *cfg, const char *dir);

/**
 * Runs the pipeline. On `Ok` or `CheckFailed` a run handle is stored in
 * `*out`; a failed check still yields a result describing the failure.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
IpStatus ip_run(const IpConfig *cfg, IpRun **out);

/**
 * # Safety
 * `run` must come from [`ip_run`] and not be used afterwards.
 */
void ip_run_free(IpRun *run);

/**
 * True iff every rigorous stage passed.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
bool ip_run_ok(const IpRun *run);

/**
 * Certified entropy lower bound (0 when nothing was certified).
 *
 * # Safety
 * `run` must be a live handle or null.
 */
double ip_run_entropy(const IpRun *run);

/**
 * Symbols after pruning.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
uintptr_t ip_run_symbols(const IpRun *run);

/**
 * Boxes in `P1` and `P0`.
 *
 * # Safety
 * `run` must be a live handle; the out pointers may be null.
 */
IpStatus ip_run_pair_size(const IpRun *run, uintptr_t *p1, uintptr_t *p0);

/**
 * Full result as JSON. Free with [`ip_string_free`].
 *
 * # Safety
 * `run` must be a live handle or null.
 */
char *ip_run_json(const IpRun *run);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ip_string_free(char *s);

/**
 * Certified lower bound on `log sp(A)` for a row-major `n × n` 0/1 matrix
 * (`a[j*n + i]` is the edge i → j).
 *
 * # Safety
 * `a` must point to `n*n` bytes and `out` be a valid pointer.
 */
IpStatus ip_entropy_lower_bound(const uint8_t *a, uintptr_t n, uintptr_t maxpow, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INDEXPAIR_H */
