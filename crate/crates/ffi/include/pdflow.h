#ifndef PDFLOW_H
#define PDFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call.
typedef enum PdflowStatus {
  PDFLOW_STATUS_OK = 0,
  PDFLOW_STATUS_NULL_POINTER = 1,
  PDFLOW_STATUS_INVALID_UTF8 = 2,
  PDFLOW_STATUS_PARSE = 3,
  PDFLOW_STATUS_CONFIG = 4,
  PDFLOW_STATUS_GRID = 5,
  PDFLOW_STATUS_PRECONDITION = 6,
  PDFLOW_STATUS_NUMERICAL = 7,
  PDFLOW_STATUS_UNSUPPORTED = 8,
  PDFLOW_STATUS_IO = 9,
  PDFLOW_STATUS_PANIC = 10,
} PdflowStatus;

// A validated experiment config.
typedef struct PdflowConfig PdflowConfig;

// The outcome of a run: report, series and timings.
typedef struct PdflowReport PdflowReport;

// A parsed matrix symbol.
typedef struct PdflowSymbol PdflowSymbol;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *pdflow_last_error(void);

// Library version as a static string.
const char *pdflow_version(void);

// # Safety
// `s` is NULL or a string returned by this library and not yet freed.
void pdflow_string_free(char *s);

// Parses an `n × n` symbol in `d` space dimensions with declared order `order`.
//
// # Safety
// `src` is a NUL-terminated string and `out` is writable.
enum PdflowStatus pdflow_symbol_parse(const char *src,
                                      uintptr_t d,
                                      double order,
                                      struct PdflowSymbol **out);

// # Safety
// `sym` is NULL or a handle from [`pdflow_symbol_parse`] not yet freed.
void pdflow_symbol_free(struct PdflowSymbol *sym);

// Matrix size `n`, or 0 for NULL.
//
// # Safety
// `sym` is NULL or a live handle.
uintptr_t pdflow_symbol_size(const struct PdflowSymbol *sym);

// Space dimension `d`, or 0 for NULL.
//
// # Safety
// `sym` is NULL or a live handle.
uintptr_t pdflow_symbol_dim(const struct PdflowSymbol *sym);

// Evaluates `M(x, ξ; t)` into row-major `re`/`im`, each of length `n²`.
//
// # Safety
// `x` and `xi` hold `d` values; `re` and `im` hold `n²` writable values.
enum PdflowStatus pdflow_symbol_eval(const struct PdflowSymbol *sym,
                                     const double *x,
                                     const double *xi,
                                     double t,
                                     double *re,
                                     double *im);

// Spectral and numerical-range growth rates of the symbol on a grid.
//
// # Safety
// `sym` is a live handle; `gamma_spec` and `gamma_garding` are writable.
enum PdflowStatus pdflow_symbol_rates(const struct PdflowSymbol *sym,
                                      uintptr_t n_x,
                                      uintptr_t k_max,
                                      double eps,
                                      double *gamma_spec,
                                      double *gamma_garding);

// Validates config text. Relative `symbol_file` paths resolve against
// `base_dir`, or the working directory when `base_dir` is NULL.
//
// # Safety
// `text` is a NUL-terminated string, `base_dir` is NULL or one, and `out`
// is writable.
enum PdflowStatus pdflow_config_validate(const char *text,
                                         const char *base_dir,
                                         struct PdflowConfig **out);

// # Safety
// `cfg` is NULL or a handle from [`pdflow_config_validate`] not yet freed.
void pdflow_config_free(struct PdflowConfig *cfg);

// Normalized config text with defaults filled in; free with
// [`pdflow_string_free`]. NULL for a NULL handle.
//
// # Safety
// `cfg` is NULL or a live handle.
char *pdflow_config_echo(const struct PdflowConfig *cfg);

// Runs the experiment on `workers` threads (0 picks the default).
//
// # Safety
// `cfg` is a live handle and `out` is writable.
enum PdflowStatus pdflow_run(const struct PdflowConfig *cfg,
                             uintptr_t workers,
                             struct PdflowReport **out);

// # Safety
// `rep` is NULL or a handle from [`pdflow_run`] not yet freed.
void pdflow_report_free(struct PdflowReport *rep);

// 1 if every check passed, 0 otherwise or for NULL.
//
// # Safety
// `rep` is NULL or a live handle.
int32_t pdflow_report_pass(const struct PdflowReport *rep);

// The report as JSON, excluding timings; free with [`pdflow_string_free`].
//
// # Safety
// `rep` is NULL or a live handle.
char *pdflow_report_json(const struct PdflowReport *rep);

// Writes `report.json`, `series/*.csv` and `timings.json` into `dir`.
//
// # Safety
// `rep` is a live handle and `dir` a NUL-terminated path.
enum PdflowStatus pdflow_report_write(const struct PdflowReport *rep, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDFLOW_H */
