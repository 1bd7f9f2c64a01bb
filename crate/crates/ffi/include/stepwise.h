#ifndef STEPWISE_H
#define STEPWISE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Use only rules generated from the prelude (plus `+` and beta reduction).
#define STEPWISE_FLAG_NO_BUILTINS 1

typedef enum StepwiseStatus {
  STEPWISE_STATUS_OK = 0,
  STEPWISE_STATUS_NULL_ARGUMENT = 1,
  STEPWISE_STATUS_INVALID_UTF8 = 2,
  STEPWISE_STATUS_INVALID_ARGUMENT = 3,
  STEPWISE_STATUS_PRELUDE_ERROR = 4,
  STEPWISE_STATUS_SCRIPT_ERROR = 5,
  STEPWISE_STATUS_PARSE_ERROR = 6,
  STEPWISE_STATUS_EVALUATION_ERROR = 7,
  STEPWISE_STATUS_NO_STEP = 8,
  STEPWISE_STATUS_INTERNAL = 9,
} StepwiseStatus;

// Opaque engine handle.
typedef struct StepwiseEngine StepwiseEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an engine.
//
// `prelude` is the text of a prelude file, or NULL for the default prelude.
// `script` is the text of a feedback script, or NULL for none. A `budget`
// of 0 selects the default step budget. `flags` is a combination of
// `STEPWISE_FLAG_*` values.
//
// # Safety
// `prelude` and `script` must be NULL or valid NUL-terminated strings;
// `out` must be a valid pointer to writable storage for one handle.
enum StepwiseStatus stepwise_engine_new(const char *prelude,
                                        const char *script,
                                        uintptr_t budget,
                                        uint32_t flags,
                                        struct StepwiseEngine **out);

// Releases an engine. NULL is ignored.
//
// # Safety
// `engine` must be NULL or a handle from [`stepwise_engine_new`] that has
// not been freed.
void stepwise_engine_free(struct StepwiseEngine *engine);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a string returned by this library that has not been freed.
void stepwise_string_free(char *s);

// Message describing the last failure on this thread, or NULL. The
// pointer stays valid until the next call into the library on this thread.
const char *stepwise_last_error(void);

// Library version as a static string.
const char *stepwise_version(void);

// Handles a JSON service request and writes the JSON response to `out`.
// The status is `Ok` whenever a response was produced, including
// responses that report an error.
//
// # Safety
// `engine` must be a live handle, `request_json` a valid NUL-terminated
// string and `out` a valid pointer.
enum StepwiseStatus stepwise_service_call(const struct StepwiseEngine *engine,
                                          const char *request_json,
                                          char **out);

// Full derivation of `expr` as JSON. `strategy` is `"outermost"`,
// `"innermost"` or NULL (outermost).
//
// # Safety
// Pointers must be valid as for [`stepwise_service_call`]; `strategy` may be NULL.
enum StepwiseStatus stepwise_derive(const struct StepwiseEngine *engine,
                                    const char *expr,
                                    const char *strategy,
                                    char **out);

// The next step of the strategy as JSON.
//
// # Safety
// As for [`stepwise_derive`].
enum StepwiseStatus stepwise_hint(const struct StepwiseEngine *engine,
                                  const char *expr,
                                  const char *strategy,
                                  char **out);

// Diagnosis of `submitted` as the next step after `expr`, as JSON.
// `strategy` may also be `"free"`.
//
// # Safety
// As for [`stepwise_derive`]; `submitted` must be a valid string.
enum StepwiseStatus stepwise_diagnose(const struct StepwiseEngine *engine,
                                      const char *expr,
                                      const char *submitted,
                                      const char *strategy,
                                      char **out);

// Number of steps left in the derivation of `expr`.
//
// # Safety
// `engine` must be a live handle, `expr` a valid string, `strategy` NULL or
// a valid string and `count` a valid pointer.
enum StepwiseStatus stepwise_steps_remaining(const struct StepwiseEngine *engine,
                                             const char *expr,
                                             const char *strategy,
                                             uintptr_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEPWISE_H */
