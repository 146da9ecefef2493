#ifndef KBPCHECK_H
#define KBPCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KbpStatus {
  /**
   * Success; for checks, the property holds.
   */
  KBP_STATUS_OK = 0,
  /**
   * The check ran and the property fails.
   */
  KBP_STATUS_FAILS = 1,
  /**
   * Bad argument, unknown name, or out-of-range value.
   */
  KBP_STATUS_USAGE = 2,
  /**
   * Malformed formula, predicate or JSON.
   */
  KBP_STATUS_SYNTAX = 3,
  /**
   * The model or scenario cannot be built.
   */
  KBP_STATUS_MODEL = 4,
  KBP_STATUS_NULL_POINTER = 5,
  /**
   * Internal panic, caught at the boundary.
   */
  KBP_STATUS_PANIC = 6,
} KbpStatus;

/**
 * A built run set and the parameters that produced it.
 */
typedef struct KbpSession KbpSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a session. `config` is a JSON object (see the crate docs) or null
 * for the default three-slot, unknown-senders, speculative setting.
 *
 * # Safety
 * `config` must be null or a valid NUL-terminated string; `out` must be a
 * valid pointer.
 */
enum KbpStatus kbp_session_new(const char *config, struct KbpSession **out);

/**
 * # Safety
 * `session` must be null or a pointer from [`kbp_session_new`] not yet freed.
 */
void kbp_session_free(struct KbpSession *session);

/**
 * Number of runs in the session's system (0 for a null session).
 *
 * # Safety
 * `session` must be null or a live session.
 */
size_t kbp_run_count(const struct KbpSession *session);

/**
 * Last time step of the session's runs (0 for a null session).
 *
 * # Safety
 * `session` must be null or a live session.
 */
size_t kbp_horizon(const struct KbpSession *session);

/**
 * Check a specification ("1s", "1c", "2", "3", "4a", "4b", "5", "6") at
 * every agent and slot. Returns `Ok` if it holds, `Fails` otherwise; if
 * `report_json` is non-null it receives the JSON report.
 *
 * # Safety
 * `session` must be a live session, `spec` a valid string, `report_json`
 * null or a valid pointer.
 */
enum KbpStatus kbp_check_spec(const struct KbpSession *session,
                              const char *spec,
                              char **report_json);

/**
 * Evaluate `formula` at (`run`, `time`) and store the truth value.
 *
 * # Safety
 * `session` must be a live session, `formula` a valid string, `result` a
 * valid pointer.
 */
enum KbpStatus kbp_eval(const struct KbpSession *session,
                        const char *formula,
                        size_t run,
                        size_t time,
                        bool *result);

/**
 * Synthesize the exact local predicate for `formula` (a knowledge formula
 * about `agent`) at `time`, written to `predicate` in the predicate
 * grammar. `Usage` if the value is not determined by the agent's state.
 *
 * # Safety
 * `session` must be a live session, `formula` and `agent` valid strings,
 * `predicate` a valid pointer.
 */
enum KbpStatus kbp_synthesize(const struct KbpSession *session,
                              const char *formula,
                              const char *agent,
                              size_t time,
                              char **predicate);

/**
 * "reduced" or "naive", as a static string.
 *
 * # Safety
 * `session` must be null or a live session.
 */
const char *kbp_engine_name(const struct KbpSession *session);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *kbp_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void kbp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KBPCHECK_H */
