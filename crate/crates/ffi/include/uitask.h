/* C interface for the uitask library. Generated by cbindgen; do not edit. */

#ifndef UITASK_H
#define UITASK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every FFI call.
 */
typedef enum UitaskStatus {
  UITASK_STATUS_OK = 0,
  UITASK_STATUS_NULL_ARGUMENT = 1,
  UITASK_STATUS_INVALID_UTF8 = 2,
  UITASK_STATUS_INVALID_JSON = 3,
  UITASK_STATUS_INVALID_MODEL = 4,
  UITASK_STATUS_DEVICE_ERROR = 5,
  UITASK_STATUS_PARSE_ERROR = 6,
  UITASK_STATUS_INVALID_ARGUMENT = 7,
  UITASK_STATUS_LLM_ERROR = 8,
  UITASK_STATUS_PANIC = 9,
} UitaskStatus;

/**
 * A loaded app model (opaque).
 */
typedef struct UitaskAppModel UitaskAppModel;

/**
 * A running simulator session (opaque).
 */
typedef struct UitaskSim UitaskSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *uitask_version(void);

/**
 * Message for the current thread's most recent failure, or NULL if the
 * last call succeeded. Borrowed; valid until the next call on this thread.
 */
const char *uitask_last_error(void);

/**
 * Frees a string returned through an `out` pointer.
 *
 * # Safety
 * `ptr` must be NULL or a pointer obtained from this library's `out`
 * parameters, not yet freed.
 */
void uitask_string_free(char *ptr);

/**
 * Parses and validates an app model from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_model` must be a valid
 * pointer.
 */
enum UitaskStatus uitask_app_model_from_json(const char *json, struct UitaskAppModel **out_model);

/**
 * # Safety
 * `model` must be NULL or an unfreed handle from
 * [`uitask_app_model_from_json`].
 */
void uitask_app_model_free(struct UitaskAppModel *model);

/**
 * Creates an empty simulator; add models before starting apps.
 *
 * # Safety
 * `out_sim` must be a valid pointer.
 */
enum UitaskStatus uitask_sim_new(struct UitaskSim **out_sim);

/**
 * Copies a model into the simulator. The model handle stays owned by the
 * caller.
 *
 * # Safety
 * Both handles must be valid and unfreed.
 */
enum UitaskStatus uitask_sim_add_model(struct UitaskSim *sim, const struct UitaskAppModel *model);

/**
 * # Safety
 * `sim` must be NULL or an unfreed handle from [`uitask_sim_new`].
 */
void uitask_sim_free(struct UitaskSim *sim);

/**
 * Returns the current UI state as JSON.
 *
 * # Safety
 * `sim` must be a valid handle; `out_json` a valid pointer.
 */
enum UitaskStatus uitask_sim_state_json(struct UitaskSim *sim, char **out_json);

/**
 * Performs an action given as JSON (same schema as trace files) and
 * returns the resulting state digest.
 *
 * # Safety
 * `sim` must be a valid handle; `action_json` a NUL-terminated string;
 * `out_digest` a valid pointer.
 */
enum UitaskStatus uitask_sim_perform_json(struct UitaskSim *sim,
                                          const char *action_json,
                                          char **out_digest);

/**
 * Renders the choice prompt for the simulator's current state.
 * `history_json` is a JSON array of executed action strings, or NULL for
 * none.
 *
 * # Safety
 * `sim` must be a valid handle; `task` a NUL-terminated string;
 * `history_json` NULL or a NUL-terminated string; `out_prompt` a valid
 * pointer.
 */
enum UitaskStatus uitask_sim_choice_prompt(struct UitaskSim *sim,
                                           const char *task,
                                           const char *history_json,
                                           char **out_prompt);

/**
 * Extracts the chosen action id from a model reply. Writes the id, or -1
 * when the model declared the task complete.
 *
 * # Safety
 * `reply` must be a NUL-terminated string; `out_choice` a valid pointer.
 */
enum UitaskStatus uitask_parse_choice(const char *reply, size_t num_actions, int64_t *out_choice);

/**
 * Normalizes a model reply to an edit prompt into the text to type.
 *
 * # Safety
 * `reply` must be a NUL-terminated string; `out_text` a valid pointer.
 */
enum UitaskStatus uitask_parse_edit_text(const char *reply, char **out_text);

/**
 * Task completion progress: the matched share of the reference sequence.
 * Both arguments are JSON arrays of action strings; the reference must be
 * non-empty.
 *
 * # Safety
 * Both JSON arguments must be NUL-terminated strings; `out_progress` a
 * valid pointer.
 */
enum UitaskStatus uitask_completion_progress(const char *reference_json,
                                             const char *predicted_json,
                                             double *out_progress);

/**
 * Runs a whole task against the simulator with a scripted oracle
 * (`rules_json`, same schema as rules files). Writes the full trace as
 * JSON. `max_steps` of 0 keeps the default budget.
 *
 * # Safety
 * `sim` must be a valid handle; string arguments NUL-terminated;
 * `out_trace_json` a valid pointer.
 */
enum UitaskStatus uitask_sim_run_task_scripted(struct UitaskSim *sim,
                                               const char *rules_json,
                                               const char *task,
                                               const char *app_id,
                                               size_t max_steps,
                                               char **out_trace_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UITASK_H */
