#ifndef ECQ_H
#define ECQ_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum EcqStatus {
  ECQ_STATUS_OK = 0,
  ECQ_STATUS_NULL_POINTER = 1,
  ECQ_STATUS_INVALID_UTF8 = 2,
  ECQ_STATUS_INVALID_ARGUMENT = 3,
  ECQ_STATUS_CONFIG = 4,
  ECQ_STATUS_SIMULATION = 5,
  ECQ_STATUS_PROTOCOL = 6,
  ECQ_STATUS_VALUE_MODEL = 7,
  ECQ_STATUS_SCORING = 8,
  ECQ_STATUS_IO = 9,
  ECQ_STATUS_PANIC = 10,
} EcqStatus;

/*
 A list of protocols produced by a batch.
 */
typedef struct EcqBatch EcqBatch;

/*
 A validated simulation configuration.
 */
typedef struct EcqConfig EcqConfig;

/*
 The event log of one run.
 */
typedef struct EcqProtocol EcqProtocol;

/*
 Per-run scores plus per-policy summary statistics.
 */
typedef struct EcqScores EcqScores;

typedef struct EcqValueModel EcqValueModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on this thread.
 */
const char *ecq_last_error(void);

/*
 Library version, a static string.
 */
const char *ecq_version(void);

/*
 # Safety
 `s` must come from this library and not have been freed.
 */
void ecq_string_free(char *s);

/*
 Parse a JSON configuration. A relative plan path is resolved against
 `base_dir` (may be NULL for the current directory).

 # Safety
 Strings must be NUL-terminated; `out` must be writable.
 */
enum EcqStatus ecq_config_from_json(const char *json, const char *base_dir, struct EcqConfig **out);

/*
 # Safety
 `path` must be NUL-terminated; `out` must be writable.
 */
enum EcqStatus ecq_config_from_file(const char *path, struct EcqConfig **out);

/*
 Self-contained JSON form of the configuration (plan inlined).

 # Safety
 `config` must be a live handle; `out` must be writable.
 */
enum EcqStatus ecq_config_to_json(const struct EcqConfig *config, char **out);

/*
 # Safety
 `config` must be NULL or a live handle.
 */
void ecq_config_free(struct EcqConfig *config);

/*
 Simulate one run. `policy` overrides the configured policy when not
 NULL (e.g. `"Watch(2)"`).

 # Safety
 `config` must be a live handle; `policy` NULL or NUL-terminated; `out`
 writable.
 */
enum EcqStatus ecq_run(const struct EcqConfig *config,
                       const char *policy,
                       uint64_t seed,
                       struct EcqProtocol **out);

/*
 Parse a protocol log.

 # Safety
 `log` must be NUL-terminated; `out` writable.
 */
enum EcqStatus ecq_protocol_from_log(const char *log, struct EcqProtocol **out);

/*
 Serialize a protocol to its line-delimited JSON log.

 # Safety
 `protocol` must be a live handle; `out` writable.
 */
enum EcqStatus ecq_protocol_to_log(const struct EcqProtocol *protocol, char **out);

/*
 Tick of the terminal event, or 0 for a NULL handle.

 # Safety
 `protocol` must be NULL or a live handle.
 */
uint32_t ecq_protocol_terminal_tick(const struct EcqProtocol *protocol);

/*
 Number of events, or 0 for a NULL handle.

 # Safety
 `protocol` must be NULL or a live handle.
 */
size_t ecq_protocol_event_count(const struct EcqProtocol *protocol);

/*
 Check the protocol against the event grammar.

 # Safety
 `protocol` must be a live handle.
 */
enum EcqStatus ecq_protocol_validate(const struct EcqProtocol *protocol);

/*
 Trajectory figure as an SVG document.

 # Safety
 Handles must be live; `out` writable.
 */
enum EcqStatus ecq_protocol_trajectory_svg(const struct EcqProtocol *protocol,
                                           const struct EcqConfig *config,
                                           char **out);

/*
 # Safety
 `protocol` must be NULL or a live handle.
 */
void ecq_protocol_free(struct EcqProtocol *protocol);

/*
 Seeded batch over a policy list such as `"NoHelp,NurseOnly,Watch(0..5)"`.
 `jobs` = 0 uses every core.

 # Safety
 `config` must be a live handle; `policies` NUL-terminated; `out`
 writable.
 */
enum EcqStatus ecq_batch_run(const struct EcqConfig *config,
                             const char *policies,
                             size_t runs_per_policy,
                             uint64_t master_seed,
                             size_t jobs,
                             struct EcqBatch **out);

/*
 # Safety
 `batch` must be NULL or a live handle.
 */
size_t ecq_batch_len(const struct EcqBatch *batch);

/*
 Copy out the protocol at `index`.

 # Safety
 `batch` must be a live handle; `out` writable.
 */
enum EcqStatus ecq_batch_get(const struct EcqBatch *batch, size_t index, struct EcqProtocol **out);

/*
 # Safety
 `batch` must be NULL or a live handle.
 */
void ecq_batch_free(struct EcqBatch *batch);

/*
 The shipped default value model.

 # Safety
 `out` must be writable.
 */
enum EcqStatus ecq_value_model_default(struct EcqValueModel **out);

/*
 Parse a value-model file body.

 # Safety
 `text` must be NUL-terminated; `out` writable.
 */
enum EcqStatus ecq_value_model_parse(const char *text, struct EcqValueModel **out);

/*
 # Safety
 `model` must be NULL or a live handle.
 */
void ecq_value_model_free(struct EcqValueModel *model);

/*
 Score every protocol of a batch and summarize per policy.

 # Safety
 Handles must be live; `out` writable.
 */
enum EcqStatus ecq_score(const struct EcqBatch *batch,
                         const struct EcqConfig *config,
                         const struct EcqValueModel *model,
                         struct EcqScores **out);

/*
 Summary table (`policy,dimension,n,mean,...`).

 # Safety
 `scores` must be a live handle; `out` writable.
 */
enum EcqStatus ecq_scores_summary_csv(const struct EcqScores *scores, char **out);

/*
 Per-run score table (`policy,run_id,<dimensions>`).

 # Safety
 `scores` must be a live handle; `out` writable.
 */
enum EcqStatus ecq_scores_runs_csv(const struct EcqScores *scores, char **out);

/*
 Mean violation of one policy on one dimension.

 # Safety
 `scores` must be a live handle; strings NUL-terminated; `out` writable.
 */
enum EcqStatus ecq_scores_mean(const struct EcqScores *scores,
                               const char *policy,
                               const char *dimension,
                               double *out);

/*
 Box plot of one dimension as an SVG document.

 # Safety
 `scores` must be a live handle; `dimension` NUL-terminated; `out`
 writable.
 */
enum EcqStatus ecq_scores_box_svg(const struct EcqScores *scores,
                                  const char *dimension,
                                  char **out);

/*
 # Safety
 `scores` must be NULL or a live handle.
 */
void ecq_scores_free(struct EcqScores *scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECQ_H */
