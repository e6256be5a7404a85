#ifndef TADIL_H
#define TADIL_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TadilDecisionKind {
  TADIL_DECISION_KIND_KNOWN_TASK = 0,
  TADIL_DECISION_KIND_NEW_TASK = 1,
} TadilDecisionKind;

typedef enum TadilStatus {
  TADIL_STATUS_OK = 0,
  TADIL_STATUS_NULL_POINTER = 1,
  TADIL_STATUS_INVALID_ARGUMENT = 2,
  TADIL_STATUS_DIMENSION_MISMATCH = 3,
  TADIL_STATUS_NON_FINITE = 4,
  TADIL_STATUS_ZERO_VECTOR = 5,
  TADIL_STATUS_NO_ACTIVE_TASK = 6,
  TADIL_STATUS_UNKNOWN_TASK = 7,
  TADIL_STATUS_EMPTY_TRAINING_SET = 8,
  TADIL_STATUS_CORRUPT = 9,
  TADIL_STATUS_VERSION_MISMATCH = 10,
  TADIL_STATUS_PANIC = 11,
  TADIL_STATUS_INTERNAL = 12,
} TadilStatus;

/**
 * Opaque engine handle.
 */
typedef struct TadilEngine TadilEngine;

/**
 * Engine configuration. Obtain defaults from `tadil_params_default`.
 */
typedef struct TadilParams {
  double eps;
  uint32_t min_pts;
  uint32_t k;
  uint32_t permutations;
  double significance;
  /**
   * Used instead of permutation calibration when `use_fixed_threshold`.
   */
  double fixed_threshold;
  bool use_fixed_threshold;
  /**
   * Kernel bandwidth; zero or negative selects the median heuristic.
   */
  double bandwidth;
  uint64_t seed;
  double head_learning_rate;
  uint32_t head_iterations;
} TadilParams;

typedef struct TadilDecision {
  enum TadilDecisionKind kind;
  uint32_t task_id;
  /**
   * Set when the task classifier disagreed with the matched memory entry.
   */
  bool warning;
  uint32_t classifier_predicted;
  uint32_t memory_matched;
} TadilDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

struct TadilParams tadil_params_default(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tadil_last_error(void);

/**
 * Creates an engine. `params` may be NULL for defaults.
 */
enum TadilStatus tadil_engine_new(uint32_t dim,
                                  const struct TadilParams *params,
                                  struct TadilEngine **out);

/**
 * Releases an engine. NULL is ignored.
 */
void tadil_engine_free(struct TadilEngine *engine);

/**
 * Processes one batch of `rows` embeddings. `class_labels` may be NULL;
 * when given (one per row) and the batch starts a new task, the new head
 * is trained on them.
 */
enum TadilStatus tadil_engine_step(struct TadilEngine *engine,
                                   const double *data,
                                   size_t rows,
                                   const uint32_t *class_labels,
                                   struct TadilDecision *out);

/**
 * Classifies one vector with the active task's head.
 */
enum TadilStatus tadil_engine_infer(const struct TadilEngine *engine,
                                    const double *x,
                                    size_t dim,
                                    uint32_t *out_label);

/**
 * Retrains the head of `task` on `rows` vectors with one label each.
 */
enum TadilStatus tadil_engine_train_head(struct TadilEngine *engine,
                                         uint32_t task,
                                         const double *data,
                                         size_t rows,
                                         const uint32_t *labels);

/**
 * Number of known tasks; 0 for a NULL engine.
 */
uint32_t tadil_engine_task_count(const struct TadilEngine *engine);

enum TadilStatus tadil_engine_active_task(const struct TadilEngine *engine, uint32_t *out);

/**
 * Serializes the engine into a newly allocated buffer.
 */
enum TadilStatus tadil_engine_snapshot(const struct TadilEngine *engine,
                                       uint8_t **out_buf,
                                       size_t *out_len);

/**
 * Rebuilds an engine from a snapshot buffer.
 */
enum TadilStatus tadil_engine_restore(const uint8_t *buf, size_t len, struct TadilEngine **out);

/**
 * Frees a buffer returned by `tadil_engine_snapshot`.
 */
void tadil_bytes_free(uint8_t *buf, size_t len);

/**
 * The event log as line-delimited JSON in a newly allocated string.
 */
enum TadilStatus tadil_engine_event_log(const struct TadilEngine *engine, char **out);

/**
 * Frees a string returned by `tadil_engine_event_log`.
 */
void tadil_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TADIL_H */
