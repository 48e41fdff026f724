#ifndef EVPRED_H
#define EVPRED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Non-zero values match the command-line exit codes.
 */
typedef enum EvpredStatus {
  EVPRED_STATUS_OK = 0,
  /**
   * Bad argument, null pointer, malformed file, I/O or shape error.
   */
  EVPRED_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Checkpoint or vocabulary failed an integrity check.
   */
  EVPRED_STATUS_INTEGRITY = 3,
  /**
   * Model failure (invalid model, divergence, failed check).
   */
  EVPRED_STATUS_MODEL_ERROR = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  EVPRED_STATUS_INTERNAL = 5,
} EvpredStatus;

/**
 * Opaque handle to a loaded model and its vocabulary.
 */
typedef struct EvpredModel EvpredModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a checkpoint and the vocabulary it was trained with.
 *
 * # Safety
 * `checkpoint_path` and `vocab_path` must be NUL-terminated strings and
 * `out` a valid pointer. On success `*out` owns a handle to be released
 * with `evpred_model_free`.
 */
enum EvpredStatus evpred_model_load(const char *checkpoint_path,
                                    const char *vocab_path,
                                    struct EvpredModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `evpred_model_load` and not be used afterwards.
 */
void evpred_model_free(struct EvpredModel *model);

/**
 * Number of vocabulary entries (including reserved tokens), or 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t evpred_model_vocab_size(const struct EvpredModel *model);

/**
 * Greedy-decodes one source sentence into a space-joined prediction.
 *
 * # Safety
 * `model` must be a live handle, `source` a NUL-terminated string and
 * `out` a valid pointer. On success `*out` must be released with
 * `evpred_string_free`. The model may be shared across threads.
 */
enum EvpredStatus evpred_model_predict(const struct EvpredModel *model,
                                       const char *source,
                                       char **out);

/**
 * Corpus BLEU-4 of `n` candidate sentences against one reference each.
 * Sentences are normalized and split on whitespace.
 *
 * # Safety
 * `candidates` and `references` must point to `n` NUL-terminated strings
 * each (they may be null when `n` is 0); `out` must be valid.
 */
enum EvpredStatus evpred_bleu(const char *const *candidates,
                              const char *const *references,
                              size_t n,
                              double *out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void evpred_string_free(char *s);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *evpred_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *evpred_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVPRED_H */
