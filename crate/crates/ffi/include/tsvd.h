#ifndef TSVD_H
#define TSVD_H

/* Generated by cbindgen from the tsvd-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum {
  TSVD_OK = 0,
  /**
   * A required pointer argument was null.
   */
  TSVD_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  TSVD_INVALID_UTF8 = 2,
  /**
   * File could not be read or written.
   */
  TSVD_IO = 3,
  /**
   * Input file was malformed.
   */
  TSVD_PARSE = 4,
  /**
   * Invalid parameter combination.
   */
  TSVD_CONFIG = 5,
  /**
   * The algorithm failed (degenerate geometry, recovery failure, ...).
   */
  TSVD_ALGORITHM = 6,
  /**
   * An index or buffer size was out of range.
   */
  TSVD_OUT_OF_RANGE = 7,
  /**
   * An internal panic was caught; state may be stale but memory is safe.
   */
  TSVD_PANIC = 8,
} TsvdStatus;

/**
 * Opaque corpus handle.
 */
typedef struct TsvdCorpus TsvdCorpus;

/**
 * Opaque model handle.
 */
typedef struct TsvdModel TsvdModel;

/**
 * Algorithm parameters, plain-old-data so callers can fill them directly.
 * Use `tsvd_params_default` and override what you need.
 */
typedef struct {
  /**
   * Number of topics (at least 1).
   */
  uint32_t k;
  /**
   * Minimum dominant-topic probability; values <= 0 mean 1/k.
   */
  double w0;
  double epsilon;
  double epsilon0;
  double delta;
  double gamma;
  /**
   * Count grid resolution; 0 means the corpus's median document length.
   */
  uint64_t nominal_m;
  /**
   * 0 = off, 1 = formula floor, 2 = explicit (`floor_value`).
   */
  int32_t floor_mode;
  double floor_value;
  /**
   * 0 = off, 1 = formula cutoff, 2 = explicit (`cutoff_value`).
   */
  int32_t cutoff_mode;
  double cutoff_value;
  uint32_t kmeans_restarts;
  uint32_t lloyd_max_iters;
  uint64_t seed;
} TsvdParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated library version; the pointer is static, do not free it.
 */
const char *tsvd_version(void);

/**
 * The error message of the most recent failing call on this thread, or
 * null. The caller owns the returned string: free it with
 * `tsvd_string_free`.
 */
char *tsvd_last_error_message(void);

/**
 * Frees a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be a pointer previously returned by `tsvd_last_error_message`
 * and not yet freed.
 */
void tsvd_string_free(char *s);

/**
 * Default parameters for `k` topics: w0 = 1/k, epsilon = 1/6,
 * epsilon0 = 1/3, delta = 0.05, gamma = 1.1, floor and cutoff off,
 * 10 restarts, seed 0.
 */
TsvdParams tsvd_params_default(uint32_t k);

/**
 * Reads a corpus in UCI bag-of-words format. On success `*out` owns the
 * corpus; release it with `tsvd_corpus_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
TsvdStatus tsvd_corpus_read_uci(const char *path, TsvdCorpus **out);

/**
 * Number of documents, or 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live corpus handle.
 */
uint64_t tsvd_corpus_num_docs(const TsvdCorpus *corpus);

/**
 * Vocabulary size, or 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live corpus handle.
 */
uint64_t tsvd_corpus_num_words(const TsvdCorpus *corpus);

/**
 * Frees a corpus handle. Null is a no-op.
 *
 * # Safety
 * `corpus` must be a pointer from `tsvd_corpus_read_uci`, not yet freed.
 */
void tsvd_corpus_free(TsvdCorpus *corpus);

/**
 * Runs topic recovery. On success `*out` owns the model; release it with
 * `tsvd_model_free`.
 *
 * # Safety
 * All pointers must be valid; `corpus` must be a live corpus handle.
 */
TsvdStatus tsvd_run(const TsvdCorpus *corpus, const TsvdParams *params, TsvdModel **out);

/**
 * Number of topics in the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
uint64_t tsvd_model_num_topics(const TsvdModel *model);

/**
 * Vocabulary size of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
uint64_t tsvd_model_num_words(const TsvdModel *model);

/**
 * Copies the recovered d×k topic matrix into `buffer` in column-major
 * order. `len` must be exactly d·k.
 *
 * # Safety
 * `buffer` must point to at least `len` writable doubles.
 */
TsvdStatus tsvd_model_topic_matrix(const TsvdModel *model, double *buffer, size_t len);

/**
 * Number of catchwords identified for `topic`, written to `*out`.
 *
 * # Safety
 * `model` must be a live model handle and `out` a valid pointer.
 */
TsvdStatus tsvd_model_catchword_count(const TsvdModel *model, uint32_t topic, size_t *out);

/**
 * Copies `topic`'s catchword ids into `buffer`; `len` must be exactly the
 * value reported by `tsvd_model_catchword_count`.
 *
 * # Safety
 * `buffer` must point to at least `len` writable u32 values.
 */
TsvdStatus tsvd_model_catchwords(const TsvdModel *model,
                                 uint32_t topic,
                                 uint32_t *buffer,
                                 size_t len);

/**
 * Writes the recovered topic matrix as TSV and/or the model sidecar as
 * JSON. Either path may be null to skip that file.
 *
 * # Safety
 * Non-null paths must be NUL-terminated strings.
 */
TsvdStatus tsvd_model_save(const TsvdModel *model,
                           const char *topics_path,
                           const char *sidecar_path);

/**
 * Frees a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a pointer from `tsvd_run`, not yet freed.
 */
void tsvd_model_free(TsvdModel *model);

/**
 * Matched L1 reconstruction error between two topic-matrix TSV files,
 * written to `*out`.
 *
 * # Safety
 * Paths must be NUL-terminated strings and `out` a valid pointer.
 */
TsvdStatus tsvd_reconstruction_error(const char *reference_path,
                                     const char *recovered_path,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSVD_H */
