#ifndef QANLU_H
#define QANLU_H

/* Generated by cbindgen. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum QanluStatus {
  QANLU_STATUS_OK = 0,
  QANLU_STATUS_NULL_POINTER = 1,
  QANLU_STATUS_INVALID_UTF8 = 2,
  QANLU_STATUS_INVALID_ARGUMENT = 3,
  QANLU_STATUS_INGEST = 4,
  QANLU_STATUS_CATALOG = 5,
  QANLU_STATUS_CONVERT = 6,
  QANLU_STATUS_SAMPLE = 7,
  QANLU_STATUS_SCORE = 8,
  QANLU_STATUS_JSON = 9,
  QANLU_STATUS_PANIC = 10,
} QanluStatus;

/**
 * A loaded question catalog.
 */
typedef struct QanluCatalog QanluCatalog;

/**
 * A SQuAD2.0 corpus.
 */
typedef struct QanluCorpus QanluCorpus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the next call.
 */
const char *qanlu_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void qanlu_string_free(char *s);

/**
 * Loads a catalog from its JSON text.
 *
 * # Safety
 * `json` must be a valid C string and `out` a writable pointer.
 */
enum QanluStatus qanlu_catalog_load(const char *json, struct QanluCatalog **out);

/**
 * # Safety
 * `catalog` must be null or a handle from [`qanlu_catalog_load`], not yet freed.
 */
void qanlu_catalog_free(struct QanluCatalog *catalog);

/**
 * Converts NLU records (`format` is `"bio"` or `"span"`) into a corpus.
 * With `frame` set, span records get the default frame for their requested slots.
 *
 * # Safety
 * String arguments must be valid C strings, `catalog` a live handle and `out` writable.
 */
enum QanluStatus qanlu_convert(const char *records,
                               const char *format,
                               const struct QanluCatalog *catalog,
                               bool include_intents,
                               bool frame,
                               struct QanluCorpus **out);

/**
 * Parses SQuAD2.0 JSON. `lenient` accepts and repairs third-party quirks.
 *
 * # Safety
 * `json` must be a valid C string and `out` writable.
 */
enum QanluStatus qanlu_corpus_parse(const char *json, bool lenient, struct QanluCorpus **out);

/**
 * Serializes a corpus; free the result with [`qanlu_string_free`].
 *
 * # Safety
 * `corpus` must be a live handle and `out` writable.
 */
enum QanluStatus qanlu_corpus_emit(const struct QanluCorpus *corpus, char **out);

/**
 * Number of QA items, or 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
uintptr_t qanlu_corpus_item_count(const struct QanluCorpus *corpus);

/**
 * Concatenates two corpora into a new one; fails on shared item ids.
 *
 * # Safety
 * `a` and `b` must be live handles and `out` writable.
 */
enum QanluStatus qanlu_corpus_merge(const struct QanluCorpus *a,
                                    const struct QanluCorpus *b,
                                    struct QanluCorpus **out);

/**
 * # Safety
 * `corpus` must be null or a handle from this library, not yet freed.
 */
void qanlu_corpus_free(struct QanluCorpus *corpus);

/**
 * Samples records and writes the manifest JSON to `out`.
 * `strategy` is `"uniform"`, `"per-slot"` or `"per-intent"`.
 *
 * # Safety
 * String arguments must be valid C strings and `out` writable.
 */
enum QanluStatus qanlu_sample(const char *records,
                              const char *format,
                              const char *strategy,
                              uintptr_t n,
                              uint64_t seed,
                              bool allow_partial,
                              char **out);

/**
 * Scores predictions made on `corpus` against gold records and writes the
 * report JSON to `out`. `task` is `"slot"`, `"intent"` or `"both"`.
 *
 * # Safety
 * String arguments must be valid C strings, `corpus` a live handle and `out` writable.
 */
enum QanluStatus qanlu_score(const char *gold,
                             const char *gold_format,
                             const struct QanluCorpus *corpus,
                             const char *predictions,
                             const char *task,
                             bool offsets,
                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QANLU_H */
