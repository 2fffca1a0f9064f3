#ifndef PROTORECON_H
#define PROTORECON_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  PR_STATUS_OK = 0,
  PR_STATUS_NULL_ARGUMENT = 1,
  PR_STATUS_INVALID_UTF8 = 2,
  PR_STATUS_OUT_OF_RANGE = 3,
  PR_STATUS_SCHEMA = 10,
  PR_STATUS_CONFIG = 11,
  PR_STATUS_VOCABULARY = 12,
  PR_STATUS_DIMENSION = 13,
  PR_STATUS_TRAINING = 14,
  PR_STATUS_CHECKPOINT = 15,
  PR_STATUS_CONTRACT = 16,
  PR_STATUS_DATA = 17,
  PR_STATUS_MISSING_FEATURES = 18,
  PR_STATUS_IO = 19,
  PR_STATUS_PANIC = 99,
} PrStatus;

/**
 * A ranked list of protoform candidates.
 */
typedef struct PrCandidates PrCandidates;

/**
 * A parsed cognate table.
 */
typedef struct PrDataset PrDataset;

/**
 * A trained reconstruction model.
 */
typedef struct PrRecon PrRecon;

/**
 * A trained reflex-prediction model.
 */
typedef struct PrReflex PrReflex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Owned by the
 * library and valid until the next failing call.
 */
const char *pr_last_error(void);

/**
 * Library version as a static string.
 */
const char *pr_version(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void pr_string_free(char *s);

/**
 * Parse a cognate table from TSV text.
 *
 * # Safety
 * `tsv` must be a NUL-terminated string; `out` must be writable.
 */
PrStatus pr_dataset_parse(const char *tsv, bool codepoint, PrDataset **out);

/**
 * Number of cognate sets, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t pr_dataset_len(const PrDataset *ds);

/**
 * # Safety
 * `ds` must be null or a dataset handle not yet freed.
 */
void pr_dataset_free(PrDataset *ds);

/**
 * Load a reconstruction checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
PrStatus pr_recon_load(const char *path, PrRecon **out);

/**
 * Load a reflex checkpoint whose vocabulary must match `recon`'s.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `recon` a live handle and `out`
 * writable.
 */
PrStatus pr_reflex_load(const char *path, const PrRecon *recon, PrReflex **out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void pr_recon_free(PrRecon *m);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void pr_reflex_free(PrReflex *m);

/**
 * Beam-search candidates for cognate set `index` of `ds`, best first.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
PrStatus pr_beam_search(const PrRecon *recon,
                        const PrDataset *ds,
                        size_t index,
                        size_t k,
                        double alpha,
                        PrCandidates **out);

/**
 * Beam search followed by reflex-accuracy reranking, best first.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
PrStatus pr_reconstruct(const PrRecon *recon,
                        const PrReflex *reflex,
                        const PrDataset *ds,
                        size_t index,
                        size_t k,
                        double alpha,
                        double lambda,
                        PrCandidates **out);

/**
 * Number of candidates, or 0 for a null handle.
 *
 * # Safety
 * `c` must be null or a live handle.
 */
size_t pr_candidates_len(const PrCandidates *c);

/**
 * Space-joined tokens of candidate `i`, owned by the list; null when out of
 * range.
 *
 * # Safety
 * `c` must be null or a live handle.
 */
const char *pr_candidates_tokens(const PrCandidates *c, size_t i);

/**
 * Scores of candidate `i`. `r` is NaN for plain beam lists, where `s`
 * equals `m`. Any output pointer may be null.
 *
 * # Safety
 * `c` must be a live handle; non-null outputs must be writable.
 */
PrStatus pr_candidates_scores(const PrCandidates *c,
                              size_t i,
                              double *m,
                              double *r,
                              double *s,
                              size_t *beam_rank);

/**
 * # Safety
 * `c` must be null or a handle not yet freed.
 */
void pr_candidates_free(PrCandidates *c);

/**
 * Rerank `n` candidates given their normalized log probabilities `m` and
 * reranker scores `r`: writes `s = m + λ·r` in input order to `s_out` and
 * the input index of each reranked position to `order_out`.
 *
 * # Safety
 * `m` and `r` must hold `n` values; `s_out` and `order_out` room for `n`.
 */
PrStatus pr_rerank_scores(const double *m,
                          const double *r,
                          size_t n,
                          double lambda,
                          double *s_out,
                          size_t *order_out);

/**
 * Token edit distance between two space-separated token strings.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated; `out` writable.
 */
PrStatus pr_token_edit_distance(const char *a, const char *b, size_t *out);

/**
 * Feature edit distance under the bundled feature table.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated; `out` writable.
 */
PrStatus pr_feature_edit_distance(const char *a, const char *b, double *out);

/**
 * B-Cubed F score of a prediction against a gold sequence.
 *
 * # Safety
 * `pred` and `gold` must be NUL-terminated; `out` writable.
 */
PrStatus pr_bcubed_f(const char *pred, const char *gold, double *out);

/**
 * Normalized copy of a dataset as TSV; release with `pr_string_free`.
 *
 * # Safety
 * `ds` must be a live handle; `out` writable.
 */
PrStatus pr_dataset_to_tsv(const PrDataset *ds, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROTORECON_H */
