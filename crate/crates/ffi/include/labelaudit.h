#ifndef LABELAUDIT_H
#define LABELAUDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum LaStatus {
  LA_STATUS_OK = 0,
  // A required pointer argument was null.
  LA_STATUS_NULL_ARGUMENT = 1,
  // Bad parameter value, including non-UTF-8 strings.
  LA_STATUS_INVALID_ARGUMENT = 2,
  // Unreadable or malformed input data.
  LA_STATUS_DATA_ERROR = 3,
  // A conformal guarantee cannot be met at this sample size.
  LA_STATUS_UNATTAINABLE = 4,
  // Internal inconsistency or a caught panic.
  LA_STATUS_INTERNAL = 5,
} LaStatus;

// Which conformal guarantee to select a threshold for.
typedef enum LaGuarantee {
  LA_GUARANTEE_FALSE_POSITIVE = 0,
  LA_GUARANTEE_FALSE_NEGATIVE = 1,
} LaGuarantee;

// A loaded graph dataset.
typedef struct LaGraph LaGraph;

// A ranked audit report.
typedef struct LaReport LaReport;

// Base-classifier probabilities, one row per node.
typedef struct LaSoftmax LaSoftmax;

// One ranked node of a report.
typedef struct LaRecord {
  size_t node_id;
  size_t given_label;
  double score;
  bool flagged;
  // Suggested label, or -1 when the node is not flagged.
  int64_t suggested_label;
} LaRecord;

// A selected conformal threshold.
typedef struct LaConformal {
  size_t n_total;
  // 1-based order-statistic index.
  size_t b_index;
  double lambda;
} LaConformal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *la_last_error(void);

// Library version as a static string.
const char *la_version(void);

// Loads a graph. `features` may be null; `num_classes == 0` infers the
// class count from the labels.
//
// # Safety
// String arguments must be null or NUL-terminated; `out` must be writable.
enum LaStatus la_graph_load(const char *edges,
                            const char *labels,
                            const char *splits,
                            const char *features,
                            size_t num_classes,
                            struct LaGraph **out);

// # Safety
// `g` must be null or a live handle from [`la_graph_load`].
size_t la_graph_num_nodes(const struct LaGraph *g);

// # Safety
// `g` must be null or a live handle from [`la_graph_load`].
size_t la_graph_num_classes(const struct LaGraph *g);

// # Safety
// `g` must be null or a live handle from [`la_graph_load`].
size_t la_graph_num_edges(const struct LaGraph *g);

// # Safety
// `g` must be null or a handle from [`la_graph_load`] not yet freed.
void la_graph_free(struct LaGraph *g);

// Reads probabilities shaped to match `g`.
//
// # Safety
// `path` must be NUL-terminated, `g` a live handle, `out` writable.
enum LaStatus la_softmax_load(const char *path, const struct LaGraph *g, struct LaSoftmax **out);

// Trains the built-in classifier on the graph's training split.
//
// # Safety
// `g` must be a live handle with features; `out` writable.
enum LaStatus la_softmax_train(const struct LaGraph *g, uint64_t seed, struct LaSoftmax **out);

// Probability of `class` at `node`, or NaN when out of range.
//
// # Safety
// `p` must be null or a live softmax handle.
double la_softmax_get(const struct LaSoftmax *p, size_t node, size_t class_);

// # Safety
// `p` must be null or a softmax handle not yet freed.
void la_softmax_free(struct LaSoftmax *p);

// Runs a full audit. `threshold` uses the CLI syntax (`fixed:0.97`,
// `bayes:0.05`, `conformal-fp:0.1,0.05`, `conformal-fn:0.1,0.05`); null
// selects the default.
//
// # Safety
// `g` and `p` must be live handles, `threshold` null or NUL-terminated,
// `out` writable.
enum LaStatus la_audit_run(const struct LaGraph *g,
                           const struct LaSoftmax *p,
                           size_t k_hops,
                           const char *threshold,
                           uint64_t seed,
                           struct LaReport **out);

// Reads a report written by the CLI or [`la_report_write_json`].
//
// # Safety
// `path` must be NUL-terminated; `out` writable.
enum LaStatus la_report_load(const char *path, struct LaReport **out);

// Number of ranked records.
//
// # Safety
// `r` must be null or a live report handle.
size_t la_report_len(const struct LaReport *r);

// # Safety
// `r` must be null or a live report handle.
size_t la_report_num_flagged(const struct LaReport *r);

// Cutoff the report's threshold policy resolved to, or NaN for null.
//
// # Safety
// `r` must be null or a live report handle.
double la_report_cutoff(const struct LaReport *r);

// Record at rank `index` (0 = highest score).
//
// # Safety
// `r` must be a live report handle and `out` writable.
enum LaStatus la_report_record(const struct LaReport *r, size_t index, struct LaRecord *out);

// Writes the report as JSON.
//
// # Safety
// `r` must be a live report handle and `path` NUL-terminated.
enum LaStatus la_report_write_json(const struct LaReport *r, const char *path);

// # Safety
// `r` must be null or a report handle not yet freed.
void la_report_free(struct LaReport *r);

// Selects a conformal threshold over `n` scores where a fraction `p` is
// expected to be mislabelled.
//
// # Safety
// `scores` must point to `n` readable doubles; `out` must be writable.
enum LaStatus la_conformal_threshold(const double *scores,
                                     size_t n,
                                     double p,
                                     double alpha,
                                     enum LaGuarantee mode,
                                     struct LaConformal *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LABELAUDIT_H */
