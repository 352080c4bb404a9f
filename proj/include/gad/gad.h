/*
 * gad.h - C interface to the graph anomaly detection toolkit.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns a gad_status; on
 * failure gad_last_error() describes the problem (per thread). Strings
 * returned through char** out-parameters are heap-allocated by the library
 * and must be released with gad_string_free().
 */
#ifndef GAD_GAD_H
#define GAD_GAD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(GAD_BUILDING_LIBRARY)
#    define GAD_API __declspec(dllexport)
#  else
#    define GAD_API __declspec(dllimport)
#  endif
#else
#  define GAD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gad_status {
  GAD_OK = 0,
  GAD_ERR_INVALID_ARGUMENT = 1,
  GAD_ERR_OUT_OF_RANGE = 2,
  GAD_ERR_PARSE = 3,
  GAD_ERR_IO = 4,
  GAD_ERR_NUMERIC = 5,
  GAD_ERR_STATE = 6,
  /* The run finished but at least one trial failed; outputs are still set. */
  GAD_ERR_TRIALS_FAILED = 7,
  GAD_ERR_INTERNAL = 99
} gad_status;

typedef enum gad_density_class {
  GAD_DENSITY_SPARSE = 0,
  GAD_DENSITY_DENSE = 1,
  GAD_DENSITY_OVER_SPARSE = 2
} gad_density_class;

/* Node labels: 0 normal, 1 anomaly, -1 unknown. */
#define GAD_LABEL_NORMAL 0
#define GAD_LABEL_ANOMALY 1
#define GAD_LABEL_UNKNOWN (-1)

/* Hop distance reported for nodes that no source can reach. */
#define GAD_UNREACHABLE UINT32_MAX

typedef struct gad_graph gad_graph;
typedef struct gad_experiment gad_experiment;

typedef struct gad_graph_stats {
  double density;
  double avg_degree;
  double avg_degree_anomaly; /* valid only when has_anomaly_degree != 0 */
  int has_anomaly_degree;
  gad_density_class density_class;
} gad_graph_stats;

GAD_API const char* gad_version(void);
GAD_API const char* gad_status_name(gad_status status);
GAD_API const char* gad_last_error(void);
GAD_API void gad_string_free(char* s);

/* ---- graphs ---------------------------------------------------------- */

GAD_API gad_status gad_graph_load(const char* edge_path, const char* feature_path,
                                  const char* label_path, gad_graph** out);
/* edges holds num_edges (u, v) pairs; features is num_nodes x dim row-major. */
GAD_API gad_status gad_graph_create(size_t num_nodes, const uint32_t* edges, size_t num_edges,
                                    const double* features, size_t dim, const int8_t* labels,
                                    gad_graph** out);
/* JSON object with the synthetic generator fields (all optional). */
GAD_API gad_status gad_graph_generate(const char* synthetic_json, gad_graph** out);
GAD_API gad_status gad_graph_save(const gad_graph* g, const char* edge_path,
                                  const char* feature_path, const char* label_path);
GAD_API void gad_graph_free(gad_graph* g);

GAD_API gad_status gad_graph_size(const gad_graph* g, size_t* num_nodes, size_t* num_edges);
GAD_API gad_status gad_graph_stats_get(const gad_graph* g, gad_graph_stats* out);
/* out must hold num_nodes entries. */
GAD_API gad_status gad_graph_bfs_hops(const gad_graph* g, const uint32_t* sources, size_t n_sources,
                                      uint32_t* out);

/* ---- diagnostics and metrics ----------------------------------------- */

/* ratios_out must hold max_k entries (R_1 .. R_K). */
GAD_API gad_status gad_reachable_ratio(const gad_graph* g, const uint32_t* labeled, size_t n_labeled,
                                       const uint32_t* unlabeled, size_t n_unlabeled, int max_k,
                                       double* ratios_out);
/* options: {"n_anom", "k", "seed", "counts": [...], "trials"}; report as JSON. */
GAD_API gad_status gad_diagnose(const gad_graph* g, const char* options_json, char** report_json);

GAD_API gad_status gad_auroc(const double* scores, const int* labels, size_t n, double* out);
GAD_API gad_status gad_auprc(const double* scores, const int* labels, size_t n, double* out);

/* ---- experiments ----------------------------------------------------- */

GAD_API gad_status gad_experiment_create(const char* config_json, gad_experiment** out);
GAD_API void gad_experiment_free(gad_experiment* e);
GAD_API gad_status gad_experiment_config(const gad_experiment* e, char** canonical_json);
GAD_API gad_status gad_experiment_hash(const gad_experiment* e, char** hash);

GAD_API gad_status gad_experiment_run(gad_experiment* e, char** aggregate_json);
/* best_json describes the selected configuration and its test metrics. */
GAD_API gad_status gad_experiment_grid(gad_experiment* e, char** best_json, char** table_csv);
GAD_API gad_status gad_experiment_ablate_shuffle(gad_experiment* e, const double* ratios, size_t n,
                                                 char** csv);
GAD_API gad_status gad_experiment_sweep_labels(gad_experiment* e, const size_t* counts, size_t n,
                                               char** csv);

GAD_API gad_status gad_graph_level_run(const char* config_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* GAD_GAD_H */
