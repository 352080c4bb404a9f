#include "gad/gad.h"

#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "data.hpp"
#include "diagnostics.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "metrics.hpp"

struct gad_graph {
  gad::Graph graph;
};

struct gad_experiment {
  gad::ExperimentConfig config;
};

namespace {

thread_local std::string last_error;

gad_status to_status(gad::ErrorCode code) {
  switch (code) {
    case gad::ErrorCode::kInvalidArgument: return GAD_ERR_INVALID_ARGUMENT;
    case gad::ErrorCode::kOutOfRange: return GAD_ERR_OUT_OF_RANGE;
    case gad::ErrorCode::kParse: return GAD_ERR_PARSE;
    case gad::ErrorCode::kIo: return GAD_ERR_IO;
    case gad::ErrorCode::kNumeric: return GAD_ERR_NUMERIC;
    case gad::ErrorCode::kState: return GAD_ERR_STATE;
  }
  return GAD_ERR_INTERNAL;
}

template <typename F>
gad_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const gad::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return GAD_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GAD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GAD_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  gad::require(p != nullptr, gad::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_json(const char* text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    gad::fail(gad::ErrorCode::kParse, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

extern "C" {

const char* gad_version(void) { return "1.0.0"; }

const char* gad_status_name(gad_status status) {
  switch (status) {
    case GAD_OK: return "ok";
    case GAD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GAD_ERR_OUT_OF_RANGE: return "out of range";
    case GAD_ERR_PARSE: return "parse error";
    case GAD_ERR_IO: return "i/o error";
    case GAD_ERR_NUMERIC: return "numeric error";
    case GAD_ERR_STATE: return "invalid state";
    case GAD_ERR_TRIALS_FAILED: return "trials failed";
    case GAD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gad_last_error(void) { return last_error.c_str(); }

void gad_string_free(char* s) { std::free(s); }

gad_status gad_graph_load(const char* edge_path, const char* feature_path, const char* label_path,
                          gad_graph** out) {
  return guarded([&] {
    need(edge_path, "edge_path");
    need(feature_path, "feature_path");
    need(label_path, "label_path");
    need(out, "out");
    *out = new gad_graph{gad::load_dataset(edge_path, feature_path, label_path)};
    return GAD_OK;
  });
}

gad_status gad_graph_create(size_t num_nodes, const uint32_t* edges, size_t num_edges,
                            const double* features, size_t dim, const int8_t* labels,
                            gad_graph** out) {
  return guarded([&] {
    need(out, "out");
    if (num_edges > 0) need(edges, "edges");
    if (num_nodes * dim > 0) need(features, "features");
    if (num_nodes > 0) need(labels, "labels");
    std::vector<gad::Edge> e(num_edges);
    for (size_t i = 0; i < num_edges; ++i) e[i] = {edges[2 * i], edges[2 * i + 1]};
    gad::Matrix x(num_nodes, dim);
    if (num_nodes * dim > 0) std::memcpy(x.values().data(), features, sizeof(double) * num_nodes * dim);
    std::vector<gad::Label> l(num_nodes);
    for (size_t i = 0; i < num_nodes; ++i) {
      gad::require(labels[i] >= -1 && labels[i] <= 1, gad::ErrorCode::kInvalidArgument,
                   "label values must be -1, 0 or 1");
      l[i] = static_cast<gad::Label>(labels[i]);
    }
    *out = new gad_graph{gad::Graph::build(e, std::move(x), std::move(l))};
    return GAD_OK;
  });
}

gad_status gad_graph_generate(const char* synthetic_json, gad_graph** out) {
  return guarded([&] {
    need(synthetic_json, "synthetic_json");
    need(out, "out");
    nlohmann::json cfg = {{"dataset", {{"synthetic", parse_json(synthetic_json)}}}};
    const auto config = gad::ExperimentConfig::from_json(cfg);
    *out = new gad_graph{gad::generate_synthetic(*config.dataset.synthetic)};
    return GAD_OK;
  });
}

gad_status gad_graph_save(const gad_graph* g, const char* edge_path, const char* feature_path,
                          const char* label_path) {
  return guarded([&] {
    need(g, "graph");
    need(edge_path, "edge_path");
    need(feature_path, "feature_path");
    need(label_path, "label_path");
    gad::save_dataset(g->graph, edge_path, feature_path, label_path);
    return GAD_OK;
  });
}

void gad_graph_free(gad_graph* g) { delete g; }

gad_status gad_graph_size(const gad_graph* g, size_t* num_nodes, size_t* num_edges) {
  return guarded([&] {
    need(g, "graph");
    if (num_nodes) *num_nodes = g->graph.num_nodes();
    if (num_edges) *num_edges = g->graph.num_edges();
    return GAD_OK;
  });
}

gad_status gad_graph_stats_get(const gad_graph* g, gad_graph_stats* out) {
  return guarded([&] {
    need(g, "graph");
    need(out, "out");
    const auto s = gad::graph_stats(g->graph);
    out->density = s.density;
    out->avg_degree = s.avg_degree;
    out->has_anomaly_degree = s.avg_degree_anomaly.has_value() ? 1 : 0;
    out->avg_degree_anomaly = s.avg_degree_anomaly.value_or(0.0);
    switch (gad::classify_density(s).cls) {
      case gad::DensityClass::kSparse: out->density_class = GAD_DENSITY_SPARSE; break;
      case gad::DensityClass::kDense: out->density_class = GAD_DENSITY_DENSE; break;
      case gad::DensityClass::kOverSparse: out->density_class = GAD_DENSITY_OVER_SPARSE; break;
    }
    return GAD_OK;
  });
}

gad_status gad_graph_bfs_hops(const gad_graph* g, const uint32_t* sources, size_t n_sources,
                              uint32_t* out) {
  return guarded([&] {
    need(g, "graph");
    need(sources, "sources");
    need(out, "out");
    const auto d = gad::multi_source_bfs_hops(g->graph, {sources, n_sources});
    std::copy(d.begin(), d.end(), out);
    return GAD_OK;
  });
}

gad_status gad_reachable_ratio(const gad_graph* g, const uint32_t* labeled, size_t n_labeled,
                               const uint32_t* unlabeled, size_t n_unlabeled, int max_k,
                               double* ratios_out) {
  return guarded([&] {
    need(g, "graph");
    need(ratios_out, "ratios_out");
    if (n_labeled) need(labeled, "labeled");
    if (n_unlabeled) need(unlabeled, "unlabeled");
    const auto r = gad::k_hop_reachable_ratio(g->graph, {labeled, n_labeled},
                                              {unlabeled, n_unlabeled}, max_k);
    std::copy(r.ratios.begin(), r.ratios.end(), ratios_out);
    return GAD_OK;
  });
}

gad_status gad_diagnose(const gad_graph* g, const char* options_json, char** report_json) {
  return guarded([&] {
    need(g, "graph");
    need(report_json, "report_json");
    const nlohmann::json o = options_json ? parse_json(options_json) : nlohmann::json::object();
    gad::SemiSplitOptions split;
    split.n_anom = o.value("n_anom", std::size_t{20});
    split.n_norm = 0;
    const auto counts = o.value("counts", std::vector<std::size_t>{});
    const auto report = gad::diagnose(g->graph, split, o.value("k", 3), o.value("seed", std::uint64_t{0}),
                                      counts, o.value("trials", 10));
    *report_json = dup_string(report.dump(2));
    return GAD_OK;
  });
}

gad_status gad_auroc(const double* scores, const int* labels, size_t n, double* out) {
  return guarded([&] {
    need(scores, "scores");
    need(labels, "labels");
    need(out, "out");
    *out = gad::auroc({scores, n}, {labels, n});
    return GAD_OK;
  });
}

gad_status gad_auprc(const double* scores, const int* labels, size_t n, double* out) {
  return guarded([&] {
    need(scores, "scores");
    need(labels, "labels");
    need(out, "out");
    *out = gad::auprc({scores, n}, {labels, n});
    return GAD_OK;
  });
}

gad_status gad_experiment_create(const char* config_json, gad_experiment** out) {
  return guarded([&] {
    need(config_json, "config_json");
    need(out, "out");
    *out = new gad_experiment{gad::ExperimentConfig::from_json(parse_json(config_json))};
    return GAD_OK;
  });
}

void gad_experiment_free(gad_experiment* e) { delete e; }

gad_status gad_experiment_config(const gad_experiment* e, char** canonical_json) {
  return guarded([&] {
    need(e, "experiment");
    need(canonical_json, "canonical_json");
    *canonical_json = dup_string(e->config.to_json().dump(2));
    return GAD_OK;
  });
}

gad_status gad_experiment_hash(const gad_experiment* e, char** hash) {
  return guarded([&] {
    need(e, "experiment");
    need(hash, "hash");
    *hash = dup_string(e->config.hash());
    return GAD_OK;
  });
}

gad_status gad_experiment_run(gad_experiment* e, char** aggregate_json) {
  return guarded([&] {
    need(e, "experiment");
    need(aggregate_json, "aggregate_json");
    const auto r = gad::run_experiment(e->config);
    *aggregate_json = dup_string(r.aggregate.dump(2));
    return r.all_ok() ? GAD_OK : GAD_ERR_TRIALS_FAILED;
  });
}

gad_status gad_experiment_grid(gad_experiment* e, char** best_json, char** table_csv) {
  return guarded([&] {
    need(e, "experiment");
    need(best_json, "best_json");
    const auto g = gad::grid_search(e->config);
    nlohmann::json best = {{"index", g.best},
                           {"config_hash", g.best_config.hash()},
                           {"config", g.best_config.to_json()},
                           {"aggregate", g.best_result.aggregate}};
    *best_json = dup_string(best.dump(2));
    if (table_csv) *table_csv = dup_string(g.csv());
    return g.best_result.all_ok() ? GAD_OK : GAD_ERR_TRIALS_FAILED;
  });
}

gad_status gad_experiment_ablate_shuffle(gad_experiment* e, const double* ratios, size_t n, char** csv) {
  return guarded([&] {
    need(e, "experiment");
    need(ratios, "ratios");
    need(csv, "csv");
    const auto rows = gad::ablation_shuffle_ratio(e->config, std::vector<double>(ratios, ratios + n));
    *csv = dup_string(gad::ablation_csv(rows));
    for (const auto& r : rows)
      if (!r.result.all_ok()) return GAD_ERR_TRIALS_FAILED;
    return GAD_OK;
  });
}

gad_status gad_experiment_sweep_labels(gad_experiment* e, const size_t* counts, size_t n, char** csv) {
  return guarded([&] {
    need(e, "experiment");
    need(counts, "counts");
    need(csv, "csv");
    const auto rows = gad::sweep_labeled_anomalies(e->config, std::vector<std::size_t>(counts, counts + n));
    *csv = dup_string(gad::sweep_csv(rows));
    for (const auto& r : rows)
      if (!r.result.all_ok()) return GAD_ERR_TRIALS_FAILED;
    return GAD_OK;
  });
}

gad_status gad_graph_level_run(const char* config_json, char** result_json) {
  return guarded([&] {
    need(config_json, "config_json");
    need(result_json, "result_json");
    *result_json = dup_string(gad::run_graph_level(parse_json(config_json)).dump(2));
    return GAD_OK;
  });
}

}  // extern "C"
