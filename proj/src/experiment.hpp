#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "data.hpp"
#include "diagnostics.hpp"
#include "encoder.hpp"
#include "graphlevel.hpp"
#include "metrics.hpp"
#include "pretrain.hpp"

namespace gad {

enum class Paradigm { kDgi, kGraphMae, kEnd2End };

Paradigm parse_paradigm(std::string_view name);
std::string_view to_string(Paradigm p);

struct DatasetSource {
  std::optional<SyntheticSpec> synthetic;
  std::filesystem::path edges, features, labels;

  Graph materialize() const;
};

struct SplitRegime {
  bool semi = true;
  SemiSplitOptions semi_options;
  double train_ratio = 0.4;
};

// Declared search space; points are enumerated kind > layers > hidden >
// activation > lr > epochs (outermost first).
struct Grid {
  std::vector<EncoderKind> kind;
  std::vector<int> layers;
  std::vector<int> hidden;
  std::vector<Activation> activation;
  std::vector<double> lr;
  std::vector<int> epochs;

  std::size_t size() const;
};

struct ExperimentConfig {
  DatasetSource dataset;
  Paradigm paradigm = Paradigm::kDgi;
  EncoderConfig encoder;  // input_dim filled from the dataset
  SplitRegime split;
  int epochs = 200;
  int pretrain_epochs = 200;
  double lr = 0.005;
  int trials = 10;
  std::uint64_t seed = 0;
  int hop_k = 3;
  int eval_every = 10;
  DgiConfig dgi;
  MaeConfig mae;
  std::optional<Grid> grid;
  // Not part of the hash: they do not change results.
  std::filesystem::path out;
  int workers = 1;

  // Missing fields take their defaults; unknown fields are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  // Canonical form with every default filled in (excludes out/workers).
  nlohmann::json to_json() const;
  // FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

std::string fnv1a_hex(std::string_view text);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double auroc = 0.0;
  double auprc = 0.0;
  double val_auroc = 0.0;
  double val_auprc = 0.0;
  std::map<HopBucket, HopRank> hop_ranks;
  ReachabilityReport reachability;
  std::vector<double> pretrain_losses;
  std::vector<double> train_losses;
  std::vector<NodeId> test_nodes;
  std::vector<double> test_scores;
  std::vector<int> test_labels;
  double wall_seconds = 0.0;  // reported on the console only
  std::string config_hash;

  // Mean normalized rank over test anomalies at hop >= 3 (finite), if any.
  std::optional<double> far_rank() const;
  nlohmann::json to_json() const;
};

struct ExperimentResult {
  std::string config_hash;
  std::vector<TrialResult> trials;
  nlohmann::json aggregate;

  bool all_ok() const;
};

// Trial t uses seed base + t; a failed trial is recorded and the aggregate
// covers the completed ones. When config.out is set, artifacts are written
// under <out>/<hash>/.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const Graph& graph);

TrialResult run_trial(const ExperimentConfig& config, const Graph& graph,
                      const PropagationOps& ops, int trial);

nlohmann::json aggregate_trials(const ExperimentConfig& config, const std::vector<TrialResult>& trials);

struct GridRow {
  std::size_t index = 0;
  EncoderKind kind = EncoderKind::kGcn;
  int layers = 2;
  int hidden = 32;
  Activation activation = Activation::kRelu;
  double lr = 0.005;
  int epochs = 200;
  double val_auprc = 0.0;
  double val_auroc = 0.0;
};

// Validation-only selection: best val AUPRC, then higher val AUROC, smaller
// hidden, fewer layers, earlier declaration.
std::size_t select_best(const std::vector<GridRow>& rows);

struct GridResult {
  std::vector<GridRow> table;
  std::size_t best = 0;
  ExperimentConfig best_config;
  ExperimentResult best_result;
  std::string csv() const;
};

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config);
GridResult grid_search(const ExperimentConfig& config);

struct SweepRow {
  double key = 0.0;
  ExperimentResult result;
};

// One run per shuffle ratio with the shared seed schedule.
std::vector<SweepRow> ablation_shuffle_ratio(const ExperimentConfig& config,
                                             const std::vector<double>& ratios);
std::string ablation_csv(const std::vector<SweepRow>& rows);

// One run per labeled-anomaly count (semi regime).
std::vector<SweepRow> sweep_labeled_anomalies(const ExperimentConfig& config,
                                              const std::vector<std::size_t>& counts);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Graph statistics, density class, and R_k for a semi split (or a
// label-count table when counts are given).
nlohmann::json diagnose(const Graph& g, const SemiSplitOptions& split, int max_k,
                        std::uint64_t seed, const std::vector<std::size_t>& counts, int trials);

// Graph-level protocol over `trials` seeds: downsample, split, pipeline.
nlohmann::json run_graph_level(const nlohmann::json& config);

// Write-then-rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

double mean_of(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

}  // namespace gad
