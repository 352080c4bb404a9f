#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "detector.hpp"
#include "encoder.hpp"
#include "pretrain.hpp"

namespace gad {

struct GraphCollection {
  std::vector<Graph> graphs;
  std::vector<int> labels;   // 0/1, assigned by downsample_class
  std::vector<int> classes;  // original class id

  std::size_t size() const { return graphs.size(); }
};

// Manifest: {"graphs": [{"edges": path, "features": path, "class": int}, ...]}
// with paths relative to the manifest's directory.
GraphCollection load_collection(const std::filesystem::path& manifest);

// Keeps floor(keep_fraction * count) (at least one) uniformly chosen graphs of
// `target_class` as anomalies (1); every other graph is kept as normal (0).
GraphCollection downsample_class(const GraphCollection& collection, int target_class,
                                 double keep_fraction, std::uint64_t seed);

// Mean of the node representations.
Var graph_readout(Tape& tape, Encoder& encoder, const PropagationOps& ops, const Matrix& features);
std::vector<double> graph_readout(const Encoder& encoder, const PropagationOps& ops,
                                  const Matrix& features);

struct SyntheticCollectionSpec {
  std::size_t graphs_per_class = 250;
  std::size_t min_nodes = 8;
  std::size_t max_nodes = 14;
  int feature_dim = 8;
  std::uint64_t seed = 0;
};

// Class 0: dense cliques; class 1: paths. Features are 1 + 0.1 * N(0, 1) in
// every entry so only structure separates the classes.
GraphCollection generate_collection(const SyntheticCollectionSpec& spec);

enum class GraphLevelMode { kPretrainFinetune, kEnd2End };

struct GraphLevelOptions {
  GraphLevelMode mode = GraphLevelMode::kPretrainFinetune;
  Objective objective = Objective::kDgi;
  EncoderConfig encoder;  // input_dim is taken from the collection
  double train_ratio = 0.05;
  int pretrain_epochs = 100;
  int epochs = 200;
  double lr = 0.005;
  DgiConfig dgi;
  MaeConfig mae;
  std::uint64_t seed = 0;
};

struct GraphSplit {
  std::vector<std::size_t> train, val, test;
};

// Per class: ceil(ratio * count) to train, as many again to validation, the
// rest to test. Every stratum must end up non-empty.
GraphSplit make_graph_split(const std::vector<int>& labels, double train_ratio, std::uint64_t seed);

struct GraphLevelResult {
  double auroc = 0.0;
  double auprc = 0.0;
  double val_auprc = 0.0;
  std::vector<double> pretrain_losses;
  std::vector<double> train_losses;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
};

GraphLevelResult graphlevel_pipeline(const GraphCollection& collection,
                                     const GraphLevelOptions& options);

}  // namespace gad
