#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "graph.hpp"

namespace gad {

// Text formats: edges are whitespace-separated id pairs per line, features a
// CSV row per node, labels one of {0, 1, ?} per line. '#' starts a comment
// in edge and label files.
Graph load_dataset(const std::filesystem::path& edge_path,
                   const std::filesystem::path& feature_path,
                   const std::filesystem::path& label_path);
void save_dataset(const Graph& g, const std::filesystem::path& edge_path,
                  const std::filesystem::path& feature_path,
                  const std::filesystem::path& label_path);

std::vector<Edge> read_edge_list(const std::filesystem::path& path);
Matrix read_features(const std::filesystem::path& path);

struct SyntheticSpec {
  std::size_t num_nodes = 2000;
  int num_blocks = 4;
  double p_intra = 0.0065;
  double p_inter = 0.0005;
  double anomaly_fraction = 0.05;
  // Share of anomalies placed in injected cliques (rounded down to whole
  // cliques); the rest are contextual.
  double structural_share = 0.5;
  int clique_size = 8;
  bool contextual = true;
  bool structural = true;
  double delta = 1.5;
  int feature_dim = 16;
  std::uint64_t seed = 0;

  void validate() const;
  // Defaults with edge probabilities set for a target average degree.
  static SyntheticSpec sparse_benchmark(std::size_t num_nodes, double avg_degree,
                                        std::uint64_t seed);
};

// Stochastic block model background with per-block Gaussian features
// N(mu_b, I). Contextual anomalies draw from N(mu_b + delta, I); structural
// anomalies are wired into cliques. Every node is labeled.
Graph generate_synthetic(const SyntheticSpec& spec);

struct SplitSpec {
  std::vector<NodeId> train_anomalies;
  std::vector<NodeId> train_normals;
  std::vector<NodeId> val_anomalies;
  std::vector<NodeId> val_normals;
  std::vector<NodeId> test;
  std::uint64_t seed = 0;

  std::vector<NodeId> train_nodes() const;
  std::vector<NodeId> val_nodes() const;
  // Throws unless the five sets are pairwise disjoint.
  void check_disjoint() const;
};

struct SemiSplitOptions {
  std::size_t n_anom = 20;
  std::size_t n_norm = 80;
  std::size_t val_anom = 20;
  std::size_t val_norm = 80;
};

// Labeled training set of n_anom anomalies and n_norm normals, a disjoint
// validation sample of the same kind, and every other labeled node as test.
SplitSpec make_semi_split(const Graph& g, const SemiSplitOptions& options, std::uint64_t seed);

// Stratified: ceil(ratio * class size) per class to train (at most size - 2),
// the remainder split evenly between validation and test.
SplitSpec make_full_split(const Graph& g, double train_ratio, std::uint64_t seed);

}  // namespace gad
