#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graph.hpp"

namespace gad {

struct ReachabilityReport {
  std::vector<double> ratios;  // ratios[k-1] = R_k
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
  std::vector<std::uint32_t> hops;  // per unlabeled anomaly, input order

  // {R: [...], n_labeled, n_unlabeled, hops: [...]}; unreachable hops are null.
  nlohmann::json to_json() const;
};

// Fraction of unlabeled anomalies within k hops of any labeled anomaly, for
// k = 1..max_k. Both sets must be non-empty and disjoint.
ReachabilityReport k_hop_reachable_ratio(const Graph& g, std::span<const NodeId> labeled,
                                         std::span<const NodeId> unlabeled, int max_k);

enum class DensityClass { kSparse, kDense, kOverSparse };

std::string_view to_string(DensityClass c);

struct DensityAssessment {
  DensityClass cls;
  double density;
  double avg_degree;
};

inline constexpr double kDenseThreshold = 0.01;
inline constexpr double kOverSparseDegree = 2.0;

// Dense iff density > 1%; otherwise OverSparse iff avg degree <= 2; else Sparse.
DensityAssessment classify_density(double density, double avg_degree);
DensityAssessment classify_density(const GraphStats& stats);

// For each count c: mean over trials of R_2 when c anomalies are labeled
// uniformly at random and the rest are unlabeled.
std::vector<std::pair<std::size_t, double>> reachability_vs_labels(
    const Graph& g, std::span<const NodeId> anomalies, std::span<const std::size_t> counts,
    int trials, std::uint64_t seed);

}  // namespace gad
