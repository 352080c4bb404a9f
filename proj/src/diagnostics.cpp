#include "diagnostics.hpp"

#include <algorithm>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace gad {

nlohmann::json ReachabilityReport::to_json() const {
  nlohmann::json hop_list = nlohmann::json::array();
  for (std::uint32_t h : hops) {
    if (h == kUnreachable)
      hop_list.push_back(nullptr);
    else
      hop_list.push_back(h);
  }
  return {{"R", ratios}, {"n_labeled", n_labeled}, {"n_unlabeled", n_unlabeled}, {"hops", hop_list}};
}

ReachabilityReport k_hop_reachable_ratio(const Graph& g, std::span<const NodeId> labeled,
                                         std::span<const NodeId> unlabeled, int max_k) {
  require(!labeled.empty(), ErrorCode::kInvalidArgument, "no labeled anomalies");
  require(!unlabeled.empty(), ErrorCode::kInvalidArgument,
          "no unlabeled anomalies: reachable ratio is undefined");
  require(max_k >= 1, ErrorCode::kInvalidArgument, "K must be at least 1");
  std::vector<NodeId> sorted(labeled.begin(), labeled.end());
  std::sort(sorted.begin(), sorted.end());
  for (NodeId u : unlabeled) {
    require(u < g.num_nodes(), ErrorCode::kOutOfRange, "unlabeled anomaly out of range");
    require(!std::binary_search(sorted.begin(), sorted.end(), u), ErrorCode::kInvalidArgument,
            "labeled and unlabeled anomaly sets overlap");
  }
  const auto dist = multi_source_bfs_hops(g, labeled);

  ReachabilityReport r;
  r.n_labeled = labeled.size();
  r.n_unlabeled = unlabeled.size();
  std::vector<std::size_t> within(static_cast<std::size_t>(max_k) + 1, 0);
  for (NodeId u : unlabeled) {
    r.hops.push_back(dist[u]);
    if (dist[u] != kUnreachable && dist[u] <= static_cast<std::uint32_t>(max_k)) ++within[dist[u]];
  }
  std::size_t cumulative = within[0];
  for (int k = 1; k <= max_k; ++k) {
    cumulative += within[static_cast<std::size_t>(k)];
    r.ratios.push_back(static_cast<double>(cumulative) / static_cast<double>(unlabeled.size()));
  }
  return r;
}

std::string_view to_string(DensityClass c) {
  switch (c) {
    case DensityClass::kSparse: return "sparse";
    case DensityClass::kDense: return "dense";
    case DensityClass::kOverSparse: return "over-sparse";
  }
  return "?";
}

DensityAssessment classify_density(double density, double avg_degree) {
  DensityClass c = DensityClass::kSparse;
  if (density > kDenseThreshold)
    c = DensityClass::kDense;
  else if (avg_degree <= kOverSparseDegree)
    c = DensityClass::kOverSparse;
  return {c, density, avg_degree};
}

DensityAssessment classify_density(const GraphStats& stats) {
  return classify_density(stats.density, stats.avg_degree);
}

std::vector<std::pair<std::size_t, double>> reachability_vs_labels(
    const Graph& g, std::span<const NodeId> anomalies, std::span<const std::size_t> counts,
    int trials, std::uint64_t seed) {
  require(trials >= 1, ErrorCode::kInvalidArgument, "need at least one trial");
  for (std::size_t c : counts) {
    require(c >= 1 && c < anomalies.size(), ErrorCode::kInvalidArgument,
            "label count " + std::to_string(c) + " leaves no unlabeled anomalies (have " +
                std::to_string(anomalies.size()) + ")");
  }
  std::vector<std::pair<std::size_t, double>> table;
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    const std::size_t c = counts[ci];
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
      Rng rng(seed + static_cast<std::uint64_t>(t));
      std::vector<NodeId> shuffled(anomalies.begin(), anomalies.end());
      rng.shuffle(shuffled);
      const std::span<const NodeId> all(shuffled);
      total += k_hop_reachable_ratio(g, all.first(c), all.subspan(c), 2).ratios[1];
    }
    table.emplace_back(c, total / trials);
  }
  return table;
}

}  // namespace gad
