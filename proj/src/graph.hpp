#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "matrix.hpp"

namespace gad {

using NodeId = std::uint32_t;

enum class Label : std::int8_t { kNormal = 0, kAnomaly = 1, kUnknown = -1 };

struct Edge {
  NodeId u;
  NodeId v;
  bool operator==(const Edge&) const = default;
};

// Undirected attributed graph in CSR form. Neighbor lists are sorted,
// duplicate-free and never contain the node itself. Immutable once built.
class Graph {
 public:
  Graph() = default;

  // Symmetrizes, drops self-loops and duplicates. Throws on endpoints
  // >= features.rows() or a label vector of the wrong length.
  static Graph build(std::span<const Edge> edges, Matrix features, std::vector<Label> labels);

  std::size_t num_nodes() const { return labels_.size(); }
  // Undirected pairs.
  std::size_t num_edges() const { return col_idx_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {col_idx_.data() + row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]};
  }
  std::size_t degree(NodeId u) const { return row_ptr_[u + 1] - row_ptr_[u]; }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<NodeId>& col_idx() const { return col_idx_; }
  const Matrix& features() const { return features_; }
  const std::vector<Label>& labels() const { return labels_; }

  // Each undirected edge once, as (u, v) with u < v, in CSR order.
  std::vector<Edge> edge_list() const;
  std::vector<NodeId> nodes_with_label(Label l) const;

  bool operator==(const Graph&) const = default;

 private:
  std::vector<std::size_t> row_ptr_{0};
  std::vector<NodeId> col_idx_;
  Matrix features_;
  std::vector<Label> labels_;
};

// Weighted sparse square operator in CSR form (diagonal included when
// present). Used for both the normalized GCN propagation matrix and the GIN
// sum aggregator.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx,
                 std::vector<double> weights);

  std::size_t size() const { return n_; }
  std::size_t nnz() const { return col_idx_.size(); }
  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<NodeId>& col_idx() const { return col_idx_; }
  const std::vector<double>& weights() const { return weights_; }

  // Entry (i, j) or 0 when absent.
  double weight(NodeId i, NodeId j) const;

  // out[i] = sum_j w(i, j) * h[j]
  Matrix apply(const Matrix& h) const;
  // out[j] += w(i, j) * g[i]; the adjoint of apply().
  Matrix apply_transpose(const Matrix& g) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<NodeId> col_idx_;
  std::vector<double> weights_;
};

// D~^{-1/2} (A + I) D~^{-1/2} with D~ = D + I.
SparseOperator normalize_adjacency(const Graph& g);

// self_weight * I + A with unit edge weights (GIN aggregation, self_weight = 1 + eps).
SparseOperator sum_aggregator(const Graph& g, double self_weight);

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

// Hop distance from every node to its nearest source; kUnreachable when no
// source shares its component.
std::vector<std::uint32_t> multi_source_bfs_hops(const Graph& g, std::span<const NodeId> sources);

struct GraphStats {
  double density = 0.0;
  double avg_degree = 0.0;
  std::optional<double> avg_degree_anomaly;
};

// Requires at least two nodes (density is undefined otherwise).
GraphStats graph_stats(const Graph& g);

}  // namespace gad
