#include "graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "error.hpp"

namespace gad {

Graph Graph::build(std::span<const Edge> edges, Matrix features, std::vector<Label> labels) {
  const std::size_t n = labels.size();
  require(features.rows() == n, ErrorCode::kInvalidArgument,
          "feature rows (" + std::to_string(features.rows()) + ") != label count (" +
              std::to_string(n) + ")");

  std::vector<std::size_t> deg(n, 0);
  for (const auto& e : edges) {
    require(e.u < n && e.v < n, ErrorCode::kOutOfRange,
            "edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                ") has an endpoint >= " + std::to_string(n));
    if (e.u == e.v) continue;
    ++deg[e.u];
    ++deg[e.v];
  }

  Graph g;
  g.row_ptr_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.row_ptr_[i + 1] = g.row_ptr_[i] + deg[i];
  std::vector<NodeId> raw(g.row_ptr_[n]);
  std::vector<std::size_t> cursor(g.row_ptr_.begin(), g.row_ptr_.end() - 1);
  for (const auto& e : edges) {
    if (e.u == e.v) continue;
    raw[cursor[e.u]++] = e.v;
    raw[cursor[e.v]++] = e.u;
  }

  // Sort and dedup each row, then compact.
  std::vector<std::size_t> new_ptr(n + 1, 0);
  std::size_t out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto first = raw.begin() + static_cast<std::ptrdiff_t>(g.row_ptr_[i]);
    auto last = raw.begin() + static_cast<std::ptrdiff_t>(g.row_ptr_[i + 1]);
    std::sort(first, last);
    last = std::unique(first, last);
    for (auto it = first; it != last; ++it) raw[out++] = *it;
    new_ptr[i + 1] = out;
  }
  raw.resize(out);
  g.row_ptr_ = std::move(new_ptr);
  g.col_idx_ = std::move(raw);
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  return g;
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes(); ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.push_back({u, v});
  return out;
}

std::vector<NodeId> Graph::nodes_with_label(Label l) const {
  std::vector<NodeId> out;
  for (NodeId u = 0; u < num_nodes(); ++u)
    if (labels_[u] == l) out.push_back(u);
  return out;
}

SparseOperator::SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr,
                               std::vector<NodeId> col_idx, std::vector<double> weights)
    : n_(n), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), weights_(std::move(weights)) {
  require(row_ptr_.size() == n_ + 1 && col_idx_.size() == weights_.size() &&
              row_ptr_.back() == col_idx_.size(),
          ErrorCode::kInvalidArgument, "inconsistent sparse operator layout");
}

double SparseOperator::weight(NodeId i, NodeId j) const {
  const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return weights_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Matrix SparseOperator::apply(const Matrix& h) const {
  require(h.rows() == n_, ErrorCode::kInvalidArgument,
          "spmm: operator has " + std::to_string(n_) + " rows, input has " +
              std::to_string(h.rows()));
  Matrix out(n_, h.cols());
  for (std::size_t i = 0; i < n_; ++i) {
    auto orow = out.row(i);
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const double w = weights_[k];
      auto hrow = h.row(col_idx_[k]);
      for (std::size_t c = 0; c < h.cols(); ++c) orow[c] += w * hrow[c];
    }
  }
  return out;
}

Matrix SparseOperator::apply_transpose(const Matrix& g) const {
  require(g.rows() == n_, ErrorCode::kInvalidArgument, "spmm adjoint: shape mismatch");
  Matrix out(n_, g.cols());
  for (std::size_t i = 0; i < n_; ++i) {
    auto grow = g.row(i);
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const double w = weights_[k];
      auto orow = out.row(col_idx_[k]);
      for (std::size_t c = 0; c < g.cols(); ++c) orow[c] += w * grow[c];
    }
  }
  return out;
}

namespace {

// Inserts the diagonal into each sorted neighbor row.
template <typename WeightFn>
SparseOperator with_self_loops(const Graph& g, WeightFn weight) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> ptr(n + 1, 0);
  std::vector<NodeId> cols;
  std::vector<double> w;
  cols.reserve(g.col_idx().size() + n);
  w.reserve(g.col_idx().size() + n);
  for (NodeId i = 0; i < n; ++i) {
    bool placed = false;
    for (NodeId j : g.neighbors(i)) {
      if (!placed && j > i) {
        cols.push_back(i);
        w.push_back(weight(i, i));
        placed = true;
      }
      cols.push_back(j);
      w.push_back(weight(i, j));
    }
    if (!placed) {
      cols.push_back(i);
      w.push_back(weight(i, i));
    }
    ptr[i + 1] = cols.size();
  }
  return SparseOperator(n, std::move(ptr), std::move(cols), std::move(w));
}

}  // namespace

SparseOperator normalize_adjacency(const Graph& g) {
  auto deg = [&](NodeId i) { return static_cast<double>(g.degree(i)) + 1.0; };
  return with_self_loops(g, [&](NodeId i, NodeId j) { return 1.0 / std::sqrt(deg(i) * deg(j)); });
}

SparseOperator sum_aggregator(const Graph& g, double self_weight) {
  return with_self_loops(g, [&](NodeId i, NodeId j) { return i == j ? self_weight : 1.0; });
}

std::vector<std::uint32_t> multi_source_bfs_hops(const Graph& g, std::span<const NodeId> sources) {
  require(!sources.empty(), ErrorCode::kInvalidArgument, "BFS needs at least one source");
  std::vector<std::uint32_t> dist(g.num_nodes(), kUnreachable);
  std::deque<NodeId> queue;
  for (NodeId s : sources) {
    require(s < g.num_nodes(), ErrorCode::kOutOfRange, "BFS source out of range");
    if (dist[s] != 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

GraphStats graph_stats(const Graph& g) {
  const std::size_t n = g.num_nodes();
  require(n >= 2, ErrorCode::kInvalidArgument, "density needs at least 2 nodes");
  const double e = static_cast<double>(g.num_edges());
  const double nn = static_cast<double>(n);
  GraphStats s;
  s.density = 2.0 * e / (nn * (nn - 1.0));
  s.avg_degree = 2.0 * e / nn;
  std::size_t count = 0;
  double total = 0.0;
  for (NodeId u = 0; u < n; ++u) {
    if (g.labels()[u] == Label::kAnomaly) {
      ++count;
      total += static_cast<double>(g.degree(u));
    }
  }
  if (count > 0) s.avg_degree_anomaly = total / static_cast<double>(count);
  return s;
}

}  // namespace gad
