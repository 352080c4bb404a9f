#include "data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "error.hpp"
#include "pretrain.hpp"
#include "rng.hpp"

namespace gad {

namespace {

std::string where(const std::filesystem::path& p, std::size_t line) {
  return p.string() + ", line " + std::to_string(line);
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  return out;
}

std::string_view strip_comment(std::string_view s) {
  if (auto pos = s.find('#'); pos != std::string_view::npos) s = s.substr(0, pos);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = strip_comment(line);
    if (body.empty()) continue;
    std::istringstream ss{std::string(body)};
    std::string a, b, extra;
    ss >> a >> b;
    require(!b.empty() && !(ss >> extra), ErrorCode::kParse,
            where(path, lineno) + ": expected two node ids");
    auto parse_id = [&](const std::string& s) {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      require(ec != std::errc::result_out_of_range && v <= UINT32_MAX - 1, ErrorCode::kOutOfRange,
              where(path, lineno) + ": node id overflow");
      require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::kParse,
              where(path, lineno) + ": bad node id '" + s + "'");
      return static_cast<NodeId>(v);
    };
    edges.push_back({parse_id(a), parse_id(b)});
  }
  return edges;
}

Matrix read_features(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const auto trimmed = strip_comment(cell);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
      require(ec == std::errc() && ptr == trimmed.data() + trimmed.size() && std::isfinite(v),
              ErrorCode::kParse, where(path, lineno) + ": bad number '" + cell + "'");
      values.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    require(count == cols, ErrorCode::kParse,
            where(path, lineno) + ": expected " + std::to_string(cols) + " columns, got " +
                std::to_string(count));
    ++rows;
  }
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.values().begin());
  return m;
}

namespace {

std::vector<Label> read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Label> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = strip_comment(line);
    if (body.empty()) continue;
    if (body == "0")
      labels.push_back(Label::kNormal);
    else if (body == "1")
      labels.push_back(Label::kAnomaly);
    else if (body == "?")
      labels.push_back(Label::kUnknown);
    else
      fail(ErrorCode::kParse, where(path, lineno) + ": label must be 0, 1 or ?, got '" +
                                  std::string(body) + "'");
  }
  return labels;
}

}  // namespace

Graph load_dataset(const std::filesystem::path& edge_path,
                   const std::filesystem::path& feature_path,
                   const std::filesystem::path& label_path) {
  auto edges = read_edge_list(edge_path);
  auto features = read_features(feature_path);
  auto labels = read_labels(label_path);
  require(features.rows() == labels.size(), ErrorCode::kInvalidArgument,
          "count mismatch: " + std::to_string(features.rows()) + " feature rows vs " +
              std::to_string(labels.size()) + " labels");
  return Graph::build(edges, std::move(features), std::move(labels));
}

void save_dataset(const Graph& g, const std::filesystem::path& edge_path,
                  const std::filesystem::path& feature_path,
                  const std::filesystem::path& label_path) {
  {
    auto out = open_out(edge_path);
    out << "# " << g.num_nodes() << " nodes, " << g.num_edges() << " undirected edges\n";
    for (const Edge& e : g.edge_list()) out << e.u << ' ' << e.v << '\n';
  }
  {
    auto out = open_out(feature_path);
    const Matrix& x = g.features();
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) {
        if (j) out << ',';
        out << format_double(x(i, j));
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(label_path);
    for (Label l : g.labels())
      out << (l == Label::kNormal ? "0" : l == Label::kAnomaly ? "1" : "?") << '\n';
  }
}

void SyntheticSpec::validate() const {
  require(num_nodes >= 2, ErrorCode::kInvalidArgument, "synthetic graph needs >= 2 nodes");
  require(num_blocks >= 1 && static_cast<std::size_t>(num_blocks) <= num_nodes,
          ErrorCode::kInvalidArgument, "block count out of range");
  require(p_intra >= 0.0 && p_intra <= 1.0 && p_inter >= 0.0 && p_inter <= 1.0,
          ErrorCode::kInvalidArgument, "edge probabilities must lie in [0, 1]");
  require(anomaly_fraction > 0.0 && anomaly_fraction < 0.5, ErrorCode::kInvalidArgument,
          "anomaly fraction must lie in (0, 0.5)");
  require(structural_share >= 0.0 && structural_share <= 1.0, ErrorCode::kInvalidArgument,
          "structural share must lie in [0, 1]");
  require(feature_dim >= 1, ErrorCode::kInvalidArgument, "feature dimension must be positive");
  require(std::isfinite(delta), ErrorCode::kInvalidArgument, "delta must be finite");
}

SyntheticSpec SyntheticSpec::sparse_benchmark(std::size_t num_nodes, double avg_degree,
                                              std::uint64_t seed) {
  SyntheticSpec s;
  s.num_nodes = num_nodes;
  s.seed = seed;
  // Split the expected degree 80/20 between intra- and inter-block edges.
  const double block = static_cast<double>(num_nodes) / s.num_blocks;
  s.p_intra = 0.8 * avg_degree / (block - 1.0);
  s.p_inter = 0.2 * avg_degree / (static_cast<double>(num_nodes) - block);
  return s;
}

Graph generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_nodes;
  const auto d = static_cast<std::size_t>(spec.feature_dim);
  const auto blocks = static_cast<std::size_t>(spec.num_blocks);
  Rng rng(spec.seed);

  std::vector<std::size_t> block_of(n);
  for (std::size_t i = 0; i < n; ++i) block_of[i] = i * blocks / n;

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = block_of[i] == block_of[j] ? spec.p_intra : spec.p_inter;
      if (p > 0.0 && rng.bernoulli(p)) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  }

  const auto n_anom = static_cast<std::size_t>(std::llround(spec.anomaly_fraction * static_cast<double>(n)));
  std::vector<std::size_t> anomalies = rng.sample_indices(n, n_anom);

  std::size_t n_struct = 0;
  if (spec.structural) {
    require(spec.clique_size >= 2, ErrorCode::kInvalidArgument, "clique size must be >= 2");
    const auto q = static_cast<std::size_t>(spec.clique_size);
    const std::size_t wanted = static_cast<std::size_t>(std::floor(
        spec.structural_share * static_cast<double>(n_anom) + 1e-9));
    require(q <= wanted, ErrorCode::kInvalidArgument,
            "infeasible clique size " + std::to_string(q) + " for " + std::to_string(wanted) +
                " structural anomalies");
    n_struct = wanted / q * q;
    for (std::size_t c = 0; c < n_struct; c += q)
      for (std::size_t a = c; a < c + q; ++a)
        for (std::size_t b = a + 1; b < c + q; ++b)
          edges.push_back({static_cast<NodeId>(anomalies[a]), static_cast<NodeId>(anomalies[b])});
  }

  Matrix centers(blocks, d);
  for (double& v : centers.values()) v = rng.normal();
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = centers(block_of[i], j) + rng.normal();

  std::vector<Label> labels(n, Label::kNormal);
  for (std::size_t k = 0; k < anomalies.size(); ++k) {
    const std::size_t u = anomalies[k];
    labels[u] = Label::kAnomaly;
    if (k >= n_struct && spec.contextual) {
      for (std::size_t j = 0; j < d; ++j) x(u, j) = centers(block_of[u], j) + spec.delta + rng.normal();
    }
  }
  return Graph::build(edges, std::move(x), std::move(labels));
}

std::vector<NodeId> SplitSpec::train_nodes() const {
  std::vector<NodeId> out = train_anomalies;
  out.insert(out.end(), train_normals.begin(), train_normals.end());
  return out;
}

std::vector<NodeId> SplitSpec::val_nodes() const {
  std::vector<NodeId> out = val_anomalies;
  out.insert(out.end(), val_normals.begin(), val_normals.end());
  return out;
}

void SplitSpec::check_disjoint() const {
  std::vector<NodeId> all;
  for (const auto* s : {&train_anomalies, &train_normals, &val_anomalies, &val_normals, &test})
    all.insert(all.end(), s->begin(), s->end());
  std::sort(all.begin(), all.end());
  require(std::adjacent_find(all.begin(), all.end()) == all.end(), ErrorCode::kState,
          "split sets overlap");
}

namespace {

std::vector<NodeId> take(std::vector<NodeId>& pool, std::size_t& cursor, std::size_t k) {
  std::vector<NodeId> out(pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                          pool.begin() + static_cast<std::ptrdiff_t>(cursor + k));
  cursor += k;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SplitSpec make_semi_split(const Graph& g, const SemiSplitOptions& o, std::uint64_t seed) {
  auto anomalies = g.nodes_with_label(Label::kAnomaly);
  auto normals = g.nodes_with_label(Label::kNormal);
  require(o.n_anom >= 1, ErrorCode::kInvalidArgument, "semi split needs at least one labeled anomaly");
  require(anomalies.size() >= o.n_anom + o.val_anom, ErrorCode::kInvalidArgument,
          "insufficient labeled anomalies: need " + std::to_string(o.n_anom + o.val_anom) +
              ", have " + std::to_string(anomalies.size()));
  require(normals.size() >= o.n_norm + o.val_norm, ErrorCode::kInvalidArgument,
          "insufficient labeled normals: need " + std::to_string(o.n_norm + o.val_norm) +
              ", have " + std::to_string(normals.size()));
  Rng rng(seed);
  rng.shuffle(anomalies);
  rng.shuffle(normals);
  SplitSpec s;
  s.seed = seed;
  std::size_t ca = 0, cn = 0;
  s.train_anomalies = take(anomalies, ca, o.n_anom);
  s.train_normals = take(normals, cn, o.n_norm);
  s.val_anomalies = take(anomalies, ca, o.val_anom);
  s.val_normals = take(normals, cn, o.val_norm);
  s.test.assign(anomalies.begin() + static_cast<std::ptrdiff_t>(ca), anomalies.end());
  s.test.insert(s.test.end(), normals.begin() + static_cast<std::ptrdiff_t>(cn), normals.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

SplitSpec make_full_split(const Graph& g, double train_ratio, std::uint64_t seed) {
  require(train_ratio > 0.0 && train_ratio < 1.0, ErrorCode::kInvalidArgument,
          "train ratio must lie in (0, 1)");
  auto anomalies = g.nodes_with_label(Label::kAnomaly);
  auto normals = g.nodes_with_label(Label::kNormal);
  require(anomalies.size() >= 3 && normals.size() >= 3, ErrorCode::kInvalidArgument,
          "each class needs at least 3 labeled members for a full split");
  Rng rng(seed);
  rng.shuffle(anomalies);
  rng.shuffle(normals);
  SplitSpec s;
  s.seed = seed;
  auto stratum = [&](std::vector<NodeId>& pool, std::vector<NodeId>& train,
                     std::vector<NodeId>& val) {
    const std::size_t n_train = std::min(ceil_count(train_ratio, pool.size()), pool.size() - 2);
    const std::size_t n_val = (pool.size() - n_train) / 2;
    std::size_t c = 0;
    train = take(pool, c, n_train);
    val = take(pool, c, n_val);
    s.test.insert(s.test.end(), pool.begin() + static_cast<std::ptrdiff_t>(c), pool.end());
  };
  stratum(anomalies, s.train_anomalies, s.val_anomalies);
  stratum(normals, s.train_normals, s.val_normals);
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace gad
