#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "error.hpp"
#include "graphlevel.hpp"
#include "oracles.hpp"

using namespace gad;
namespace fs = std::filesystem;

namespace {

GraphCollection classes(std::size_t zeros, std::size_t ones) {
  GraphCollection c;
  for (std::size_t i = 0; i < zeros + ones; ++i) {
    c.graphs.push_back(Graph::build({}, Matrix(1, 1, static_cast<double>(i)), {Label::kUnknown}));
    c.classes.push_back(i < zeros ? 0 : 1);
  }
  c.labels.assign(c.graphs.size(), 0);
  return c;
}

EncoderConfig enc(int in) {
  EncoderConfig c;
  c.kind = EncoderKind::kGin;
  c.hidden_dim = 8;
  c.input_dim = in;
  c.activation = Activation::kTanh;
  return c;
}

}  // namespace

TEST_CASE("downsampling keeps ten percent of the target class") {
  const GraphCollection dd = classes(691, 487);
  const GraphCollection s = downsample_class(dd, 0, 0.10, 1);
  CHECK(std::count(s.labels.begin(), s.labels.end(), 1) == 69);
  CHECK(s.size() == 69 + 487);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK((s.labels[i] == 1) == (s.classes[i] == 0));
  }
  // Non-target graphs survive unchanged and in order.
  std::vector<Graph> kept_ones;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.classes[i] == 1) kept_ones.push_back(s.graphs[i]);
  CHECK(kept_ones == std::vector<Graph>(dd.graphs.begin() + 691, dd.graphs.end()));
  // Retained anomalies are distinct members of class 0.
  std::vector<double> ids;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.labels[i] == 1) ids.push_back(s.graphs[i].features()(0, 0));
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  CHECK(ids.back() < 691.0);

  const GraphCollection again = downsample_class(dd, 0, 0.10, 1);
  CHECK(again.graphs == s.graphs);
  const GraphCollection all = downsample_class(dd, 0, 1.0, 1);
  CHECK(std::count(all.labels.begin(), all.labels.end(), 1) == 691);
  CHECK_THROWS_AS(downsample_class(dd, 7, 0.1, 1), Error);
}

TEST_CASE("graph split arithmetic") {
  std::vector<int> labels(500, 0);
  for (std::size_t i = 0; i < 50; ++i) labels[i * 10] = 1;
  const GraphSplit s = make_graph_split(labels, 0.05, 3);
  auto anomalies = [&](const std::vector<std::size_t>& idx) {
    return std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return labels[i] == 1; });
  };
  CHECK(anomalies(s.train) == 3);
  CHECK(s.train.size() - anomalies(s.train) == 23);
  CHECK(anomalies(s.val) == 3);
  CHECK(s.val.size() == 26);
  CHECK(s.test.size() == 500 - 52);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  CHECK(all.size() == 500);
  CHECK_THROWS_AS(make_graph_split(std::vector<int>{1, 0, 0, 0}, 0.05, 1), Error);
}

TEST_CASE("readout is the mean embedding and permutation invariant") {
  Rng rng(5);
  const Graph g = oracle::random_graph(9, 0.35, 3, rng);
  const auto ops = PropagationOps::from(g);
  const Encoder e = Encoder::init(enc(3), 4);
  const auto r = graph_readout(e, ops, g.features());
  const Matrix h = e.embed(ops, g.features());
  for (std::size_t j = 0; j < 8; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < 9; ++i) m += h(i, j);
    CHECK(std::abs(r[j] - m / 9.0) <= 1e-12);
  }

  std::vector<std::size_t> perm(9);
  for (std::size_t i = 0; i < 9; ++i) perm[i] = 8 - i;
  std::vector<Edge> pe;
  for (const auto& ed : g.edge_list()) pe.push_back({static_cast<NodeId>(perm[ed.u]), static_cast<NodeId>(perm[ed.v])});
  Matrix px(9, 3);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 3; ++j) px(perm[i], j) = g.features()(i, j);
  const Graph p = Graph::build(pe, px, g.labels());
  const auto rp = graph_readout(e, PropagationOps::from(p), p.features());
  for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(r[j] - rp[j]) <= 1e-10);

  const Graph one = Graph::build({}, Matrix(1, 3, 0.5), {Label::kUnknown});
  const auto ops1 = PropagationOps::from(one);
  const auto r1 = graph_readout(e, ops1, one.features());
  const Matrix h1 = e.embed(ops1, one.features());
  for (std::size_t j = 0; j < 8; ++j) CHECK(r1[j] == h1(0, j));

  Encoder z = Encoder::init(enc(3), 4);
  for (Parameter* q : z.parameters()) q->value.fill(0.0);
  z.parameters().back()->value = Matrix(1, 8, 0.2);
  for (double v : graph_readout(z, ops, g.features())) CHECK(v == std::tanh(0.2));

  const Graph empty = Graph::build({}, Matrix(0, 3), {});
  CHECK_THROWS_AS(graph_readout(e, PropagationOps::from(empty), empty.features()), Error);
}

TEST_CASE("graph-level pipeline separates cliques from paths") {
  SyntheticCollectionSpec spec;
  spec.graphs_per_class = 120;
  spec.seed = 2;
  const GraphCollection base = generate_collection(spec);
  const GraphCollection c = downsample_class(base, 0, 0.25, 2);
  for (GraphLevelMode mode : {GraphLevelMode::kPretrainFinetune, GraphLevelMode::kEnd2End}) {
    GraphLevelOptions o;
    o.mode = mode;
    o.encoder = enc(spec.feature_dim);
    o.train_ratio = 0.1;
    o.pretrain_epochs = 30;
    o.epochs = 80;
    o.seed = 1;
    const auto r = graphlevel_pipeline(c, o);
    CHECK(r.auroc > 0.9);
    const auto again = graphlevel_pipeline(c, o);
    CHECK(again.auroc == r.auroc);
    CHECK(again.auprc == r.auprc);
  }
}

TEST_CASE("graph-level pretraining ignores labels") {
  SyntheticCollectionSpec spec;
  spec.graphs_per_class = 20;
  const GraphCollection base = generate_collection(spec);
  std::vector<PropagationOps> ops;
  for (const auto& g : base.graphs) ops.push_back(PropagationOps::from(g));
  std::vector<GraphView> views;
  for (std::size_t i = 0; i < base.size(); ++i) views.push_back({&ops[i], &base.graphs[i].features()});
  PretrainOptions p;
  p.epochs = 5;
  const auto a = pretrain_run(views, enc(spec.feature_dim), p);
  GraphCollection flipped = base;
  for (auto& l : flipped.labels) l = 1 - l;
  std::vector<GraphView> views2;
  for (std::size_t i = 0; i < flipped.size(); ++i) views2.push_back({&ops[i], &flipped.graphs[i].features()});
  const auto b = pretrain_run(views2, enc(spec.feature_dim), p);
  CHECK(a.encoder == b.encoder);
}

TEST_CASE("collections load from a manifest") {
  const fs::path dir = fs::temp_directory_path() / "gad_manifest_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "g");
  std::ofstream(dir / "g" / "a.edges") << "0 1\n1 2\n";
  std::ofstream(dir / "g" / "a.csv") << "1\n2\n3\n";
  std::ofstream(dir / "g" / "b.edges") << "0 1\n";
  std::ofstream(dir / "g" / "b.csv") << "4\n5\n";
  std::ofstream(dir / "m.json") << R"({"graphs": [{"edges": "g/a.edges", "features": "g/a.csv", "class": 0},
                                                {"edges": "g/b.edges", "features": "g/b.csv", "class": 3}]})";
  const GraphCollection c = load_collection(dir / "m.json");
  CHECK(c.size() == 2);
  CHECK(c.classes == std::vector<int>{0, 3});
  CHECK(c.graphs[0].num_edges() == 2);
  CHECK(c.graphs[1].features()(1, 0) == 5.0);
  std::ofstream(dir / "bad.json") << R"({"graphs": []})";
  CHECK_THROWS_AS(load_collection(dir / "bad.json"), Error);
  fs::remove_all(dir);
}
