#include "graphlevel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "data.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace gad {

GraphCollection load_collection(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, manifest.string() + ": " + e.what());
  }
  const auto base = manifest.parent_path();
  GraphCollection c;
  try {
    for (const auto& entry : j.at("graphs")) {
      Matrix x = read_features(base / entry.at("features").get<std::string>());
      const auto edges = read_edge_list(base / entry.at("edges").get<std::string>());
      std::vector<Label> labels(x.rows(), Label::kUnknown);
      c.graphs.push_back(Graph::build(edges, std::move(x), std::move(labels)));
      c.classes.push_back(entry.at("class").get<int>());
      c.labels.push_back(0);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, manifest.string() + ": " + e.what());
  }
  require(!c.graphs.empty(), ErrorCode::kInvalidArgument, "collection manifest lists no graphs");
  return c;
}

GraphCollection downsample_class(const GraphCollection& collection, int target_class,
                                 double keep_fraction, std::uint64_t seed) {
  require(keep_fraction > 0.0 && keep_fraction <= 1.0, ErrorCode::kInvalidArgument,
          "keep fraction must lie in (0, 1]");
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < collection.size(); ++i)
    if (collection.classes[i] == target_class) members.push_back(i);
  require(!members.empty(), ErrorCode::kInvalidArgument,
          "target class " + std::to_string(target_class) + " is absent");
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(members.size()) + 1e-9)));
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (std::size_t k : rng.sample_indices(members.size(), keep)) chosen.push_back(members[k]);
  std::sort(chosen.begin(), chosen.end());

  GraphCollection out;
  for (std::size_t i = 0; i < collection.size(); ++i) {
    const bool target = collection.classes[i] == target_class;
    if (target && !std::binary_search(chosen.begin(), chosen.end(), i)) continue;
    out.graphs.push_back(collection.graphs[i]);
    out.classes.push_back(collection.classes[i]);
    out.labels.push_back(target ? 1 : 0);
  }
  return out;
}

Var graph_readout(Tape& tape, Encoder& encoder, const PropagationOps& ops, const Matrix& features) {
  require(features.rows() > 0, ErrorCode::kInvalidArgument, "readout of an empty graph");
  return tape.mean_rows(encoder.encode(tape, ops, features));
}

std::vector<double> graph_readout(const Encoder& encoder, const PropagationOps& ops,
                                  const Matrix& features) {
  require(features.rows() > 0, ErrorCode::kInvalidArgument, "readout of an empty graph");
  const Matrix h = encoder.embed(ops, features);
  std::vector<double> out(h.cols(), 0.0);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) out[j] += h(i, j);
  for (double& v : out) v /= static_cast<double>(h.rows());
  return out;
}

GraphCollection generate_collection(const SyntheticCollectionSpec& spec) {
  require(spec.min_nodes >= 2 && spec.max_nodes >= spec.min_nodes, ErrorCode::kInvalidArgument,
          "bad node-count range");
  require(spec.graphs_per_class >= 1 && spec.feature_dim >= 1, ErrorCode::kInvalidArgument,
          "bad collection spec");
  Rng rng(spec.seed);
  GraphCollection c;
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t k = 0; k < spec.graphs_per_class; ++k) {
      const std::size_t n = spec.min_nodes + rng.index(spec.max_nodes - spec.min_nodes + 1);
      std::vector<Edge> edges;
      for (NodeId u = 0; u < n; ++u) {
        if (cls == 0) {
          for (NodeId v = u + 1; v < n; ++v) edges.push_back({u, v});
        } else if (u + 1 < n) {
          edges.push_back({u, u + 1});
        }
      }
      Matrix x(n, static_cast<std::size_t>(spec.feature_dim));
      for (double& v : x.values()) v = 1.0 + 0.1 * rng.normal();
      c.graphs.push_back(Graph::build(edges, std::move(x), std::vector<Label>(n, Label::kUnknown)));
      c.classes.push_back(cls);
      c.labels.push_back(0);
    }
  }
  return c;
}

GraphSplit make_graph_split(const std::vector<int>& labels, double train_ratio, std::uint64_t seed) {
  require(train_ratio > 0.0 && train_ratio < 0.5, ErrorCode::kInvalidArgument,
          "graph-level train ratio must lie in (0, 0.5)");
  Rng rng(seed);
  GraphSplit s;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) pool.push_back(i);
    rng.shuffle(pool);
    const std::size_t k = ceil_count(train_ratio, pool.size());
    require(pool.size() >= 2 * k + 1 && k >= 1, ErrorCode::kInvalidArgument,
            "class " + std::to_string(cls) + " too small for a train/val/test split");
    s.train.insert(s.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    s.val.insert(s.val.end(), pool.begin() + static_cast<std::ptrdiff_t>(k),
                 pool.begin() + static_cast<std::ptrdiff_t>(2 * k));
    s.test.insert(s.test.end(), pool.begin() + static_cast<std::ptrdiff_t>(2 * k), pool.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

namespace {

std::vector<int> pick(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

Matrix readout_matrix(const Encoder& encoder, const std::vector<PropagationOps>& ops,
                      const GraphCollection& c) {
  Matrix r(c.size(), static_cast<std::size_t>(encoder.config().hidden_dim));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto v = graph_readout(encoder, ops[i], c.graphs[i].features());
    std::copy(v.begin(), v.end(), r.row(i).begin());
  }
  return r;
}

}  // namespace

GraphLevelResult graphlevel_pipeline(const GraphCollection& collection,
                                     const GraphLevelOptions& options) {
  require(collection.size() > 0, ErrorCode::kInvalidArgument, "empty collection");
  EncoderConfig cfg = options.encoder;
  cfg.input_dim = static_cast<int>(collection.graphs[0].features().cols());
  for (const Graph& g : collection.graphs) {
    require(g.features().cols() == static_cast<std::size_t>(cfg.input_dim), ErrorCode::kInvalidArgument,
            "graphs disagree on feature dimension");
    require(g.num_nodes() > 0, ErrorCode::kInvalidArgument, "collection contains an empty graph");
  }
  std::vector<PropagationOps> ops;
  ops.reserve(collection.size());
  for (const Graph& g : collection.graphs) ops.push_back(PropagationOps::from(g));

  Rng rng(options.seed);
  const GraphSplit split = make_graph_split(collection.labels, options.train_ratio, rng.next_u64());
  const LabeledRows train{split.train, pick(collection.labels, split.train)};
  const LabeledRows val{split.val, pick(collection.labels, split.val)};
  const std::vector<int> test_labels = pick(collection.labels, split.test);
  const TrainOptions train_opts{options.epochs, options.lr, rng.next_u64(), 10};

  GraphLevelResult result;
  result.n_train = split.train.size();
  result.n_val = split.val.size();
  result.n_test = split.test.size();
  std::vector<double> test_scores;

  if (options.mode == GraphLevelMode::kPretrainFinetune) {
    std::vector<GraphView> views;
    for (std::size_t i = 0; i < collection.size(); ++i)
      views.push_back({&ops[i], &collection.graphs[i].features()});
    PretrainOptions po;
    po.objective = options.objective;
    po.epochs = options.pretrain_epochs;
    po.lr = options.lr;
    po.seed = rng.next_u64();
    po.dgi = options.dgi;
    po.mae = options.mae;
    PretrainResult pre = pretrain_run(views, cfg, po);
    result.pretrain_losses = pre.losses;
    const Matrix readouts = readout_matrix(pre.encoder, ops, collection);
    ClassifierFit fit = fit_classifier(readouts, train, val, cfg.hidden_dim, cfg.activation, train_opts);
    result.train_losses = fit.losses;
    result.val_auprc = fit.best_val_auprc;
    test_scores = score_rows(fit.classifier, readouts, split.test);
  } else {
    Encoder encoder = Encoder::init(cfg, rng.next_u64());
    Classifier classifier = Classifier::init(cfg.hidden_dim, cfg.hidden_dim, cfg.activation, rng.next_u64());
    std::vector<Parameter*> params = encoder.parameters();
    for (Parameter* p : classifier.parameters()) params.push_back(p);
    Adam adam(params, AdamOptions{.lr = options.lr});
    const auto pos = std::count(train.labels.begin(), train.labels.end(), 1);
    const double anomaly_weight =
        static_cast<double>(static_cast<std::ptrdiff_t>(train.labels.size()) - pos) / static_cast<double>(pos);
    Matrix targets(train.rows.size(), 1), weights(train.rows.size(), 1, 1.0);
    for (std::size_t i = 0; i < train.rows.size(); ++i) {
      targets(i, 0) = train.labels[i];
      if (train.labels[i] == 1) weights(i, 0) = anomaly_weight;
    }
    Encoder best_encoder = encoder;
    Classifier best_classifier = classifier;
    double best = -1.0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      adam.zero_grad();
      Tape tape;
      std::vector<Var> rows;
      for (std::size_t i : train.rows)
        rows.push_back(graph_readout(tape, encoder, ops[i], collection.graphs[i].features()));
      Var loss = tape.bce_with_logits(classifier.logits(tape, tape.concat_rows(rows)), targets, weights);
      result.train_losses.push_back(tape.value(loss)(0, 0));
      tape.backward(loss);
      adam.step();
      if ((epoch + 1) % 10 != 0 && epoch + 1 != options.epochs) continue;
      Encoder frozen = encoder;
      frozen.freeze();
      const double score = auprc(score_rows(classifier, readout_matrix(frozen, ops, collection), val.rows),
                                 val.labels);
      if (score > best) {
        best = score;
        best_encoder = frozen;
        best_classifier = classifier;
      }
    }
    result.val_auprc = best;
    best_encoder.freeze();
    test_scores = score_rows(best_classifier, readout_matrix(best_encoder, ops, collection), split.test);
  }
  result.auroc = auroc(test_scores, test_labels);
  result.auprc = auprc(test_scores, test_labels);
  return result;
}

}  // namespace gad
