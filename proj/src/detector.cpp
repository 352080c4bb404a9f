#include "detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "error.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace gad {

double sigmoid(double z) {
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  // Saturated logits round to 0 or 1 in double; keep scores strictly inside.
  return std::clamp(s, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

Classifier Classifier::init(int input_dim, int hidden_dim, Activation activation,
                            std::uint64_t seed) {
  require(input_dim >= 1 && hidden_dim >= 1, ErrorCode::kInvalidArgument,
          "classifier dimensions must be positive");
  Rng rng(seed);
  const auto in = static_cast<std::size_t>(input_dim);
  const auto h = static_cast<std::size_t>(hidden_dim);
  Classifier c;
  c.w1_ = Parameter(glorot_uniform(in, h, rng));
  c.b1_ = Parameter(Matrix(1, h));
  c.w2_ = Parameter(glorot_uniform(h, 1, rng));
  c.b2_ = Parameter(Matrix(1, 1));
  c.slope_ = Parameter(Matrix(1, 1, kPreluInit));
  c.activation_ = activation;
  return c;
}

Var Classifier::logits(Tape& tape, Var embeddings) {
  Var z = tape.add_bias(tape.matmul(embeddings, tape.parameter(w1_)), tape.parameter(b1_));
  Var slope = activation_ == Activation::kPrelu ? tape.parameter(slope_) : Var{};
  z = apply_activation(tape, z, activation_, slope);
  return tape.add_bias(tape.matmul(z, tape.parameter(w2_)), tape.parameter(b2_));
}

Matrix Classifier::logits(const Matrix& embeddings) const {
  Classifier copy = *this;
  Tape tape;
  return tape.value(copy.logits(tape, tape.constant(embeddings)));
}

std::vector<Parameter*> Classifier::parameters() {
  std::vector<Parameter*> p{&w1_, &b1_, &w2_, &b2_};
  if (activation_ == Activation::kPrelu) p.push_back(&slope_);
  return p;
}

std::vector<const Parameter*> Classifier::parameters() const {
  std::vector<const Parameter*> p{&w1_, &b1_, &w2_, &b2_};
  if (activation_ == Activation::kPrelu) p.push_back(&slope_);
  return p;
}

bool Classifier::operator==(const Classifier& o) const {
  if (activation_ != o.activation_) return false;
  const auto a = parameters();
  const auto b = o.parameters();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i]->value == b[i]->value)) return false;
  return true;
}

namespace {

struct WeightedTargets {
  Matrix targets;
  Matrix weights;
};

WeightedTargets class_weighted(const std::vector<int>& labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  require(pos > 0, ErrorCode::kInvalidArgument, "no labeled anomalies in the training split");
  const std::size_t neg = labels.size() - pos;
  const double anomaly_weight = neg == 0 ? 1.0 : static_cast<double>(neg) / static_cast<double>(pos);
  WeightedTargets w{Matrix(labels.size(), 1), Matrix(labels.size(), 1, 1.0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    w.targets(i, 0) = labels[i];
    if (labels[i] == 1) w.weights(i, 0) = anomaly_weight;
  }
  return w;
}

bool has_both_classes(const std::vector<int>& labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  return pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size());
}

void check_options(const TrainOptions& o) {
  require(o.epochs >= 1, ErrorCode::kInvalidArgument, "training needs epochs >= 1");
  require(o.eval_every >= 1, ErrorCode::kInvalidArgument, "eval_every must be >= 1");
}

bool is_check_epoch(int epoch, const TrainOptions& o) {
  return (epoch + 1) % o.eval_every == 0 || epoch + 1 == o.epochs;
}

}  // namespace

LabeledRows labeled_rows(const Graph& g, std::span<const NodeId> nodes) {
  LabeledRows r;
  for (NodeId u : nodes) {
    require(u < g.num_nodes(), ErrorCode::kOutOfRange, "node out of range");
    const Label l = g.labels()[u];
    require(l != Label::kUnknown, ErrorCode::kInvalidArgument,
            "node " + std::to_string(u) + " has no known label");
    r.rows.push_back(u);
    r.labels.push_back(l == Label::kAnomaly ? 1 : 0);
  }
  return r;
}

std::vector<double> score_rows(const Classifier& classifier, const Matrix& embeddings,
                               std::span<const std::size_t> rows) {
  if (rows.empty()) return {};
  const Matrix z = classifier.logits(embeddings.select_rows(rows));
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = sigmoid(z(i, 0));
  return out;
}

ClassifierFit fit_classifier(const Matrix& embeddings, const LabeledRows& train,
                             const LabeledRows& val, int hidden_dim, Activation activation,
                             const TrainOptions& options) {
  check_options(options);
  const WeightedTargets wt = class_weighted(train.labels);
  const Matrix x_train = embeddings.select_rows(train.rows);
  const bool can_select = has_both_classes(val.labels);

  ClassifierFit fit{Classifier::init(static_cast<int>(embeddings.cols()), hidden_dim, activation,
                                     options.seed),
                    {}, {}, 0, -1.0};
  Classifier model = fit.classifier;
  Adam adam(model.parameters(), AdamOptions{.lr = options.lr});
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    adam.zero_grad();
    Tape tape;
    Var loss = tape.bce_with_logits(model.logits(tape, tape.constant(x_train)), wt.targets, wt.weights);
    fit.losses.push_back(tape.value(loss)(0, 0));
    tape.backward(loss);
    adam.step();
    if (!is_check_epoch(epoch, options)) continue;
    // Without a usable validation set the last state is kept.
    const double score = can_select ? auprc(score_rows(model, embeddings, val.rows), val.labels) : 0.0;
    fit.checks.push_back({epoch + 1, score});
    if (score > fit.best_val_auprc || !can_select) {
      fit.best_val_auprc = score;
      fit.best_epoch = epoch + 1;
      fit.classifier = model;
    }
  }
  return fit;
}

FinetuneResult finetune_run(const Encoder& frozen, const Graph& g, const PropagationOps& ops,
                            const SplitSpec& split, const TrainOptions& options) {
  require(frozen.frozen(), ErrorCode::kState, "fine-tuning needs a frozen encoder");
  const Matrix h = frozen.embed(ops, g.features());
  const auto train_nodes = split.train_nodes();
  const auto val_nodes = split.val_nodes();
  const LabeledRows train = labeled_rows(g, train_nodes);
  const LabeledRows val = labeled_rows(g, val_nodes);
  FinetuneResult r;
  r.fit = fit_classifier(h, train, val, frozen.config().hidden_dim, frozen.config().activation,
                         options);
  r.val_scores = score_rows(r.fit.classifier, h, val.rows);
  return r;
}

Var supervised_loss(Tape& tape, Encoder& encoder, Classifier& classifier,
                    const PropagationOps& ops, const Matrix& features, const LabeledRows& train) {
  const WeightedTargets wt = class_weighted(train.labels);
  Var h = encoder.encode(tape, ops, features);
  Var z = classifier.logits(tape, tape.gather_rows(h, train.rows));
  return tape.bce_with_logits(z, wt.targets, wt.weights);
}

End2EndResult end2end_run(const EncoderConfig& config, const Graph& g, const PropagationOps& ops,
                          const SplitSpec& split, const TrainOptions& options) {
  check_options(options);
  const auto train_nodes = split.train_nodes();
  const auto val_nodes = split.val_nodes();
  const LabeledRows train = labeled_rows(g, train_nodes);
  const LabeledRows val = labeled_rows(g, val_nodes);
  class_weighted(train.labels);
  const bool can_select = has_both_classes(val.labels);

  Rng rng(options.seed);
  Encoder encoder = Encoder::init(config, rng.next_u64());
  Classifier classifier = Classifier::init(config.hidden_dim, config.hidden_dim, config.activation,
                                           rng.next_u64());
  std::vector<Parameter*> params = encoder.parameters();
  for (Parameter* p : classifier.parameters()) params.push_back(p);
  Adam adam(params, AdamOptions{.lr = options.lr});

  End2EndResult r{encoder, classifier, {}, {}, 0, -1.0};
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    adam.zero_grad();
    Tape tape;
    Var loss = supervised_loss(tape, encoder, classifier, ops, g.features(), train);
    r.losses.push_back(tape.value(loss)(0, 0));
    tape.backward(loss);
    adam.step();
    if (!is_check_epoch(epoch, options)) continue;
    const double score =
        can_select ? auprc(score_rows(classifier, encoder.embed(ops, g.features()), val.rows), val.labels)
                   : 0.0;
    r.checks.push_back({epoch + 1, score});
    if (score > r.best_val_auprc || !can_select) {
      r.best_val_auprc = score;
      r.best_epoch = epoch + 1;
      r.encoder = encoder;
      r.classifier = classifier;
    }
  }
  r.encoder.freeze();
  return r;
}

std::vector<double> score_nodes(const Encoder& encoder, const Classifier& classifier,
                                const PropagationOps& ops, const Matrix& features,
                                std::span<const NodeId> subset) {
  for (NodeId u : subset)
    require(u < ops.num_nodes(), ErrorCode::kOutOfRange, "scored node out of range");
  if (subset.empty()) return {};
  const Matrix h = encoder.embed(ops, features);
  std::vector<std::size_t> rows(subset.begin(), subset.end());
  return score_rows(classifier, h, rows);
}

}  // namespace gad
