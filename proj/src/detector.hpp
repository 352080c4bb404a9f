#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "autodiff.hpp"
#include "data.hpp"
#include "encoder.hpp"

namespace gad {

// Two-layer perceptron hidden -> hidden -> 1 producing an anomaly logit.
class Classifier {
 public:
  static Classifier init(int input_dim, int hidden_dim, Activation activation, std::uint64_t seed);

  Var logits(Tape& tape, Var embeddings);
  Matrix logits(const Matrix& embeddings) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Activation activation() const { return activation_; }

  bool operator==(const Classifier& o) const;

 private:
  Parameter w1_, b1_, w2_, b2_, slope_;
  Activation activation_ = Activation::kRelu;
};

struct TrainOptions {
  int epochs = 200;
  double lr = 0.005;
  std::uint64_t seed = 0;
  // Validation AUPRC is checked every `eval_every` epochs and after the last.
  int eval_every = 10;
};

// Rows of a fixed embedding matrix with 0/1 targets.
struct LabeledRows {
  std::vector<std::size_t> rows;
  std::vector<int> labels;
};

struct SelectionTrace {
  int epoch;
  double val_auprc;
};

struct ClassifierFit {
  Classifier classifier;
  std::vector<double> losses;
  std::vector<SelectionTrace> checks;
  int best_epoch = 0;
  double best_val_auprc = 0.0;
};

// Class-weighted BCE (anomaly weight = #normal / #anomaly in train) on fixed
// embeddings, keeping the checkpoint with the best validation AUPRC.
ClassifierFit fit_classifier(const Matrix& embeddings, const LabeledRows& train,
                             const LabeledRows& val, int hidden_dim, Activation activation,
                             const TrainOptions& options);

LabeledRows labeled_rows(const Graph& g, std::span<const NodeId> nodes);

struct FinetuneResult {
  ClassifierFit fit;
  std::vector<double> val_scores;  // for split.val_nodes()
};

// Frozen-encoder fine-tuning: embeddings are computed once and never
// differentiated.
FinetuneResult finetune_run(const Encoder& frozen, const Graph& g, const PropagationOps& ops,
                            const SplitSpec& split, const TrainOptions& options);

struct End2EndResult {
  Encoder encoder;
  Classifier classifier;
  std::vector<double> losses;
  std::vector<SelectionTrace> checks;
  int best_epoch = 0;
  double best_val_auprc = 0.0;
};

// Joint training of encoder and classifier on the labeled training nodes.
End2EndResult end2end_run(const EncoderConfig& config, const Graph& g, const PropagationOps& ops,
                          const SplitSpec& split, const TrainOptions& options);

// Records the weighted supervised loss of encoder + classifier on the tape.
Var supervised_loss(Tape& tape, Encoder& encoder, Classifier& classifier,
                    const PropagationOps& ops, const Matrix& features, const LabeledRows& train);

// sigmoid(logit) for each node of `subset`, in subset order.
std::vector<double> score_nodes(const Encoder& encoder, const Classifier& classifier,
                                const PropagationOps& ops, const Matrix& features,
                                std::span<const NodeId> subset);

// Probabilities for rows of a precomputed embedding matrix.
std::vector<double> score_rows(const Classifier& classifier, const Matrix& embeddings,
                               std::span<const std::size_t> rows);

double sigmoid(double z);

}  // namespace gad
