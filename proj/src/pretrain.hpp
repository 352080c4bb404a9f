#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "autodiff.hpp"
#include "encoder.hpp"
#include "rng.hpp"

namespace gad {

// ceil(ratio * n) with a small guard so 0.1 * 690 does not become 71.
std::size_t ceil_count(double ratio, std::size_t n);

struct DgiConfig {
  double shuffle_ratio = 1.0;
  void validate() const;
};

// Bilinear discriminator D(h, s) = h^T W s.
struct DgiHead {
  Parameter discriminator;

  static DgiHead init(int hidden_dim, std::uint64_t seed);
  std::vector<Parameter*> parameters() { return {&discriminator}; }
};

struct Corruption {
  Matrix features;
  std::vector<std::size_t> selected;  // rows that took part in the shuffle
  std::vector<std::size_t> source;    // features.row(selected[i]) == input.row(source[i])
};

// Picks ceil(p * N) distinct rows uniformly and permutes their feature rows
// among themselves; all other rows are copied unchanged.
Corruption dgi_corrupt(const Matrix& features, double shuffle_ratio, Rng& rng);

// Records the DGI objective; the summary is sigmoid(mean_rows(H)) and the loss
// averages the positive and negative BCE terms.
Var dgi_loss(Tape& tape, Encoder& encoder, DgiHead& head, const PropagationOps& ops,
             const Matrix& features, const DgiConfig& config, Rng& rng);

// Same objective from already recorded embeddings (positive and corrupted).
Var dgi_loss_from_embeddings(Tape& tape, Var positive, Var negative, Var discriminator);

struct MaeConfig {
  double mask_ratio = 0.5;
  double gamma = 2.0;
  void validate() const;
};

// Mask token plus a single GCN decoder layer hidden -> D (no activation).
struct MaeHead {
  Parameter mask_token;
  Parameter decoder_w;
  Parameter decoder_b;

  static MaeHead init(int hidden_dim, int input_dim, std::uint64_t seed);
  std::vector<Parameter*> parameters() { return {&mask_token, &decoder_w, &decoder_b}; }
};

// Masks ceil(mask_ratio * N) nodes, encodes, re-masks the hidden rows,
// decodes and scores only the masked rows with the scaled cosine error.
// `mask_out`, when given, receives the sampled mask set.
Var graphmae_loss(Tape& tape, Encoder& encoder, MaeHead& head, const PropagationOps& ops,
                  const Matrix& features, const MaeConfig& config, Rng& rng,
                  std::vector<std::size_t>* mask_out = nullptr);

// Loss tail shared with the unit tests: decode hidden (already re-masked) rows
// and score `mask` rows against `features`.
Var graphmae_reconstruction(Tape& tape, MaeHead& head, const PropagationOps& ops, Var hidden,
                            const Matrix& features, const std::vector<std::size_t>& mask,
                            double gamma);

enum class Objective { kDgi, kGraphMae };

Objective parse_objective(std::string_view name);
std::string_view to_string(Objective o);

struct PretrainOptions {
  Objective objective = Objective::kDgi;
  int epochs = 200;
  double lr = 0.005;
  std::uint64_t seed = 0;
  DgiConfig dgi;
  MaeConfig mae;
};

struct PretrainResult {
  Encoder encoder;  // frozen
  std::vector<double> losses;
};

// One graph (features plus propagation operators) in a pre-training corpus.
struct GraphView {
  const PropagationOps* ops;
  const Matrix* features;
};

// Full-batch Adam over the self-supervised objective. Each epoch sums the
// loss over all graphs. Labels are never an input.
PretrainResult pretrain_run(std::span<const GraphView> graphs, const EncoderConfig& config,
                            const PretrainOptions& options);
PretrainResult pretrain_run(const Graph& graph, const PropagationOps& ops,
                            const EncoderConfig& config, const PretrainOptions& options);

}  // namespace gad
