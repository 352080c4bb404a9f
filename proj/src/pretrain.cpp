#include "pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace gad {

std::size_t ceil_count(double ratio, std::size_t n) {
  const double x = ratio * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

void DgiConfig::validate() const {
  require(shuffle_ratio >= 0.0 && shuffle_ratio <= 1.0, ErrorCode::kInvalidArgument,
          "shuffle ratio must lie in [0, 1]");
}

void MaeConfig::validate() const {
  require(mask_ratio >= 0.0 && mask_ratio <= 1.0, ErrorCode::kInvalidArgument,
          "mask ratio must lie in [0, 1]");
  require(gamma >= 1.0, ErrorCode::kInvalidArgument, "gamma must be >= 1");
}

DgiHead DgiHead::init(int hidden_dim, std::uint64_t seed) {
  Rng rng(seed);
  const auto h = static_cast<std::size_t>(hidden_dim);
  return DgiHead{Parameter(glorot_uniform(h, h, rng))};
}

MaeHead MaeHead::init(int hidden_dim, int input_dim, std::uint64_t seed) {
  Rng rng(seed);
  const auto h = static_cast<std::size_t>(hidden_dim);
  const auto d = static_cast<std::size_t>(input_dim);
  MaeHead head;
  head.mask_token = Parameter(Matrix(1, d));
  head.decoder_w = Parameter(glorot_uniform(h, d, rng));
  head.decoder_b = Parameter(Matrix(1, d));
  return head;
}

Corruption dgi_corrupt(const Matrix& features, double shuffle_ratio, Rng& rng) {
  DgiConfig{shuffle_ratio}.validate();
  Corruption c;
  c.features = features;
  const std::size_t n = features.rows();
  const std::size_t k = std::min(ceil_count(shuffle_ratio, n), n);
  c.selected = rng.sample_indices(n, k);
  c.source = c.selected;
  rng.shuffle(c.source);
  for (std::size_t i = 0; i < k; ++i) {
    auto src = features.row(c.source[i]);
    std::copy(src.begin(), src.end(), c.features.row(c.selected[i]).begin());
  }
  return c;
}

Var dgi_loss_from_embeddings(Tape& tape, Var positive, Var negative, Var discriminator) {
  const std::size_t n = tape.value(positive).rows();
  require(tape.value(discriminator).rows() == tape.value(positive).cols() &&
              tape.value(discriminator).cols() == tape.value(positive).cols(),
          ErrorCode::kInvalidArgument, "discriminator must be hidden x hidden");
  Var summary = tape.activate(tape.mean_rows(positive), Activation::kSigmoid);
  Var ws = tape.matmul(discriminator, tape.transpose(summary));  // hidden x 1
  Var pos_logits = tape.matmul(positive, ws);
  Var neg_logits = tape.matmul(negative, ws);
  Var pos = tape.bce_with_logits(pos_logits, Matrix(n, 1, 1.0));
  Var neg = tape.bce_with_logits(neg_logits, Matrix(tape.value(negative).rows(), 1, 0.0));
  return tape.scale(tape.add(pos, neg), 0.5);
}

Var dgi_loss(Tape& tape, Encoder& encoder, DgiHead& head, const PropagationOps& ops,
             const Matrix& features, const DgiConfig& config, Rng& rng) {
  config.validate();
  const Corruption corrupted = dgi_corrupt(features, config.shuffle_ratio, rng);
  Var h = encoder.encode(tape, ops, features);
  Var h_neg = encoder.encode(tape, ops, corrupted.features);
  return dgi_loss_from_embeddings(tape, h, h_neg, tape.parameter(head.discriminator));
}

Var graphmae_reconstruction(Tape& tape, MaeHead& head, const PropagationOps& ops, Var hidden,
                            const Matrix& features, const std::vector<std::size_t>& mask,
                            double gamma) {
  Var z = tape.spmm(ops.gcn, tape.matmul(hidden, tape.parameter(head.decoder_w)));
  Var recon = tape.add_bias(z, tape.parameter(head.decoder_b));
  Var target = tape.constant(features.select_rows(mask));
  return tape.scaled_cosine_error(target, tape.gather_rows(recon, mask), gamma);
}

Var graphmae_loss(Tape& tape, Encoder& encoder, MaeHead& head, const PropagationOps& ops,
                  const Matrix& features, const MaeConfig& config, Rng& rng,
                  std::vector<std::size_t>* mask_out) {
  config.validate();
  const std::size_t n = features.rows();
  require(head.mask_token.value.cols() == features.cols(), ErrorCode::kInvalidArgument,
          "mask token width must equal the feature dimension");
  const std::size_t k = std::min(ceil_count(config.mask_ratio, n), n);
  require(k > 0, ErrorCode::kInvalidArgument, "mask set is empty");
  std::vector<std::size_t> mask = rng.sample_indices(n, k);
  std::sort(mask.begin(), mask.end());

  Var x = tape.replace_rows(tape.constant(features), mask, tape.parameter(head.mask_token));
  Var h = encoder.encode(tape, ops, x);
  h = tape.zero_rows(h, mask);
  Var loss = graphmae_reconstruction(tape, head, ops, h, features, mask, config.gamma);
  if (mask_out != nullptr) *mask_out = std::move(mask);
  return loss;
}

Objective parse_objective(std::string_view name) {
  if (name == "dgi") return Objective::kDgi;
  if (name == "graphmae") return Objective::kGraphMae;
  fail(ErrorCode::kInvalidArgument, "unknown pre-training objective '" + std::string(name) + "'");
}

std::string_view to_string(Objective o) { return o == Objective::kDgi ? "dgi" : "graphmae"; }

PretrainResult pretrain_run(std::span<const GraphView> graphs, const EncoderConfig& config,
                            const PretrainOptions& options) {
  require(options.epochs >= 1, ErrorCode::kInvalidArgument, "pre-training needs epochs >= 1");
  require(!graphs.empty(), ErrorCode::kInvalidArgument, "pre-training needs at least one graph");
  options.dgi.validate();
  options.mae.validate();

  Rng rng(options.seed);
  Encoder encoder = Encoder::init(config, rng.next_u64());
  DgiHead dgi = DgiHead::init(config.hidden_dim, rng.next_u64());
  MaeHead mae = MaeHead::init(config.hidden_dim, config.input_dim, rng.next_u64());
  Rng sampler = rng.fork(1);

  std::vector<Parameter*> params = encoder.parameters();
  const auto extra = options.objective == Objective::kDgi ? dgi.parameters() : mae.parameters();
  params.insert(params.end(), extra.begin(), extra.end());
  Adam adam(params, AdamOptions{.lr = options.lr});

  PretrainResult result;
  result.losses.reserve(static_cast<std::size_t>(options.epochs));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    adam.zero_grad();
    Tape tape;
    std::vector<Var> terms;
    for (const GraphView& g : graphs) {
      terms.push_back(options.objective == Objective::kDgi
                          ? dgi_loss(tape, encoder, dgi, *g.ops, *g.features, options.dgi, sampler)
                          : graphmae_loss(tape, encoder, mae, *g.ops, *g.features, options.mae,
                                          sampler));
    }
    Var loss = terms.size() == 1 ? terms[0] : tape.sum(tape.concat_rows(terms));
    const double value = tape.value(loss)(0, 0);
    require(std::isfinite(value), ErrorCode::kNumeric,
            "pre-training loss became non-finite at epoch " + std::to_string(epoch));
    result.losses.push_back(value);
    tape.backward(loss);
    adam.step();
  }
  encoder.freeze();
  result.encoder = std::move(encoder);
  return result;
}

PretrainResult pretrain_run(const Graph& graph, const PropagationOps& ops,
                            const EncoderConfig& config, const PretrainOptions& options) {
  const GraphView view{&ops, &graph.features()};
  return pretrain_run(std::span<const GraphView>(&view, 1), config, options);
}

}  // namespace gad
