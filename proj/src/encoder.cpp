#include "encoder.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace gad {

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "gcn" || name == "GCN") return EncoderKind::kGcn;
  if (name == "gin" || name == "GIN") return EncoderKind::kGin;
  fail(ErrorCode::kInvalidArgument, "unknown encoder kind '" + std::string(name) + "'");
}

std::string_view to_string(EncoderKind k) { return k == EncoderKind::kGcn ? "gcn" : "gin"; }

void EncoderConfig::validate() const {
  require(num_layers >= 1, ErrorCode::kInvalidArgument, "encoder needs at least one layer");
  require(hidden_dim >= 1, ErrorCode::kInvalidArgument, "hidden dimension must be positive");
  require(input_dim >= 1, ErrorCode::kInvalidArgument, "input dimension must be positive");
}

PropagationOps PropagationOps::from(const Graph& g) {
  return {normalize_adjacency(g), sum_aggregator(g, 1.0)};
}

Encoder Encoder::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Encoder e;
  e.config_ = config;
  e.seed_ = seed;
  Rng rng(seed);
  const auto h = static_cast<std::size_t>(config.hidden_dim);
  std::size_t in = static_cast<std::size_t>(config.input_dim);
  const bool prelu = config.activation == Activation::kPrelu;
  for (int l = 0; l < config.num_layers; ++l) {
    Layer layer;
    layer.w1 = Parameter(glorot_uniform(in, h, rng));
    layer.b1 = Parameter(Matrix(1, h));
    if (config.kind == EncoderKind::kGin) {
      layer.w2 = Parameter(glorot_uniform(h, h, rng));
      layer.b2 = Parameter(Matrix(1, h));
    }
    if (prelu) {
      const int sites = config.kind == EncoderKind::kGin ? 2 : 1;
      for (int s = 0; s < sites; ++s) layer.slopes.emplace_back(Matrix(1, 1, kPreluInit));
    }
    e.layers_.push_back(std::move(layer));
    in = h;
  }
  return e;
}

Var apply_activation(Tape& tape, Var x, Activation kind, Var slope) {
  if (kind == Activation::kPrelu) return tape.prelu(x, slope);
  return tape.activate(x, kind);
}

Var Encoder::encode(Tape& tape, const PropagationOps& ops, Var features) {
  require(tape.value(features).cols() == static_cast<std::size_t>(config_.input_dim),
          ErrorCode::kInvalidArgument,
          "encoder expects " + std::to_string(config_.input_dim) + " input features, got " +
              std::to_string(tape.value(features).cols()));
  require(tape.value(features).rows() == ops.num_nodes(), ErrorCode::kInvalidArgument,
          "feature rows do not match graph size");
  auto leaf = [&](Parameter& p) { return frozen_ ? tape.constant(p.value) : tape.parameter(p); };
  Var h = features;
  for (Layer& layer : layers_) {
    Var slope0{}, slope1{};
    if (!layer.slopes.empty()) slope0 = leaf(layer.slopes[0]);
    if (layer.slopes.size() > 1) slope1 = leaf(layer.slopes[1]);
    if (config_.kind == EncoderKind::kGcn) {
      // A_hat (H W) + b; multiplying by W first keeps the sparse product narrow.
      Var z = tape.spmm(ops.gcn, tape.matmul(h, leaf(layer.w1)));
      z = tape.add_bias(z, leaf(layer.b1));
      h = apply_activation(tape, z, config_.activation, slope0);
    } else {
      Var agg = tape.spmm(ops.gin, h);
      Var z = tape.add_bias(tape.matmul(agg, leaf(layer.w1)), leaf(layer.b1));
      z = apply_activation(tape, z, config_.activation, slope0);
      z = tape.add_bias(tape.matmul(z, leaf(layer.w2)), leaf(layer.b2));
      h = apply_activation(tape, z, config_.activation, slope1);
    }
  }
  return h;
}

Var Encoder::encode(Tape& tape, const PropagationOps& ops, const Matrix& features) {
  return encode(tape, ops, tape.constant(features));
}

Matrix Encoder::embed(const PropagationOps& ops, const Matrix& features) const {
  Encoder copy = *this;
  copy.frozen_ = true;
  Tape tape;
  return tape.value(copy.encode(tape, ops, features));
}

template <typename Self>
auto Encoder::collect(Self& self) {
  using Ptr = std::conditional_t<std::is_const_v<Self>, const Parameter*, Parameter*>;
  std::vector<Ptr> out;
  for (auto& layer : self.layers_) {
    out.push_back(&layer.w1);
    out.push_back(&layer.b1);
    if (self.config_.kind == EncoderKind::kGin) {
      out.push_back(&layer.w2);
      out.push_back(&layer.b2);
    }
    for (auto& s : layer.slopes) out.push_back(&s);
  }
  return out;
}

std::vector<Parameter*> Encoder::parameters() { return collect(*this); }
std::vector<const Parameter*> Encoder::parameters() const { return collect(*this); }

bool Encoder::operator==(const Encoder& o) const {
  if (!(config_ == o.config_) || seed_ != o.seed_) return false;
  const auto a = parameters();
  const auto b = o.parameters();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i]->value == b[i]->value)) return false;
  return true;
}

namespace {

nlohmann::json config_json(const EncoderConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"num_layers", c.num_layers},
          {"hidden_dim", c.hidden_dim},
          {"activation", to_string(c.activation)},
          {"input_dim", c.input_dim}};
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

}  // namespace

void Encoder::save(const std::filesystem::path& path) const {
  std::size_t count = 0;
  for (const Parameter* p : parameters()) count += p->value.size();
  nlohmann::json header = {{"format", "gad-encoder-v1"},
                           {"config", config_json(config_)},
                           {"seed", seed_},
                           {"values", count}};
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << header.dump() << '\n';
  for (const Parameter* p : parameters()) {
    for (double v : p->value.values()) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

Encoder Encoder::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, "bad checkpoint header in " + path.string() + ": " + e.what());
  }
  EncoderConfig cfg;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  try {
    const auto& c = header.at("config");
    cfg.kind = parse_encoder_kind(c.at("kind").get<std::string>());
    cfg.num_layers = c.at("num_layers").get<int>();
    cfg.hidden_dim = c.at("hidden_dim").get<int>();
    cfg.activation = parse_activation(c.at("activation").get<std::string>());
    cfg.input_dim = c.at("input_dim").get<int>();
    seed = header.at("seed").get<std::uint64_t>();
    count = header.at("values").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, "bad checkpoint header in " + path.string() + ": " + e.what());
  }
  Encoder e = Encoder::init(cfg, seed);
  std::size_t expected = 0;
  for (Parameter* p : e.parameters()) expected += p->value.size();
  require(expected == count, ErrorCode::kParse, "checkpoint value count does not match config");
  for (Parameter* p : e.parameters()) {
    for (double& v : p->value.values()) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), sizeof bits);
      require(static_cast<bool>(in), ErrorCode::kParse, "truncated checkpoint " + path.string());
      v = std::bit_cast<double>(to_le(bits));
    }
  }
  return e;
}

}  // namespace gad
