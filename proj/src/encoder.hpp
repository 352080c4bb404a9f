#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "autodiff.hpp"
#include "graph.hpp"

namespace gad {

enum class EncoderKind { kGcn, kGin };

EncoderKind parse_encoder_kind(std::string_view name);
std::string_view to_string(EncoderKind k);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kGcn;
  int num_layers = 2;
  int hidden_dim = 32;
  Activation activation = Activation::kRelu;
  int input_dim = 0;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Operators an encoder propagates over, built once per graph.
struct PropagationOps {
  SparseOperator gcn;  // normalized adjacency with self-loops
  SparseOperator gin;  // (1 + eps) I + A with eps = 0

  static PropagationOps from(const Graph& g);
  std::size_t num_nodes() const { return gcn.size(); }
};

// GCN or GIN encoder. The activation follows every layer, including the last.
// A GIN layer is Linear -> act -> Linear over the sum aggregation.
class Encoder {
 public:
  static Encoder init(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  // Records the forward pass; parameters become tape leaves unless frozen.
  Var encode(Tape& tape, const PropagationOps& ops, Var features);
  Var encode(Tape& tape, const PropagationOps& ops, const Matrix& features);
  // Inference without gradients.
  Matrix embed(const PropagationOps& ops, const Matrix& features) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // JSON header line (config, seed, value count) followed by the weights as
  // little-endian float64 in declaration order.
  void save(const std::filesystem::path& path) const;
  static Encoder load(const std::filesystem::path& path);

  bool operator==(const Encoder&) const;

 private:
  struct Layer {
    Parameter w1, b1;
    Parameter w2, b2;                 // GIN only
    std::vector<Parameter> slopes;    // PReLU only; one per activation site
  };

  template <typename Self>
  static auto collect(Self& self);

  EncoderConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<Layer> layers_;
  bool frozen_ = false;
};

inline constexpr double kPreluInit = 0.25;

// Applies `kind` on the tape, routing PReLU through the given slope leaf.
Var apply_activation(Tape& tape, Var x, Activation kind, Var slope);

}  // namespace gad
