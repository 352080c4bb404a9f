#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "graph.hpp"
#include "matrix.hpp"

namespace gad {

enum class Activation { kIdentity, kRelu, kLeakyRelu, kTanh, kPrelu, kSigmoid };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

inline constexpr double kLeakySlope = 0.01;

// A trainable tensor. Gradients accumulate across backward passes until
// zero_grad() is called.
struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

// Handle to a tensor recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Records differentiable operations in execution order and replays their
// adjoints in exact reverse order. Single use: backward() may be called once.
// Referenced Parameters and SparseOperators must outlive the tape.
class Tape {
 public:
  Var constant(Matrix value);
  Var parameter(Parameter& p);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient of the last backward() loss w.r.t. v (zeros if unreachable).
  const Matrix& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var scale(Var a, double s);
  // x (N x F) + bias (1 x F) broadcast over rows.
  Var add_bias(Var x, Var bias);
  Var spmm(const SparseOperator& op, Var h);
  // Element-wise activation; kPrelu is rejected here (use prelu()).
  Var activate(Var x, Activation kind);
  // max(0,x) + alpha*min(0,x) with a learnable 1x1 slope.
  Var prelu(Var x, Var alpha);
  Var mean_rows(Var x);
  Var sum(Var x);
  Var gather_rows(Var x, std::vector<std::size_t> rows);
  // Copies x and overwrites the listed rows with the 1 x F row vector.
  Var replace_rows(Var x, std::vector<std::size_t> rows, Var row_value);
  Var zero_rows(Var x, std::vector<std::size_t> rows);
  Var concat_rows(std::span<const Var> parts);

  // Mean over all elements of weight * BCE(sigmoid(logit), target), in the
  // log-sum-exp stable form.
  Var bce_with_logits(Var logits, const Matrix& targets, const std::optional<Matrix>& weights = {});
  // Mean over rows of (1 - cos(target_i, recon_i))^gamma.
  Var scaled_cosine_error(Var target, Var recon, double gamma);

  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool needs_grad = false;
    std::function<void(Tape&, std::size_t)> adjoint;
  };

  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, std::size_t)> adjoint,
           std::string_view op);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  Matrix& grad_of(std::size_t id) { return nodes_[id].grad; }
  const Matrix& out_grad(std::size_t id) const { return nodes_[id].grad; }
  void check(Var v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

struct AdamOptions {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);

  // Applies one update from the parameters' current gradients.
  void step();
  void zero_grad();
  std::int64_t steps() const { return step_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions opt_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_ = 0;
};

// Glorot/Xavier uniform in +-sqrt(6 / (fan_in + fan_out)).
class Rng;
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace gad
