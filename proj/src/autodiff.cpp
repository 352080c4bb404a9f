#include "autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace gad {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void add_into(Matrix& dst, const Matrix& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void same_shape_or_throw(const Matrix& a, const Matrix& b, std::string_view op) {
  require(a.same_shape(b), ErrorCode::kInvalidArgument,
          std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
              std::to_string(b.cols()) + ")");
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "none") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu" || name == "leakyrelu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "prelu") return Activation::kPrelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  fail(ErrorCode::kInvalidArgument, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kTanh: return "tanh";
    case Activation::kPrelu: return "prelu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, std::size_t)> adjoint,
               std::string_view op) {
  require(!consumed_, ErrorCode::kState, "tape already used for backward");
  require(value.all_finite(), ErrorCode::kNumeric,
          std::string(op) + ": non-finite value produced");
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.adjoint = std::move(adjoint);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::check(Var v) const {
  require(v.id < nodes_.size(), ErrorCode::kInvalidArgument, "variable not on this tape");
}

Var Tape::constant(Matrix value) {
  return push(std::move(value), false, nullptr, "constant");
}

Var Tape::parameter(Parameter& p) {
  Var v = push(p.value, true, nullptr, "parameter");
  nodes_[v.id].param = &p;
  return v;
}

const Matrix& Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.id];
  require(n.needs_grad && consumed_, ErrorCode::kState, "no gradient recorded for this variable");
  return n.grad;
}

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  Matrix out = gad::matmul(value(a), value(b));
  return push(std::move(out), needs(a) || needs(b),
              [a, b](Tape& t, std::size_t self) {
                const Matrix& g = t.out_grad(self);
                if (t.needs(a)) add_into(t.grad_of(a.id), gad::matmul(g, t.value(b).transposed()));
                if (t.needs(b)) add_into(t.grad_of(b.id), gad::matmul(t.value(a).transposed(), g));
              },
              "matmul");
}

Var Tape::transpose(Var a) {
  check(a);
  return push(value(a).transposed(), needs(a),
              [a](Tape& t, std::size_t self) {
                add_into(t.grad_of(a.id), t.out_grad(self).transposed());
              },
              "transpose");
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  same_shape_or_throw(value(a), value(b), "add");
  Matrix out = value(a);
  add_into(out, value(b));
  return push(std::move(out), needs(a) || needs(b),
              [a, b](Tape& t, std::size_t self) {
                if (t.needs(a)) add_into(t.grad_of(a.id), t.out_grad(self));
                if (t.needs(b)) add_into(t.grad_of(b.id), t.out_grad(self));
              },
              "add");
}

Var Tape::scale(Var a, double s) {
  check(a);
  Matrix out = value(a);
  for (double& x : out.values()) x *= s;
  return push(std::move(out), needs(a),
              [a, s](Tape& t, std::size_t self) {
                auto g = t.out_grad(self).values();
                auto d = t.grad_of(a.id).values();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
              },
              "scale");
}

Var Tape::add_bias(Var x, Var bias) {
  check(x);
  check(bias);
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias);
  require(bv.rows() == 1 && bv.cols() == xv.cols(), ErrorCode::kInvalidArgument,
          "add_bias: bias must be 1 x " + std::to_string(xv.cols()));
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
  }
  return push(std::move(out), needs(x) || needs(bias),
              [x, bias](Tape& t, std::size_t self) {
                const Matrix& g = t.out_grad(self);
                if (t.needs(x)) add_into(t.grad_of(x.id), g);
                if (t.needs(bias)) {
                  Matrix& db = t.grad_of(bias.id);
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) db(0, j) += g(i, j);
                }
              },
              "add_bias");
}

Var Tape::spmm(const SparseOperator& op, Var h) {
  check(h);
  Matrix out = op.apply(value(h));
  const SparseOperator* opp = &op;
  return push(std::move(out), needs(h),
              [opp, h](Tape& t, std::size_t self) {
                add_into(t.grad_of(h.id), opp->apply_transpose(t.out_grad(self)));
              },
              "spmm");
}

Var Tape::activate(Var x, Activation kind) {
  check(x);
  require(kind != Activation::kPrelu, ErrorCode::kInvalidArgument,
          "prelu needs a slope parameter; use Tape::prelu");
  if (kind == Activation::kIdentity) return x;
  Matrix out = value(x);
  for (double& v : out.values()) {
    switch (kind) {
      case Activation::kRelu: v = v > 0.0 ? v : 0.0; break;
      case Activation::kLeakyRelu: v = v > 0.0 ? v : kLeakySlope * v; break;
      case Activation::kTanh: v = std::tanh(v); break;
      case Activation::kSigmoid: v = stable_sigmoid(v); break;
      default: break;
    }
  }
  return push(std::move(out), needs(x),
              [x, kind](Tape& t, std::size_t self) {
                auto g = t.out_grad(self).values();
                auto in = t.value(x).values();
                auto y = t.nodes_[self].value.values();
                auto d = t.grad_of(x.id).values();
                for (std::size_t i = 0; i < d.size(); ++i) {
                  double local = 1.0;
                  switch (kind) {
                    case Activation::kRelu: local = in[i] > 0.0 ? 1.0 : 0.0; break;
                    case Activation::kLeakyRelu: local = in[i] > 0.0 ? 1.0 : kLeakySlope; break;
                    case Activation::kTanh: local = 1.0 - y[i] * y[i]; break;
                    case Activation::kSigmoid: local = y[i] * (1.0 - y[i]); break;
                    default: break;
                  }
                  d[i] += g[i] * local;
                }
              },
              "activate");
}

Var Tape::prelu(Var x, Var alpha) {
  check(x);
  check(alpha);
  require(value(alpha).rows() == 1 && value(alpha).cols() == 1, ErrorCode::kInvalidArgument,
          "prelu slope must be 1x1");
  const double a = value(alpha)(0, 0);
  Matrix out = value(x);
  for (double& v : out.values()) v = v > 0.0 ? v : a * v;
  return push(std::move(out), needs(x) || needs(alpha),
              [x, alpha](Tape& t, std::size_t self) {
                const double a = t.value(alpha)(0, 0);
                auto g = t.out_grad(self).values();
                auto in = t.value(x).values();
                if (t.needs(x)) {
                  auto d = t.grad_of(x.id).values();
                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (in[i] > 0.0 ? 1.0 : a);
                }
                if (t.needs(alpha)) {
                  double da = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i)
                    if (in[i] <= 0.0) da += g[i] * in[i];
                  t.grad_of(alpha.id)(0, 0) += da;
                }
              },
              "prelu");
}

Var Tape::mean_rows(Var x) {
  check(x);
  const Matrix& xv = value(x);
  require(xv.rows() > 0, ErrorCode::kInvalidArgument, "mean_rows of an empty matrix");
  Matrix out(1, xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out(0, j) += xv(i, j);
  const double inv = 1.0 / static_cast<double>(xv.rows());
  for (double& v : out.values()) v *= inv;
  return push(std::move(out), needs(x),
              [x, inv](Tape& t, std::size_t self) {
                const Matrix& g = t.out_grad(self);
                Matrix& d = t.grad_of(x.id);
                for (std::size_t i = 0; i < d.rows(); ++i)
                  for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) += g(0, j) * inv;
              },
              "mean_rows");
}

Var Tape::sum(Var x) {
  check(x);
  double s = 0.0;
  for (double v : value(x).values()) s += v;
  Matrix out(1, 1, s);
  return push(std::move(out), needs(x),
              [x](Tape& t, std::size_t self) {
                const double g = t.out_grad(self)(0, 0);
                for (double& d : t.grad_of(x.id).values()) d += g;
              },
              "sum");
}

Var Tape::gather_rows(Var x, std::vector<std::size_t> rows) {
  check(x);
  Matrix out = value(x).select_rows(rows);
  return push(std::move(out), needs(x),
              [x, rows = std::move(rows)](Tape& t, std::size_t self) {
                const Matrix& g = t.out_grad(self);
                Matrix& d = t.grad_of(x.id);
                for (std::size_t i = 0; i < rows.size(); ++i) {
                  auto dr = d.row(rows[i]);
                  auto gr = g.row(i);
                  for (std::size_t j = 0; j < dr.size(); ++j) dr[j] += gr[j];
                }
              },
              "gather_rows");
}

namespace {

void check_distinct_rows(std::vector<std::size_t> rows, std::size_t n, std::string_view op) {
  std::sort(rows.begin(), rows.end());
  require(std::adjacent_find(rows.begin(), rows.end()) == rows.end(), ErrorCode::kInvalidArgument,
          std::string(op) + ": duplicate row index");
  require(rows.empty() || rows.back() < n, ErrorCode::kOutOfRange,
          std::string(op) + ": row index out of range");
}

}  // namespace

Var Tape::replace_rows(Var x, std::vector<std::size_t> rows, Var row_value) {
  check(x);
  check(row_value);
  const Matrix& xv = value(x);
  const Matrix& rv = value(row_value);
  require(rv.rows() == 1 && rv.cols() == xv.cols(), ErrorCode::kInvalidArgument,
          "replace_rows: replacement must be 1 x " + std::to_string(xv.cols()));
  check_distinct_rows(rows, xv.rows(), "replace_rows");
  Matrix out = xv;
  for (std::size_t r : rows) std::copy_n(rv.row(0).begin(), rv.cols(), out.row(r).begin());
  return push(std::move(out), needs(x) || needs(row_value),
              [x, row_value, rows = std::move(rows)](Tape& t, std::size_t self) {
                const Matrix& g = t.out_grad(self);
                if (t.needs(x)) {
                  Matrix gx = g;
                  for (std::size_t r : rows) std::fill(gx.row(r).begin(), gx.row(r).end(), 0.0);
                  add_into(t.grad_of(x.id), gx);
                }
                if (t.needs(row_value)) {
                  auto dr = t.grad_of(row_value.id).row(0);
                  for (std::size_t r : rows) {
                    auto gr = g.row(r);
                    for (std::size_t j = 0; j < dr.size(); ++j) dr[j] += gr[j];
                  }
                }
              },
              "replace_rows");
}

Var Tape::zero_rows(Var x, std::vector<std::size_t> rows) {
  check(x);
  check_distinct_rows(rows, value(x).rows(), "zero_rows");
  Matrix out = value(x);
  for (std::size_t r : rows) std::fill(out.row(r).begin(), out.row(r).end(), 0.0);
  return push(std::move(out), needs(x),
              [x, rows = std::move(rows)](Tape& t, std::size_t self) {
                Matrix gx = t.out_grad(self);
                for (std::size_t r : rows) std::fill(gx.row(r).begin(), gx.row(r).end(), 0.0);
                add_into(t.grad_of(x.id), gx);
              },
              "zero_rows");
}

Var Tape::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_rows of nothing");
  std::size_t rows = 0;
  const std::size_t cols = value(parts[0]).cols();
  bool any = false;
  for (Var p : parts) {
    check(p);
    require(value(p).cols() == cols, ErrorCode::kInvalidArgument, "concat_rows: column mismatch");
    rows += value(p).rows();
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (Var p : parts) {
    const Matrix& pv = value(p);
    std::copy(pv.values().begin(), pv.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(at * cols));
    at += pv.rows();
  }
  return push(std::move(out), any,
              [ids = std::vector<Var>(parts.begin(), parts.end())](Tape& t, std::size_t self) {
                const Matrix& g = t.out_grad(self);
                std::size_t at = 0;
                for (Var p : ids) {
                  const std::size_t n = t.value(p).size();
                  if (t.needs(p)) {
                    auto d = t.grad_of(p.id).values();
                    auto gv = g.values().subspan(at, n);
                    for (std::size_t i = 0; i < n; ++i) d[i] += gv[i];
                  }
                  at += n;
                }
              },
              "concat_rows");
}

Var Tape::bce_with_logits(Var logits, const Matrix& targets, const std::optional<Matrix>& weights) {
  check(logits);
  const Matrix& z = value(logits);
  same_shape_or_throw(z, targets, "bce_with_logits");
  if (weights) same_shape_or_throw(z, *weights, "bce_with_logits weights");
  require(z.size() > 0, ErrorCode::kInvalidArgument, "bce_with_logits: empty input");
  for (double y : targets.values())
    require(y == 0.0 || y == 1.0, ErrorCode::kInvalidArgument, "bce targets must be 0 or 1");
  const auto zs = z.values();
  const auto ys = targets.values();
  // Running mean: a batch of identical terms averages to that term exactly.
  double mean = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double l = std::max(zs[i], 0.0) - zs[i] * ys[i] + std::log1p(std::exp(-std::abs(zs[i])));
    mean += ((weights ? weights->values()[i] : 1.0) * l - mean) / static_cast<double>(i + 1);
  }
  const double inv = 1.0 / static_cast<double>(zs.size());
  return push(Matrix(1, 1, mean), needs(logits),
              [logits, targets, weights, inv](Tape& t, std::size_t self) {
                const double g = t.out_grad(self)(0, 0);
                auto zs = t.value(logits).values();
                auto ys = targets.values();
                auto d = t.grad_of(logits.id).values();
                for (std::size_t i = 0; i < d.size(); ++i) {
                  const double w = weights ? weights->values()[i] : 1.0;
                  d[i] += g * inv * w * (stable_sigmoid(zs[i]) - ys[i]);
                }
              },
              "bce_with_logits");
}

namespace {

constexpr double kNormFloor = 1e-12;

struct RowCosine {
  double dot, nx, ny, cos;
};

RowCosine row_cosine(std::span<const double> x, std::span<const double> y) {
  RowCosine r{0.0, 0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < x.size(); ++j) {
    r.dot += x[j] * y[j];
    r.nx += x[j] * x[j];
    r.ny += y[j] * y[j];
  }
  r.nx = std::max(std::sqrt(r.nx), kNormFloor);
  r.ny = std::max(std::sqrt(r.ny), kNormFloor);
  r.cos = r.dot / (r.nx * r.ny);
  return r;
}

}  // namespace

Var Tape::scaled_cosine_error(Var target, Var recon, double gamma) {
  check(target);
  check(recon);
  require(gamma >= 1.0, ErrorCode::kInvalidArgument, "scaled cosine error needs gamma >= 1");
  const Matrix& x = value(target);
  const Matrix& y = value(recon);
  same_shape_or_throw(x, y, "scaled_cosine_error");
  require(x.rows() >= 1, ErrorCode::kInvalidArgument, "scaled cosine error over zero rows");
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double gap = std::max(1.0 - row_cosine(x.row(i), y.row(i)).cos, 0.0);
    total += std::pow(gap, gamma);
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  return push(Matrix(1, 1, total * inv), needs(target) || needs(recon),
              [target, recon, gamma, inv](Tape& t, std::size_t self) {
                const double g = t.out_grad(self)(0, 0);
                const Matrix& x = t.value(target);
                const Matrix& y = t.value(recon);
                for (std::size_t i = 0; i < x.rows(); ++i) {
                  const RowCosine rc = row_cosine(x.row(i), y.row(i));
                  const double gap = std::max(1.0 - rc.cos, 0.0);
                  // d loss_i / d cos
                  const double dcos = -gamma * std::pow(gap, gamma - 1.0) * g * inv;
                  auto xr = x.row(i);
                  auto yr = y.row(i);
                  if (t.needs(recon)) {
                    auto d = t.grad_of(recon.id).row(i);
                    for (std::size_t j = 0; j < d.size(); ++j)
                      d[j] += dcos * (xr[j] / (rc.nx * rc.ny) - rc.cos * yr[j] / (rc.ny * rc.ny));
                  }
                  if (t.needs(target)) {
                    auto d = t.grad_of(target.id).row(i);
                    for (std::size_t j = 0; j < d.size(); ++j)
                      d[j] += dcos * (yr[j] / (rc.nx * rc.ny) - rc.cos * xr[j] / (rc.nx * rc.nx));
                  }
                }
              },
              "scaled_cosine_error");
}

void Tape::backward(Var loss) {
  check(loss);
  require(!consumed_, ErrorCode::kState, "backward already ran on this tape");
  const Matrix& lv = value(loss);
  require(lv.rows() == 1 && lv.cols() == 1, ErrorCode::kInvalidArgument,
          "backward needs a scalar loss");
  consumed_ = true;
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  if (!nodes_[loss.id].needs_grad) return;
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.adjoint) n.adjoint(*this, i);
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (n.param != nullptr) add_into(n.param->grad, n.grad);
  }
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), opt_(options) {
  require(opt_.lr > 0.0, ErrorCode::kInvalidArgument, "learning rate must be positive");
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    same_shape_or_throw(p.value, p.grad, "adam");
    auto w = p.value.values();
    auto g = p.grad.values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace gad
