#include <doctest.h>

#include <cmath>
#include <numbers>

#include "autodiff.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace gad;

namespace {

constexpr double kTol = 1e-4;

// Scalar summary of a matrix-valued node so every output entry matters.
Var probe(Tape& t, Var x, const Matrix& r) {
  return t.sum(t.activate(t.matmul(x, t.constant(r)), Activation::kTanh));
}

}  // namespace

TEST_CASE("activation values") {
  Tape t;
  Var x = t.constant(Matrix::from_rows({{-1.0, 0.0, 2.0}}));
  CHECK(t.value(t.activate(x, Activation::kRelu)) == Matrix::from_rows({{0.0, 0.0, 2.0}}));
  CHECK(t.value(t.activate(t.constant(Matrix(1, 1, 0.0)), Activation::kSigmoid))(0, 0) == 0.5);
  const Matrix lr = t.value(t.activate(x, Activation::kLeakyRelu));
  CHECK(lr(0, 0) == -kLeakySlope);
  CHECK(lr(0, 2) == 2.0);
  CHECK_THROWS_AS(t.activate(x, Activation::kPrelu), Error);
  CHECK(parse_activation("leaky_relu") == Activation::kLeakyRelu);
  CHECK_THROWS_AS(parse_activation("swish"), Error);
}

TEST_CASE("spmm hand values and dense oracle") {
  std::vector<Edge> e{{0, 1}};
  const Graph g = Graph::build(e, Matrix(2, 1), std::vector<Label>(2, Label::kNormal));
  const auto a = normalize_adjacency(g);
  Tape t;
  CHECK(t.value(t.spmm(a, t.constant(Matrix::from_rows({{1.0}, {3.0}})))) == Matrix::from_rows({{2.0}, {2.0}}));

  const Graph iso = Graph::build({}, Matrix(3, 1), std::vector<Label>(3, Label::kNormal));
  const auto ai = normalize_adjacency(iso);
  Rng rng(1);
  const Matrix h = oracle::random_matrix(3, 2, rng);
  CHECK(t.value(t.spmm(ai, t.constant(h))) == h);

  const Graph r = oracle::random_graph(20, 0.2, 1, rng);
  const auto ar = normalize_adjacency(r);
  const Matrix x = oracle::random_matrix(20, 4, rng);
  const Matrix got = t.value(t.spmm(ar, t.constant(x)));
  for (NodeId i = 0; i < 20; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0.0;
      for (NodeId j = 0; j < 20; ++j) s += ar.weight(i, j) * x(j, c);
      CHECK(std::abs(got(i, c) - s) <= 1e-12);
    }
  CHECK_THROWS_AS(t.spmm(ar, t.constant(Matrix(3, 2))), Error);
}

TEST_CASE("bce values and stability") {
  Tape t;
  const double l0 = t.value(t.bce_with_logits(t.constant(Matrix(1, 1, 0.0)), Matrix(1, 1, 1.0)))(0, 0);
  CHECK(l0 == std::numbers::ln2);
  const double big = t.value(t.bce_with_logits(t.constant(Matrix(1, 1, 50.0)), Matrix(1, 1, 1.0)))(0, 0);
  CHECK(std::isfinite(big));
  CHECK(big < 1e-20);
  const double bad = t.value(t.bce_with_logits(t.constant(Matrix(1, 1, -800.0)), Matrix(1, 1, 1.0)))(0, 0);
  CHECK(bad == doctest::Approx(800.0));
  CHECK_THROWS_AS(t.bce_with_logits(t.constant(Matrix(2, 1)), Matrix(1, 1)), Error);
}

TEST_CASE("scaled cosine error values") {
  Tape t;
  Var x = t.constant(Matrix::from_rows({{1.0, 0.0}}));
  Var y = t.constant(Matrix::from_rows({{0.0, 1.0}}));
  CHECK(t.value(t.scaled_cosine_error(x, y, 1.0))(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  Rng rng(2);
  Var r = t.constant(oracle::random_matrix(5, 3, rng));
  CHECK(std::abs(t.value(t.scaled_cosine_error(r, r, 3.0))(0, 0)) <= 1e-15);
  CHECK_THROWS_AS(t.scaled_cosine_error(x, y, 0.5), Error);
}

TEST_CASE("backward trivial gradients and errors") {
  Parameter w(Matrix(2, 3, 0.7));
  {
    Tape t;
    Var loss = t.sum(t.parameter(w));
    t.backward(loss);
    CHECK(w.grad == Matrix(2, 3, 1.0));
    CHECK_THROWS_AS(t.backward(loss), Error);  // stale tape
  }
  w.zero_grad();
  {
    Tape t;
    t.parameter(w);
    Var loss = t.sum(t.constant(Matrix(2, 2, 1.0)));
    t.backward(loss);
    CHECK(w.grad == Matrix(2, 3, 0.0));
  }
  {
    Tape t;
    Var m = t.parameter(w);
    CHECK_THROWS_AS(t.backward(m), Error);  // not a scalar
  }
}

TEST_CASE("gradients accumulate until zero_grad") {
  Parameter w(Matrix(1, 2, 1.0));
  for (int i = 0; i < 2; ++i) {
    Tape t;
    t.backward(t.sum(t.parameter(w)));
  }
  CHECK(w.grad == Matrix(1, 2, 2.0));
  w.zero_grad();
  CHECK(w.grad == Matrix(1, 2, 0.0));
}

TEST_CASE("kernel gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 4 + rng.index(5), f = 2 + rng.index(4), k = 2 + rng.index(3);
    Parameter a(oracle::random_matrix(n, f, rng));
    Parameter b(oracle::random_matrix(f, k, rng));
    Parameter bias(oracle::random_matrix(1, k, rng));
    Parameter c(oracle::random_matrix(n, k, rng));
    Parameter alpha(Matrix(1, 1, 0.3));
    Parameter row(oracle::random_matrix(1, f, rng));
    const Matrix r = oracle::random_matrix(k, 2, rng);
    const Matrix rf = oracle::random_matrix(f, 2, rng);
    const Matrix rn = oracle::random_matrix(n, 2, rng);
    const Graph g = oracle::random_graph(n, 0.4, 1, rng);
    const auto op = normalize_adjacency(g);
    const auto gin = sum_aggregator(g, 1.0);

    auto run = [&](const char* name, std::vector<Parameter*> ps, std::function<Var(Tape&)> fn) {
      const auto res = oracle::check_gradients(ps, fn);
      INFO(name << " seed " << seed);
      CHECK(res.max_rel < kTol);
      CHECK(res.checked > 0);
    };
    run("matmul+bias", {&a, &b, &bias}, [&](Tape& t) {
      return probe(t, t.add_bias(t.matmul(t.parameter(a), t.parameter(b)), t.parameter(bias)), r);
    });
    run("transpose", {&a}, [&](Tape& t) { return probe(t, t.transpose(t.parameter(a)), rn); });
    run("add+scale", {&c}, [&](Tape& t) {
      Var x = t.parameter(c);
      return probe(t, t.add(x, t.scale(x, -1.7)), r);
    });
    run("spmm", {&a}, [&](Tape& t) { return probe(t, t.spmm(op, t.parameter(a)), rf); });
    run("gin spmm", {&a}, [&](Tape& t) { return probe(t, t.spmm(gin, t.parameter(a)), rf); });
    for (Activation act : {Activation::kRelu, Activation::kLeakyRelu, Activation::kTanh,
                           Activation::kSigmoid, Activation::kIdentity}) {
      run("activation", {&c}, [&](Tape& t) { return probe(t, t.activate(t.parameter(c), act), r); });
    }
    run("prelu", {&c, &alpha}, [&](Tape& t) { return probe(t, t.prelu(t.parameter(c), t.parameter(alpha)), r); });
    run("mean_rows", {&c}, [&](Tape& t) {
      Var m = t.mean_rows(t.activate(t.parameter(c), Activation::kRelu));
      return t.sum(t.activate(t.matmul(m, t.constant(r)), Activation::kTanh));
    });
    run("gather", {&a}, [&](Tape& t) { return probe(t, t.gather_rows(t.parameter(a), {0, 2, 1, 2}), rf); });
    run("replace", {&a, &row}, [&](Tape& t) {
      return probe(t, t.replace_rows(t.parameter(a), {1, 3}, t.parameter(row)), rf);
    });
    run("zero_rows", {&a}, [&](Tape& t) { return probe(t, t.zero_rows(t.parameter(a), {0, 3}), rf); });
    run("concat", {&a, &row}, [&](Tape& t) {
      std::vector<Var> parts{t.parameter(a), t.parameter(row), t.parameter(a)};
      return probe(t, t.concat_rows(parts), rf);
    });
    Matrix y(n, k), w(n, k);
    for (double& v : y.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    for (double& v : w.values()) v = rng.uniform(0.5, 3.0);
    run("bce", {&c}, [&](Tape& t) { return t.bce_with_logits(t.parameter(c), y); });
    run("weighted bce", {&c}, [&](Tape& t) { return t.bce_with_logits(t.parameter(c), y, w); });
    Parameter x6(oracle::random_matrix(6, 5, rng)), y6(oracle::random_matrix(6, 5, rng));
    run("sce", {&x6, &y6}, [&](Tape& t) { return t.scaled_cosine_error(t.parameter(x6), t.parameter(y6), 2.0); });
    run("chain matmul relu mean", {&a, &b}, [&](Tape& t) {
      Var h = t.activate(t.matmul(t.parameter(a), t.parameter(b)), Activation::kRelu);
      return t.sum(t.mean_rows(h));
    });
  }
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(9);
  Parameter w(oracle::random_matrix(4, 3, rng));
  const Matrix r = oracle::random_matrix(3, 2, rng);
  auto l1 = [&](Tape& t) { return probe(t, t.parameter(w), r); };
  auto l2 = [&](Tape& t) { return t.sum(t.activate(t.parameter(w), Activation::kSigmoid)); };
  auto grad_of = [&](const std::function<Var(Tape&)>& f) {
    w.zero_grad();
    Tape t;
    t.backward(f(t));
    return w.grad;
  };
  const Matrix g1 = grad_of(l1);
  const Matrix g2 = grad_of(l2);
  const Matrix g = grad_of([&](Tape& t) { return t.add(t.scale(l1(t), 2.5), t.scale(l2(t), -0.75)); });
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(g.values()[i] - (2.5 * g1.values()[i] - 0.75 * g2.values()[i])) <= 1e-10);
}

TEST_CASE("kernels are deterministic") {
  Rng r1(4), r2(4);
  const Matrix a = oracle::random_matrix(7, 5, r1), b = oracle::random_matrix(7, 5, r2);
  Tape t1, t2;
  Var x = t1.activate(t1.matmul(t1.constant(a), t1.transpose(t1.constant(a))), Activation::kTanh);
  Var y = t2.activate(t2.matmul(t2.constant(b), t2.transpose(t2.constant(b))), Activation::kTanh);
  CHECK(t1.value(x) == t2.value(y));
}

TEST_CASE("non-finite values are rejected") {
  Tape t;
  Matrix m(1, 2, 1.0);
  m(0, 1) = std::nan("");
  CHECK_THROWS_AS(t.activate(t.constant(m), Activation::kRelu), Error);
}

TEST_CASE("adam behaviour") {
  Parameter p(Matrix(1, 3, 0.4));
  Adam zero({&p}, {});
  p.zero_grad();
  zero.step();
  CHECK(p.value == Matrix(1, 3, 0.4));

  Parameter s(Matrix(1, 1, 2.0));
  Adam one({&s}, {.lr = 0.1});
  s.grad(0, 0) = 1.0;
  one.step();
  CHECK(s.value(0, 0) == doctest::Approx(1.9).epsilon(1e-7));
  CHECK(one.steps() == 1);

  Parameter w(Matrix(1, 1, 1.0));
  Adam opt({&w}, {.lr = 0.05});
  for (int i = 0; i < 100; ++i) {
    opt.zero_grad();
    w.grad(0, 0) = 2.0 * w.value(0, 0);
    opt.step();
  }
  CHECK(std::abs(w.value(0, 0)) < 0.1);

  Parameter bad(Matrix(1, 1, 0.0));
  bad.grad = Matrix(2, 1);
  Adam mismatch({&bad}, {});
  CHECK_THROWS_AS(mismatch.step(), Error);
}

TEST_CASE("glorot bounds") {
  Rng rng(8);
  const Matrix w = glorot_uniform(16, 32, rng);
  CHECK(w.rows() == 16);
  CHECK(w.cols() == 32);
  const double bound = std::sqrt(6.0 / 48.0);
  for (double v : w.values()) CHECK(std::abs(v) <= bound);
}
