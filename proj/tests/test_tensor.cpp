#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glora/tensor.hpp"
#include "test_util.hpp"

using namespace glora;
using testutil::check_grads;
using testutil::random_tensor;

namespace {

// independent of the library's loop order
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  int m = a.dim(0), n = a.dim(1), p = b.dim(1);
  std::vector<double> c(static_cast<size_t>(m) * p, 0.0);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a.at(i, k) * b.at(k, j);
      c[static_cast<size_t>(i) * p + j] = s;
    }
  return Tensor::from_values({m, p}, std::move(c));
}

}  // namespace

TEST_CASE("matmul identity and hand sums") {
  Tensor eye = Tensor::eye(2);
  Tensor x = Tensor::from_values({2}, {5, 7});
  Tensor y = ops::matmul(eye, x);
  CHECK(y.at(0) == 5.0);
  CHECK(y.at(1) == 7.0);

  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tensor ones = Tensor::from_values({2}, {1, 1});
  Tensor z = ops::matmul(a, ones);
  CHECK(z.at(0) == 3.0);
  CHECK(z.at(1) == 7.0);
}

TEST_CASE("matmul matches naive oracle") {
  Tensor a = random_tensor({3, 4}, 11);
  Tensor b = random_tensor({4, 2}, 12);
  Tensor c = ops::matmul(a, b);
  Tensor ref = naive_matmul(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::fabs(c.at(i, j) - ref.at(i, j)) < 1e-12);
}

TEST_CASE("matmul shape mismatch is descriptive") {
  Tensor a = random_tensor({3, 4}, 1);
  Tensor b = random_tensor({5, 2}, 2);
  CHECK_THROWS_WITH_AS(ops::matmul(a, b), doctest::Contains("inner extents differ"),
                       std::invalid_argument);
}

TEST_CASE("elementwise basics") {
  CHECK(ops::sigmoid(Tensor::scalar(0.0)).value() == 0.5);
  Tensor h = ops::hadamard(Tensor::from_values({2}, {1, 2}), Tensor::from_values({2}, {3, 4}));
  CHECK(h.at(0) == 3.0);
  CHECK(h.at(1) == 8.0);

  // saturation underflows cleanly
  Tensor s = ops::sigmoid(Tensor::scalar(-1000.0));
  CHECK(s.value() == 0.0);
  CHECK(s.all_finite());
  CHECK(ops::sigmoid(Tensor::scalar(1000.0)).value() == 1.0);

  CHECK_THROWS_AS(ops::add(random_tensor({3}, 1), random_tensor({4}, 2)), std::invalid_argument);

  // scalar broadcast
  Tensor b = ops::add(Tensor::from_values({3}, {1, 2, 3}), Tensor::scalar(10.0));
  CHECK(b.at(2) == 13.0);
}

TEST_CASE("softmax rows sum to one") {
  Tensor s = ops::softmax(Tensor::from_values({2}, {0, 0}), 0);
  CHECK(s.at(0) == doctest::Approx(0.5).epsilon(1e-14));

  Tensor x = random_tensor({5, 7}, 3, -30.0, 30.0);
  Tensor sm = ops::softmax(x, 1);
  for (int i = 0; i < 5; ++i) {
    double total = 0.0;
    for (int j = 0; j < 7; ++j) {
      CHECK(sm.at(i, j) >= 0.0);
      total += sm.at(i, j);
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }
  Tensor sm0 = ops::softmax(x, 0);
  for (int j = 0; j < 7; ++j) {
    double total = 0.0;
    for (int i = 0; i < 5; ++i) total += sm0.at(i, j);
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("logsumexp is max-shifted") {
  Tensor x = Tensor::from_values({2}, {1000.0, 1000.0});
  CHECK(ops::logsumexp(x, 0).value() == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("cross entropy of uniform logits is ln V") {
  Tensor logits = Tensor::from_values({1, 2}, {0, 0});
  CHECK(ops::cross_entropy(logits, {0}).value() == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(ops::cross_entropy(logits, {}), std::invalid_argument);
  CHECK_THROWS_AS(ops::cross_entropy(logits, {2}), std::invalid_argument);
}

TEST_CASE("concat and slice") {
  Tensor c = ops::concat({Tensor::from_values({2}, {1, 2}), Tensor::from_values({1}, {3})}, 0);
  CHECK(c.shape() == Shape{3});
  CHECK(c.at(2) == 3.0);

  Tensor x = random_tensor({3, 4}, 5);
  Tensor s = ops::slice(x, 1, 1, 2);
  CHECK(s.shape() == Shape{3, 2});
  CHECK(s.at(2, 1) == x.at(2, 2));
  CHECK_THROWS_AS(ops::slice(x, 1, 3, 2), std::invalid_argument);
}

TEST_CASE("backward of a linear map matches finite differences") {
  Tensor w0 = random_tensor({3, 4}, 21);
  Tensor x = random_tensor({4}, 22);

  Graph g;
  Tensor w = g.param("w", w0);
  Tensor loss = ops::sum_all(ops::matmul(w, x));
  GradTable analytic = g.backward(loss);

  auto f = [&](const ParamMap& p) { return ops::sum_all(ops::matmul(p.at("w"), x)).value(); };
  GradTable numeric = finite_diff_grad(f, {{"w", w0}});
  for (size_t i = 0; i < w0.values().size(); ++i)
    CHECK(rel_err(analytic.at("w").values()[i], numeric.at("w").values()[i]) < 1e-6);
}

TEST_CASE("parameters the loss does not reach are absent") {
  Graph g;
  Tensor used = g.param("used", Tensor::scalar(2.0));
  Tensor unused = g.param("unused", Tensor::scalar(5.0));
  Tensor loss = ops::hadamard(used, used);
  GradTable t = g.backward(loss);
  CHECK(t.has("used"));
  CHECK_FALSE(t.has("unused"));
}

TEST_CASE("frozen tensors never receive gradients") {
  // a frozen weight participates as a plain constant
  Tensor w0 = random_tensor({2, 2}, 31);
  Graph g;
  Tensor x = g.param("x", random_tensor({2}, 32));
  Tensor loss = ops::sum_all(ops::matmul(w0, x));
  GradTable t = g.backward(loss);
  CHECK(t.size() == 1);
  CHECK(t.has("x"));
}

TEST_CASE("backward rejects bad losses") {
  Graph g;
  Tensor p = g.param("p", random_tensor({3}, 41));
  CHECK_THROWS_WITH_AS(g.backward(p), doctest::Contains("scalar"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(g.backward(Tensor::scalar(1.0)), doctest::Contains("attached"),
                       std::invalid_argument);
  CHECK_THROWS_AS(g.param("p", Tensor::scalar(0.0)), std::invalid_argument);  // duplicate
}

TEST_CASE("finite differences sanity") {
  auto square = [](const ParamMap& p) {
    double v = p.at("p").value();
    return v * v;
  };
  GradTable t = finite_diff_grad(square, {{"p", Tensor::scalar(3.0)}});
  CHECK(t.at("p").value() == doctest::Approx(6.0).epsilon(1e-6));

  auto constant = [](const ParamMap&) { return 4.0; };
  GradTable c = finite_diff_grad(constant, {{"p", Tensor::from_values({3}, {1, 2, 3})}});
  for (double v : c.at("p").values()) CHECK(v == doctest::Approx(0.0));

  CHECK_THROWS_AS(finite_diff_grad(constant, {{"p", Tensor::scalar(0.0)}}, -1.0),
                  std::invalid_argument);
}

TEST_CASE("gradient checks across the op vocabulary") {
  uint64_t seed = 100;
  auto t = [&](Shape s) { return random_tensor(std::move(s), ++seed); };

  check_grads([](const ParamMap& p) { return ops::matmul(p.at("a"), p.at("b")); },
              {{"a", t({3, 4})}, {"b", t({4, 2})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::matmul(p.at("a"), p.at("x")); },
              {{"a", t({3, 4})}, {"x", t({4})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::matmul(p.at("x"), p.at("b")); },
              {{"x", t({3})}, {"b", t({3, 5})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::transpose(p.at("a")); }, {{"a", t({3, 4})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::add(p.at("a"), p.at("b")); },
              {{"a", t({2, 3})}, {"b", t({2, 3})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::sub(p.at("a"), p.at("b")); },
              {{"a", t({2, 3})}, {"b", t({2, 3})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::add(p.at("a"), p.at("s")); },
              {{"a", t({2, 3})}, {"s", t({1})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::hadamard(p.at("a"), p.at("b")); },
              {{"a", t({2, 3})}, {"b", t({2, 3})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::hadamard(p.at("s"), p.at("b")); },
              {{"s", t({1})}, {"b", t({4})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::scale(p.at("a"), -2.5); }, {{"a", t({3, 2})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::add_rowvec(p.at("x"), p.at("b")); },
              {{"x", t({3, 4})}, {"b", t({4})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::sigmoid(p.at("a")); }, {{"a", t({2, 3})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::tanh(p.at("a")); }, {{"a", t({5})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::concat({p.at("a"), p.at("b")}, 0); },
              {{"a", t({2, 3})}, {"b", t({1, 3})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::concat({p.at("a"), p.at("b")}, 1); },
              {{"a", t({2, 3})}, {"b", t({2, 2})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::slice(p.at("a"), 0, 1, 2); }, {{"a", t({4, 3})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::slice(p.at("a"), 1, 0, 2); }, {{"a", t({4, 3})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::softmax(p.at("a"), 1); }, {{"a", t({3, 4})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::softmax(p.at("a"), 0); }, {{"a", t({3, 4})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::logsumexp(p.at("a"), 1); }, {{"a", t({3, 4})}},
              ++seed);
  check_grads(
      [](const ParamMap& p) { return ops::layer_norm(p.at("x"), p.at("g"), p.at("b")); },
      {{"x", t({3, 6})}, {"g", t({6})}, {"b", t({6})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::embedding_lookup(p.at("e"), {0, 2, 2, 1}); },
              {{"e", t({4, 3})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::cross_entropy(p.at("l"), {1, 0, 3}); },
              {{"l", t({3, 4})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::ctc_nll(p.at("l"), {1, 2, 2}, 0); },
              {{"l", t({6, 4})}}, ++seed);
  check_grads([](const ParamMap& p) { return ops::sum_all(p.at("a")); }, {{"a", t({2, 3})}},
              ++seed);
  check_grads([](const ParamMap& p) { return ops::mean_all(p.at("a")); }, {{"a", t({7})}}, ++seed);
}

TEST_CASE("forward evaluation is deterministic") {
  Tensor a = random_tensor({4, 4}, 77);
  Tensor b = random_tensor({4, 4}, 78);
  Tensor c1 = ops::softmax(ops::matmul(a, b), 1);
  Tensor c2 = ops::softmax(ops::matmul(a, b), 1);
  CHECK(c1.same_values(c2));
}

TEST_CASE("tensors are immutable values") {
  Tensor a = Tensor::from_values({2}, {1, 2});
  Tensor b = ops::scale(a, 2.0);
  CHECK(a.at(0) == 1.0);
  CHECK(b.at(0) == 2.0);
  CHECK_FALSE(Tensor::from_values({2}, {1, std::nan("")}).all_finite());
  CHECK_THROWS_AS(Tensor::from_values({0, 2}, {}), std::invalid_argument);
}

TEST_CASE("ops refuse tensors from different graphs") {
  Graph g1, g2;
  Tensor a = g1.param("a", Tensor::scalar(1.0));
  Tensor b = g2.param("b", Tensor::scalar(2.0));
  CHECK_THROWS_WITH_AS(ops::add(a, b), doctest::Contains("different graphs"),
                       std::invalid_argument);
}
