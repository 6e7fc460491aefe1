#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "forgetbench/autodiff.hpp"
#include "forgetbench/error.hpp"
#include "forgetbench/rng.hpp"

using namespace forgetbench;
using namespace forgetbench::ad;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i * n + j] += a[i * k + t] * b[t * n + j];
  return c;
}

}  // namespace

TEST_CASE("forward values") {
  CHECK(tanh(Value(0.0)).item() == 0.0);
  CHECK(relu(Value(-2.0)).item() == 0.0);
  CHECK(exp(Value(0.0)).item() == 1.0);
  CHECK(sum(Value::constant(2, 2, {1, 2, 3, 4})).item() == 10.0);
  CHECK(mean(Value::constant(4, 1, {1, 2, 3, 4})).item() == 2.5);

  const Value s = softmax(Value::constant(3, 1, {1.0, 2.0, 1000.0}));
  CHECK(s(2, 0) == doctest::Approx(1.0));
  CHECK(s(0, 0) + s(1, 0) + s(2, 0) == doctest::Approx(1.0));

  Rng rng(1);
  const auto rows = random_vec(rng, 12);
  const Value m = Value::constant(4, 3, rows);
  const Value cs = cosine_similarity_matrix(m, m);
  for (std::size_t i = 0; i < 4; ++i) CHECK(cs(i, i) == doctest::Approx(1.0).epsilon(1e-14));

  const std::vector<std::size_t> pick{3, 0, 3};
  const Value sel = select_rows(m, pick);
  REQUIRE(sel.rows() == 3);
  CHECK(sel(0, 1) == m(3, 1));
  CHECK(sel(1, 2) == m(0, 2));
}

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_vec(rng, 6), b = random_vec(rng, 6);
    const Value c = matmul(Value::constant(2, 3, a), Value::constant(3, 2, b));
    const auto ref = naive_matmul(a, b, 2, 3, 2);
    for (std::size_t i = 0; i < 4; ++i) CHECK(c.data()[i] == doctest::Approx(ref[i]).epsilon(1e-15));
  }
}

TEST_CASE("shape and domain errors") {
  CHECK_THROWS_AS(matmul(Value::constant(2, 3, std::vector<double>(6)), Value::constant(2, 3, std::vector<double>(6))),
                  ShapeError);
  CHECK_THROWS_AS(add(Value::constant(2, 3, std::vector<double>(6)), Value::constant(3, 2, std::vector<double>(6))),
                  ShapeError);
  CHECK_THROWS_AS(log(Value(-1.0)), DomainError);
  CHECK_THROWS_AS(Value::leaf(2, 2, {1.0}), ShapeError);
  CHECK_THROWS_AS(backward(Value::leaf(2, 1, {1.0, 2.0})), ContractError);
}

TEST_CASE("reverse-mode gradients") {
  SUBCASE("product rule") {
    const Value x = Value::leaf(1, 1, {2.0}), y = Value::leaf(1, 1, {3.0});
    backward(x * y);
    CHECK(x.grad()[0] == 3.0);
    CHECK(y.grad()[0] == 2.0);
  }
  SUBCASE("a reused input accumulates") {
    const Value x = Value::leaf(1, 1, {1.0});
    backward(x + x);
    CHECK(x.grad()[0] == 2.0);
  }
  SUBCASE("leaf gradients accumulate across passes until cleared") {
    Value x = Value::leaf(1, 1, {1.5});
    backward(square(x));
    backward(square(x));
    CHECK(x.grad()[0] == doctest::Approx(6.0));
    x.zero_grad();
    backward(square(x));
    CHECK(x.grad()[0] == doctest::Approx(3.0));
  }
  SUBCASE("broadcasting sums the gradient back") {
    const Value m = Value::leaf(2, 3, {1, 2, 3, 4, 5, 6});
    const Value row = Value::leaf(1, 3, {1, 1, 1});
    backward(sum(m * row));
    CHECK(row.grad() == std::vector<double>{5.0, 7.0, 9.0});
  }
  SUBCASE("constants receive no gradient") {
    const Value c = Value::constant(1, 1, {4.0});
    const Value x = Value::leaf(1, 1, {2.0});
    backward(c * x);
    CHECK(x.grad()[0] == 4.0);
    CHECK(!c.requires_grad());
  }
}

TEST_CASE("finite differences") {
  ParamVector p;
  Rng rng(3);
  p.add("theta", 5, 1, random_vec(rng, 5));

  SUBCASE("quadratic") {
    const auto report = finite_diff_check([](ParamBinder& b) { return sum(square(b.array("theta"))); }, p, 1e-5, 1e-8);
    CHECK(report.passed);
    CHECK(report.checked == 5);
  }
  SUBCASE("constant function has zero gradient both ways") {
    const auto report = finite_diff_check([](ParamBinder&) { return Value(3.0); }, p, 1e-5, 1e-12);
    CHECK(report.passed);
    CHECK(report.max_rel_error == 0.0);
  }
  SUBCASE("a mismatch is reported") {
    // At relu's kink the subgradient is 0 while the central difference is 0.5.
    ParamVector q;
    q.add("x", 1, 1, {0.0});
    const auto report = finite_diff_check([](ParamBinder& b) { return sum(relu(b.array("x"))); }, q, 1e-5, 1e-4);
    CHECK(!report.passed);
  }
  CHECK_THROWS_AS(finite_diff_check([](ParamBinder&) { return Value(1.0); }, p, 0.0, 1e-4), ContractError);
}

TEST_CASE("property: composite kernel-pooling expression matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    ParamVector p;
    p.add("q", 2, 4, random_vec(rng, 8));
    p.add("d", 3, 4, random_vec(rng, 12));
    p.add("w", 3, 1, random_vec(rng, 3));
    p.add("b", 1, 1, random_vec(rng, 1));
    const double mus[] = {0.9, 0.1, -0.5};
    auto f = [&](ParamBinder& b) {
      const Value m = cosine_similarity_matrix(b.array("q"), b.array("d"));
      std::vector<Value> feats;
      for (double mu : mus) {
        const Value diff = m - Value(mu);
        const Value k = exp(-(square(diff) / Value(2.0 * 0.1 * 0.1)));
        feats.push_back(sum(log(sum_rows(k) + Value(1e-10))));
      }
      return tanh(dot(b.array("w"), concat_rows(feats)) + b.array("b"));
    };
    const auto report = finite_diff_check(f, p, 1e-5, 1e-4);
    CHECK_MESSAGE(report.passed, "trial " << trial << " worst " << report.max_rel_error);
  }
}

TEST_CASE("parameter vectors and binders") {
  ParamVector p;
  p.add("a", 2, 2, {1, 2, 3, 4});
  p.add("b", 1, 3);
  CHECK(p.total_dim() == 7);
  CHECK(p.slot("b").offset == 4);
  CHECK_THROWS_AS(p.add("a", 1, 1), ContractError);
  CHECK_THROWS_AS(p.slot("zz"), LookupError);

  ParamBinder binder(p, true);
  const std::vector<std::size_t> rows{1, 1};
  const Value r = binder.rows("a", rows);
  const Value whole = binder.array("a");
  backward(sum(r) + sum(whole * Value(2.0)));
  const auto g = binder.gradient();
  CHECK(g == std::vector<double>{2, 2, 4, 4, 0, 0, 0});

  ParamBinder frozen(p, false);
  CHECK(!frozen.array("a").requires_grad());
}

TEST_CASE("select_rows keeps every requested row") {
  // Regression: the row count must be taken before the index list is moved.
  Rng rng(5);
  ParamVector p;
  p.add("e", 6, 3, random_vec(rng, 18));
  const std::vector<std::size_t> idx{5, 1, 1, 0};
  ParamBinder b(p, true);
  const Value s = select_rows(b.array("e"), idx);
  CHECK(s.rows() == 4);
  CHECK(s.cols() == 3);
  backward(sum(s));
  const auto g = b.gradient();
  CHECK(g[1 * 3] == 2.0);
  CHECK(g[5 * 3 + 2] == 1.0);
  CHECK(g[2 * 3] == 0.0);
}
