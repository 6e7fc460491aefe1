#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "forgetbench/error.hpp"
#include "forgetbench/metrics.hpp"
#include "forgetbench/regression.hpp"
#include "forgetbench/rng.hpp"

using namespace forgetbench;

namespace {

// Solves (X'X) b = X'y by Gaussian elimination with partial pivoting.
std::vector<double> normal_equations_oracle(const RegressionDesign& d) {
  const std::size_t n = d.rows(), p = d.cols();
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t r = 0; r < n; ++r) a[i][j] += d.at(r, i) * d.at(r, j);
    for (std::size_t r = 0; r < n; ++r) a[i][p] += d.at(r, i) * d.y[r];
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double m = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= m * a[c][k];
    }
  }
  std::vector<double> b(p);
  for (std::size_t i = 0; i < p; ++i) b[i] = a[i][p] / a[i][i];
  return b;
}

RegressionDesign raw_design(std::vector<std::string> cols, std::vector<double> x, std::vector<double> y) {
  RegressionDesign d;
  d.columns = std::move(cols);
  d.x = std::move(x);
  d.y = std::move(y);
  return d;
}

RegressionDesign random_design(Rng& rng, std::size_t n, std::size_t p, const std::vector<double>& beta,
                               double noise) {
  std::vector<std::string> cols{"Constant"};
  for (std::size_t j = 1; j < p; ++j) cols.push_back("x" + std::to_string(j));
  std::vector<double> x, y;
  for (std::size_t r = 0; r < n; ++r) {
    double yr = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double v = j == 0 ? 1.0 : rng.uniform(-2, 2);
      x.push_back(v);
      yr += beta[j] * v;
    }
    y.push_back(yr + noise * rng.normal());
  }
  return raw_design(cols, x, y);
}

FeatureVector features(const std::string& name, Rng& rng) {
  FeatureVector f;
  f.dataset = name;
  f.rs = rng.uniform(3, 6);
  f.rd = rng.uniform(-4, -2);
  f.sd = rng.uniform(0, 2);
  f.vocab = rng.uniform(100, 1000);
  f.dl = rng.uniform(10, 40);
  f.ql = rng.uniform(2, 5);
  f.qd = rng.uniform(1, 5);
  f.map = rng.uniform(0.1, 0.5);
  f.std_ap = rng.uniform(0.1, 0.3);
  return f;
}

}  // namespace

TEST_CASE("ordinary least squares") {
  SUBCASE("noiseless line") {
    const auto d = raw_design({"Constant", "x"}, {1, 0, 1, 1, 1, 2, 1, 5}, {1, 3, 5, 11});
    const auto r = ols_fit(d);
    CHECK(r.coefficients[0].estimate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.coefficients[1].estimate == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.n == 4);
    CHECK(r.df_resid == 2);
  }
  SUBCASE("constant response") {
    const auto d = raw_design({"Constant", "x"}, {1, 0, 1, 1, 1, 2, 1, 5}, {4, 4, 4, 4});
    const auto r = ols_fit(d);
    CHECK(r.coefficients[0].estimate == doctest::Approx(4.0));
    CHECK(std::abs(r.coefficients[1].estimate) < 1e-12);
    CHECK(r.r_squared == 0.0);
  }
  SUBCASE("too few rows") {
    const auto d = raw_design({"Constant", "x"}, {1, 0, 1, 1}, {1, 2});
    CHECK_THROWS_AS(ols_fit(d), FitError);
  }
  SUBCASE("collinear columns are named") {
    const auto d = raw_design({"Constant", "a", "b"}, {1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 5, 10}, {1, 2, 3, 4});
    try {
      ols_fit(d);
      FAIL("expected a FitError");
    } catch (const FitError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("collinear") != std::string::npos);
      CHECK((msg.find("a") != std::string::npos || msg.find("b") != std::string::npos));
    }
  }
}

TEST_CASE("property: OLS agrees with a Gaussian-elimination oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_design(rng, 50, 4, {0.5, -1.0, 2.0, 0.25}, 0.3);
    const auto r = ols_fit(d);
    const auto b = normal_equations_oracle(d);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(r.coefficients[j].estimate - b[j]) <= 1e-8);
    CHECK(r.r_squared >= 0.0);
    CHECK(r.r_squared <= 1.0);
  }
}

TEST_CASE("standard errors and p-values") {
  Rng rng(8);
  const auto d = random_design(rng, 40, 3, {1.0, 0.5, 0.0}, 0.5);
  const auto r = ols_fit(d);
  const std::size_t n = 40, p = 3;

  // sigma^2 from the residuals of the oracle fit.
  const auto b = normal_equations_oracle(d);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < p; ++j) fit += d.at(i, j) * b[j];
    ss += (d.y[i] - fit) * (d.y[i] - fit);
  }
  CHECK(r.sigma2 == doctest::Approx(ss / double(n - p)).epsilon(1e-10));

  std::vector<std::vector<double>> xtx(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k < n; ++k) xtx[i][j] += d.at(k, i) * d.at(k, j);
  // 3x3 inverse by cofactors.
  auto m = [&](std::size_t i, std::size_t j) { return xtx[i][j]; };
  const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                     m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                     m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
  const double inv_diag[3] = {(m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / det,
                              (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / det,
                              (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / det};
  for (std::size_t j = 0; j < p; ++j) {
    const auto& c = r.coefficients[j];
    CHECK(c.std_error == doctest::Approx(std::sqrt(r.sigma2 * inv_diag[j])).epsilon(1e-9));
    CHECK(c.t_value == doctest::Approx(c.estimate / c.std_error).epsilon(1e-12));
    CHECK(c.p_value == doctest::Approx(two_sided_p(c.t_value, double(n - p))).epsilon(1e-12));
    CHECK(c.stars == significance_stars(c.p_value));
  }
}

TEST_CASE("Student t distribution") {
  // Closed forms: df = 1 is Cauchy, df = 2 has an algebraic CDF.
  for (double t : {-7.0, -1.3, -0.2, 0.0, 0.4, 1.0, 2.5, 30.0}) {
    CHECK(students_t_cdf(t, 1) == doctest::Approx(0.5 + std::atan(t) / std::numbers::pi).epsilon(1e-10));
    CHECK(students_t_cdf(t, 2) == doctest::Approx(0.5 + t / (2.0 * std::sqrt(2.0 + t * t))).epsilon(1e-10));
    CHECK(students_t_cdf(t, 7) + students_t_cdf(-t, 7) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Large df approaches the normal distribution.
  CHECK(students_t_cdf(1.959963984540054, 1e7) == doctest::Approx(0.975).epsilon(1e-6));
  CHECK(two_sided_p(0.0, 5) == doctest::Approx(1.0));
  CHECK(two_sided_p(-2.0, 9) == two_sided_p(2.0, 9));
  CHECK_THROWS_AS(students_t_cdf(1.0, 0.0), DomainError);

  // Regularized incomplete beta identities.
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    CHECK(incomplete_beta(1, 1, x) == doctest::Approx(x).epsilon(1e-12));
    CHECK(incomplete_beta(3, 1, x) == doctest::Approx(std::pow(x, 3)).epsilon(1e-12));
    CHECK(incomplete_beta(1, 4, x) == doctest::Approx(1 - std::pow(1 - x, 4)).epsilon(1e-12));
    CHECK(incomplete_beta(2.5, 4.0, x) + incomplete_beta(4.0, 2.5, 1 - x) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(incomplete_beta(1, 1, 1.5), DomainError);
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(0.0005) == "***");
  CHECK(significance_stars(0.001) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.01) == "**");
  CHECK(significance_stars(0.03) == "*");
  CHECK(significance_stars(0.05) == "*");
  CHECK(significance_stars(0.051).empty());
}

TEST_CASE("design matrix") {
  Rng rng(2);
  std::vector<RegressionRow> rows;
  for (int i = 0; i < 12; ++i) {
    const std::string ds = i % 3 == 0 ? "robust" : i % 3 == 1 ? "msmarco" : "trec";
    const auto f = features(ds + std::to_string(i), rng);
    for (const std::string model : {"knrm", "drmm"}) {
      rows.push_back({"s" + std::to_string(i), ds, model, rng.uniform(0.5, 1.0), f});
    }
  }
  const auto d = build_design(rows);
  CHECK(d.rows() == 24);
  // intercept + 9 characteristics + 2 dataset dummies + 1 model dummy
  CHECK(d.cols() == 13);
  CHECK(d.columns[0] == "Constant");
  CHECK(d.reference_dataset == "msmarco");
  CHECK(d.reference_model == "drmm");
  CHECK(std::count(d.columns.begin(), d.columns.end(), std::string("Model[knrm]")) == 1);

  for (std::size_t c = 1; c <= FeatureVector::size; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < d.rows(); ++r) sum += d.at(r, c);
    CHECK(std::abs(sum) <= 1e-10);
  }
  for (std::size_t r = 0; r < d.rows(); ++r) {
    CHECK(d.at(r, 0) == 1.0);
    CHECK(d.at(r, 1) == doctest::Approx(rows[r].features.rs - d.feature_means[0]).epsilon(1e-12));
  }

  SUBCASE("centering moves only the intercept") {
    const auto centered = ols_fit(d);
    RegressionDesign raw = d;
    for (std::size_t r = 0; r < raw.rows(); ++r)
      for (std::size_t c = 1; c <= FeatureVector::size; ++c) raw.x[r * raw.cols() + c] += d.feature_means[c - 1];
    const auto uncentered = ols_fit(raw);
    CHECK(uncentered.r_squared == doctest::Approx(centered.r_squared).epsilon(1e-9));
    for (std::size_t j = 1; j < d.cols(); ++j) {
      CHECK(uncentered.coefficients[j].estimate ==
            doctest::Approx(centered.coefficients[j].estimate).epsilon(1e-6).scale(1.0));
    }
  }

  SUBCASE("adding a column never lowers R squared") {
    RegressionDesign smaller = d;
    const std::size_t drop = d.cols() - 1;
    smaller.columns.pop_back();
    smaller.x.clear();
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < drop; ++c) smaller.x.push_back(d.at(r, c));
    CHECK(ols_fit(smaller).r_squared <= ols_fit(d).r_squared + 1e-12);
  }

  SUBCASE("reports and CSV") {
    const auto rep = ols_fit(d);
    std::ostringstream a, b, c;
    write_design_csv(a, d);
    write_regression_csv(b, rep);
    write_regression_table(c, rep, "REM");
    const std::string design_csv = a.str();
    CHECK(design_csv.find("Constant") != std::string::npos);
    CHECK(std::count(design_csv.begin(), design_csv.end(), '\n') == 25);
    CHECK(b.str().find("std_error") != std::string::npos);
    CHECK(c.str().find("RS") != std::string::npos);
    CHECK(c.str().find("R2") != std::string::npos);
  }

  SUBCASE("constant characteristic warns and the fit rejects it") {
    std::vector<RegressionRow> flat = rows;
    for (auto& r : flat) r.features.ql = 3.0;
    std::vector<std::string> warnings;
    set_warning_sink([&](std::string_view w) { warnings.emplace_back(w); });
    const auto fd = build_design(flat);
    set_warning_sink(nullptr);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("QL") != std::string::npos);
    CHECK_THROWS_AS(ols_fit(fd), FitError);
  }

  SUBCASE("a single row cannot be fitted") {
    CHECK_THROWS_AS(build_design({rows[0]}), FitError);
  }
}

TEST_CASE("regression recovers known coefficients") {
  Rng rng(77);
  const std::vector<double> beta = {0.7, -0.3, 1.2, 0.05, -2.0};
  const auto d = random_design(rng, 600, 5, beta, 0.01);
  const auto r = ols_fit(d);
  CHECK(r.r_squared >= 0.95);
  for (std::size_t j = 0; j < beta.size(); ++j) {
    CHECK(std::abs(r.coefficients[j].estimate - beta[j]) <= 3 * r.coefficients[j].std_error);
  }
  const auto exact = ols_fit(random_design(rng, 600, 5, beta, 0.0));
  CHECK(std::abs(exact.r_squared - 1.0) <= 1e-10);
}

TEST_CASE("KL divergence") {
  const std::vector<double> p = {0.1, 0.4, 0.3, 0.2}, q = {0.25, 0.25, 0.25, 0.25};
  const double hand = 0.1 * std::log(0.4) + 0.4 * std::log(1.6) + 0.3 * std::log(1.2) + 0.2 * std::log(0.8);
  CHECK(kl_divergence(p, q) == doctest::Approx(hand).epsilon(1e-14));
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(kl_divergence(p, q) != doctest::Approx(kl_divergence(q, p)));
  CHECK_THROWS_AS(kl_divergence(p, std::vector<double>{0.5, 0.5}), ShapeError);
  CHECK_THROWS_AS(kl_divergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}), DomainError);

  SUBCASE("histograms") {
    const std::vector<double> s = {1.0, 2.0, 2.5, 7.0, 3.3};
    CHECK(histogram_kl(s, s, 20) == doctest::Approx(0.0).epsilon(1e-15));
    // Two bins over [0, 4]: pos = (1, 0), neg = (1/2, 1/2) before smoothing.
    const std::vector<double> pos = {0.5, 1.0}, neg = {0.0, 4.0};
    const double e = 1e-6;
    const double p0 = (1 + e) / (1 + 2 * e), p1 = e / (1 + 2 * e), q0 = 0.5, q1 = 0.5;
    CHECK(histogram_kl(pos, neg, 2) ==
          doctest::Approx(p0 * std::log(p0 / q0) + p1 * std::log(p1 / q1)).epsilon(1e-12));
    CHECK_THROWS_AS(histogram_kl({}, neg, 2), FeatureError);
  }
}

TEST_CASE("property: histogram KL is nonnegative") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng.index(30)), b(1 + rng.index(30));
    for (double& x : a) x = rng.uniform(0, 10);
    for (double& x : b) x = rng.uniform(2, 14);
    CHECK(histogram_kl(a, b, 20) >= 0.0);
  }
}

TEST_CASE("dataset characteristics") {
  SUBCASE("hand-sized dataset") {
    std::vector<Document> docs;
    for (int i = 0; i < 10; ++i) docs.push_back({"d" + std::to_string(i), i < 5 ? std::vector<std::string>{"a", "b"}
                                                                               : std::vector<std::string>{"c", "d", "a", "e"}});
    std::vector<Query> qs;
    for (int i = 0; i < 5; ++i) qs.push_back({"q" + std::to_string(i), {"a", i % 2 ? "b" : "c"}});
    std::vector<QrelEntry> qrels;
    for (int i = 0; i < 5; ++i) qrels.push_back({"q" + std::to_string(i), "d" + std::to_string(i), 1});
    qrels.push_back({"q0", "d9", 0});
    const Dataset d("hand", docs, qs, qrels, {"q0", "q1"}, {"q2", "q3", "q4"});
    const BM25Index ix(d);
    const BM25Params bp{1.2, 0.75};
    const auto f = compute_features(d, ix, bp);
    CHECK(f.rs == doctest::Approx(std::log10(50.0)).epsilon(1e-15));
    CHECK(f.rd == doctest::Approx(std::log10(5.0 / 50.0)).epsilon(1e-15));
    CHECK(f.vocab == 5.0);
    CHECK(f.dl == 3.0);
    CHECK(f.ql == 2.0);
    double qd = 0.0;
    for (const auto& q : qs) qd += (ix.idf(q.tokens[0]) + ix.idf(q.tokens[1])) / 2.0;
    CHECK(f.qd == doctest::Approx(qd / 5.0).epsilon(1e-14));

    const auto run = prerank(d, ix, bp, d.test_queries(), 100);
    CHECK(f.map == doctest::Approx(evaluate(MetricId::parse("map@100"), run, d.qrel_map())).epsilon(1e-15));
    CHECK(f.sd >= 0.0);
  }

  SUBCASE("every pair relevant") {
    std::vector<Document> docs = {{"d0", {"x", "y"}}, {"d1", {"x", "z"}}};
    std::vector<Query> qs = {{"q0", {"x"}}, {"q1", {"x", "y"}}};
    std::vector<QrelEntry> qrels;
    for (const auto& q : qs)
      for (const auto& doc : docs) qrels.push_back({q.query_id, doc.doc_id, 1});
    const Dataset d("all", docs, qs, qrels, {"q0"}, {"q1"});
    const BM25Index ix(d);
    // Nothing non-relevant is retrieved, so only the score divergence is undefined.
    CHECK_THROWS_AS(compute_features(d, ix, BM25Params{1.2, 0.75}), FeatureError);
    CHECK(std::log10(double(d.relevant_count()) / 4.0) == 0.0);
  }

  SUBCASE("no relevant judgments") {
    std::vector<Document> docs = {{"d0", {"x"}}};
    std::vector<Query> qs = {{"q0", {"x"}}, {"q1", {"x"}}};
    const Dataset d("none", docs, qs, {{"q0", "d0", 0}}, {"q0"}, {"q1"});
    const BM25Index ix(d);
    CHECK_THROWS_AS(compute_features(d, ix, BM25Params{1.2, 0.75}), FeatureError);
  }

  SUBCASE("synthetic dataset MAP matches the metrics module") {
    SyntheticSpec s;
    s.n_docs = 300;
    s.n_queries = 15;
    s.relevance_density = 0.02;
    const Dataset d = generate_synthetic_domain("syn", 4, s);
    const BM25Index ix(d);
    const BM25Params bp{0.9, 0.5};
    const auto f = compute_features(d, ix, bp);
    const auto run = prerank(d, ix, bp, d.test_queries(), 100);
    const auto per = per_query(MetricId::parse("map@100"), run, d.qrel_map());
    double mean = 0.0, var = 0.0;
    for (const auto& [q, v] : per) mean += v;
    mean /= double(per.size());
    for (const auto& [q, v] : per) var += (v - mean) * (v - mean);
    CHECK(f.map == doctest::Approx(mean).epsilon(1e-14));
    CHECK(f.std_ap == doctest::Approx(std::sqrt(var / double(per.size()))).epsilon(1e-12));
    CHECK(f.rs == doctest::Approx(std::log10(300.0 * 15.0)).epsilon(1e-15));
  }
}
