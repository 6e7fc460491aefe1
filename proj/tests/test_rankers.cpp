#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "forgetbench/error.hpp"
#include "forgetbench/rankers.hpp"
#include "forgetbench/rng.hpp"

using namespace forgetbench;
using ad::ParamBinder;
using ad::ParamVector;

namespace {

std::vector<double> vec_of(const EmbeddingTable& t, const std::string& tok) {
  if (auto r = t.row(tok)) {
    auto v = t.vector(*r);
    return {v.begin(), v.end()};
  }
  return t.oov_vector(tok);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Scalar recomputation of the kernel-pooling score.
double knrm_oracle(const RankerConfig& cfg, const EmbeddingTable& t, const std::vector<double>& w, double b,
                   const std::vector<std::string>& q, const std::vector<std::string>& d) {
  double s = b;
  for (std::size_t k = 0; k < cfg.kernel_mu.size(); ++k) {
    double phi = 0.0;
    for (const auto& qi : q) {
      double soft_tf = 0.0;
      for (const auto& dj : d) {
        const double m = cosine(vec_of(t, qi), vec_of(t, dj));
        soft_tf += std::exp(-(m - cfg.kernel_mu[k]) * (m - cfg.kernel_mu[k]) /
                            (2.0 * cfg.kernel_sigma[k] * cfg.kernel_sigma[k]));
      }
      phi += std::log(cfg.kernel_eps + soft_tf);
    }
    s += w[k] * phi;
  }
  return std::tanh(s);
}

double drmm_oracle(const RankerConfig& cfg, const EmbeddingTable& t, const ParamVector& p,
                   const std::vector<std::string>& q, const std::vector<std::string>& d, const std::vector<double>& idf) {
  const std::size_t bins = cfg.hist_bins;
  double gate_w = p.array("drmm.gate")[0];
  std::vector<double> logits;
  for (double x : idf) logits.push_back(gate_w * x);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - mx));
  double score = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> h(bins, 0.0);
    for (const auto& dj : d) {
      const double m = cosine(vec_of(t, q[i]), vec_of(t, dj));
      std::size_t b = static_cast<std::size_t>((m + 1.0) / 2.0 * bins);
      if (b >= bins) b = bins - 1;
      h[b] += 1.0;
    }
    for (double& c : h) c = std::log(1.0 + c);
    for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
      const auto w = p.array("drmm.w" + std::to_string(l));
      const auto bias = p.array("drmm.b" + std::to_string(l));
      const std::size_t out = cfg.hidden[l];
      std::vector<double> next(out);
      for (std::size_t o = 0; o < out; ++o) {
        double a = bias[o];
        for (std::size_t r = 0; r < h.size(); ++r) a += h[r] * w[r * out + o];
        next[o] = std::tanh(a);
      }
      h = next;
    }
    score += logits[i] / z * h[0];
  }
  return score;
}

std::vector<std::string> vocab(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("t" + std::to_string(i));
  return v;
}

}  // namespace

TEST_CASE("configuration") {
  const auto k = RankerConfig::knrm(8);
  CHECK(k.kernel_mu.size() == 11);
  CHECK(k.kernel_mu[0] == 1.0);
  CHECK(k.kernel_mu[10] == doctest::Approx(-0.9));
  CHECK(k.kernel_sigma[0] == 1e-3);
  CHECK(k.kernel_sigma[5] == 0.1);
  const auto d = RankerConfig::drmm(8);
  CHECK(d.hist_bins == 30);
  CHECK(d.hidden == std::vector<std::size_t>{10, 1});

  RankerConfig bad = k;
  std::swap(bad.kernel_mu[0], bad.kernel_mu[1]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = d;
  bad.hist_bins = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(parse_model_kind("pacrr"), ConfigError);
  CHECK_THROWS_AS(Ranker(RankerConfig::knrm(4), EmbeddingTable::random(vocab(3), 8, 1)), ConfigError);
}

TEST_CASE("embedding tables") {
  const auto t = EmbeddingTable::random({"b", "a", "b"}, 4, 9);
  CHECK(t.size() == 2);
  CHECK(t.tokens() == std::vector<std::string>{"a", "b"});
  CHECK(t.oov_vector("zz") == t.oov_vector("zz"));
  CHECK(t.oov_vector("zz") != t.oov_vector("yy"));
  for (double x : t.matrix()) CHECK(std::fabs(x) <= 0.1);

  const auto dir = std::filesystem::temp_directory_path() / "fb_rankers";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "vec.txt") << "apple 0.5 -1 2\npear 1 1 1\n";
  const auto loaded = EmbeddingTable::load_text(dir / "vec.txt");
  CHECK(loaded.dim() == 3);
  CHECK(!loaded.trainable());
  CHECK(loaded.vector(*loaded.row("apple"))[1] == -1.0);
  std::ofstream(dir / "bad.txt") << "apple 0.5 -1 2\npear 1 1\n";
  CHECK_THROWS_AS(EmbeddingTable::load_text(dir / "bad.txt"), ParseError);
}

TEST_CASE("KNRM") {
  const auto cfg = RankerConfig::knrm(6);
  const Ranker r(cfg, EmbeddingTable::random(vocab(20), 6, 4, false));
  ParamVector p = r.init_params(1);
  CHECK(p.slots().size() == 2);
  CHECK(p.slot("knrm.w").rows == 11);

  SUBCASE("exact-match kernel is 1 for identical tokens") {
    // Only the exact-match kernel is weighted: s = tanh(log(1 + eps)).
    std::fill(p.array("knrm.w").begin(), p.array("knrm.w").end(), 0.0);
    p.array("knrm.w")[0] = 1.0;
    p.array("knrm.b")[0] = 0.0;
    const std::vector<std::string> q{"t3"};
    CHECK(r.score_value(p, q, q, nullptr) == doctest::Approx(std::tanh(std::log(1.0 + 1e-10))));
  }
  SUBCASE("zero weights give zero") {
    for (double& x : p.values()) x = 0.0;
    CHECK(r.score_value(p, std::vector<std::string>{"t1", "t2"}, std::vector<std::string>{"t5"}, nullptr) == 0.0);
  }
  SUBCASE("direct formula oracle, including an unseen token") {
    Rng rng(2);
    for (double& x : p.values()) x = rng.uniform(-0.05, 0.05);
    const std::vector<std::string> q{"t1", "unseen"}, d{"t1", "t7", "t9"};
    const auto w = p.array("knrm.w");
    CHECK(r.score_value(p, q, d, nullptr) ==
          doctest::Approx(knrm_oracle(cfg, r.embeddings(), {w.begin(), w.end()}, p.array("knrm.b")[0], q, d))
              .epsilon(1e-12));
  }
  SUBCASE("output stays inside (-1, 1)") {
    Rng rng(6);
    for (int i = 0; i < 50; ++i) {
      for (double& x : p.values()) x = rng.uniform(-0.02, 0.02);
      const double s = r.score_value(p, std::vector<std::string>{"t" + std::to_string(rng.index(20))},
                                     std::vector<std::string>{"t1", "t2", "t3"}, nullptr);
      CHECK(std::fabs(s) < 1.0);
    }
  }
  CHECK_THROWS_AS(r.score_value(p, std::vector<std::string>{}, std::vector<std::string>{"t1"}, nullptr), ScoringError);
}

TEST_CASE("property: KNRM gradients match finite differences") {
  const Ranker r(RankerConfig::knrm(5), EmbeddingTable::random(vocab(12), 5, 8, true));
  Rng rng(10);
  for (int draw = 0; draw < 20; ++draw) {
    ParamVector p = r.init_params(static_cast<std::uint64_t>(draw));
    const std::vector<std::string> q{"t" + std::to_string(rng.index(12)), "t" + std::to_string(rng.index(12))};
    std::vector<std::string> d;
    for (int j = 0; j < 4; ++j) d.push_back("t" + std::to_string(rng.index(12)));
    auto f = [&](ParamBinder& b) { return r.score(b, q, d, nullptr); };
    const auto report = ad::finite_diff_check(f, p, 1e-5, 1e-4);
    CHECK_MESSAGE(report.passed, "draw " << draw << ": " << report.max_rel_error);
  }
}

TEST_CASE("DRMM") {
  const auto cfg = RankerConfig::drmm(6);
  const Ranker r(cfg, EmbeddingTable::random(vocab(20), 6, 5, false));
  const ParamVector p = r.init_params(3);
  CHECK(p.slot("drmm.w0").rows == 30);
  CHECK(p.slot("drmm.w0").cols == 10);
  CHECK(p.slot("drmm.w1").cols == 1);

  SUBCASE("histogram of one bin") {
    const std::vector<double> sims{0.3, 0.31, 0.32};
    const auto h = log_count_histogram(sims, 30);
    const std::size_t bin = static_cast<std::size_t>((0.3 + 1.0) / 2.0 * 30);
    for (std::size_t b = 0; b < 30; ++b) CHECK(h[b] == (b == bin ? std::log(4.0) : 0.0));
    CHECK(log_count_histogram(std::vector<double>{1.0}, 30)[29] == std::log(2.0));
  }
  SUBCASE("direct formula oracle on a 2 x 4 case") {
    const std::vector<std::string> q{"t1", "t2"}, d{"t2", "t4", "t5", "t1"};
    const IdfFn idf = [](std::string_view t) { return t == "t1" ? 1.5 : 0.5; };
    CHECK(r.score_value(p, q, d, idf) ==
          doctest::Approx(drmm_oracle(cfg, r.embeddings(), p, q, d, {1.5, 0.5})).epsilon(1e-12));
  }
  SUBCASE("uniform idf gives equal gates") {
    // With identical query terms each gate is 1/|q|, so the score equals one term's output.
    const std::vector<std::string> one{"t1"}, three{"t1", "t1", "t1"}, d{"t3", "t1"};
    const IdfFn idf = [](std::string_view) { return 2.0; };
    CHECK(r.score_value(p, three, d, idf) == doctest::Approx(r.score_value(p, one, d, idf)).epsilon(1e-14));
  }
  SUBCASE("gates are a probability vector") {
    const ad::Value g =
        ad::softmax(ad::Value::constant(4, 1, {0.1, 3.0, -2.0, 7.5}) * ad::Value(p.array("drmm.gate")[0]));
    double total = 0.0;
    for (double x : g.data()) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("property: DRMM gradients match finite differences") {
  const Ranker r(RankerConfig::drmm(5), EmbeddingTable::random(vocab(12), 5, 8, false));
  const IdfFn idf = [](std::string_view t) { return 0.1 * static_cast<double>(t.size()) + (t == "t3" ? 1.0 : 0.0); };
  Rng rng(12);
  for (int draw = 0; draw < 20; ++draw) {
    const ParamVector p = r.init_params(100 + static_cast<std::uint64_t>(draw));
    const std::vector<std::string> q{"t3", "t" + std::to_string(rng.index(12))};
    std::vector<std::string> d;
    for (int j = 0; j < 4; ++j) d.push_back("t" + std::to_string(rng.index(12)));
    auto f = [&](ParamBinder& b) { return r.score(b, q, d, idf); };
    const auto report = ad::finite_diff_check(f, p, 1e-5, 1e-4);
    CHECK_MESSAGE(report.passed, "draw " << draw << ": " << report.max_rel_error);
  }
}

TEST_CASE("score interpolation") {
  CHECK(combined_score(0.2, 0.4, 1.0) == 0.2);
  CHECK(combined_score(0.2, 0.4, 0.0) == 0.4);
  CHECK(combined_score(0.2, 0.4, 0.5) == doctest::Approx(0.3));
  CHECK_THROWS_AS(combined_score(0.2, 0.4, 1.5), ConfigError);
  CHECK_THROWS_AS(combined_score(0.2, 0.4, -0.1), ConfigError);
}

TEST_CASE("re-ranking") {
  SyntheticSpec spec;
  spec.n_docs = 60;
  spec.n_queries = 6;
  spec.vocab_size = 40;
  spec.split = "1/1";
  const Dataset ds = generate_synthetic_domain("rr", 3, spec);
  const BM25Index idx(ds);
  const BM25Params bp{1.2, 0.75};
  std::vector<std::string> tokens;
  for (const auto& d : ds.documents()) tokens.insert(tokens.end(), d.tokens.begin(), d.tokens.end());
  const Ranker r(RankerConfig::knrm(6), EmbeddingTable::random(tokens, 6, 1, false));
  const ParamVector p = r.init_params(2);
  const Query& q = ds.queries().front();

  SUBCASE("alpha = 0 keeps the BM25 order") {
    const auto base = search_topk(idx, bp, q, 10);
    const auto got = rerank(r, p, ds, idx, bp, q, 10, 0.0);
    REQUIRE(got.size() == base.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].doc_id == base[i].doc_id);
  }
  SUBCASE("k = 1") { CHECK(rerank(r, p, ds, idx, bp, q, 1, 0.5).size() == 1); }
  SUBCASE("exhaustive scoring oracle at alpha = 0.7") {
    const auto base = search_topk(idx, bp, q, 10);
    double lo = base.back().score, hi = base.front().score;
    std::vector<ScoredDoc> expect;
    for (const auto& h : base) {
      const double nn = r.score_value(p, q.tokens, ds.document(h.doc_id).tokens, idf_of(idx));
      const double bm = hi > lo ? (h.score - lo) / (hi - lo) : 0.0;
      expect.push_back({h.doc_id, 0.7 * nn + 0.3 * bm});
    }
    std::sort(expect.begin(), expect.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
      return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    const auto got = rerank(r, p, ds, idx, bp, q, 10, 0.7);
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].doc_id == expect[i].doc_id);
      CHECK(got[i].score == doctest::Approx(expect[i].score).epsilon(1e-12));
    }
  }
  SUBCASE("property: scaling the neural score keeps the alpha = 1 order") {
    // Scaling w and b together scales the pre-activation; tanh is monotone, so the order holds.
    ParamVector scaled = p;
    for (double& x : scaled.values()) x *= 3.0;
    const auto a = rerank(r, p, ds, idx, bp, q, 20, 1.0);
    const auto b = rerank(r, scaled, ds, idx, bp, q, 20, 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].doc_id == b[i].doc_id);
  }
  CHECK_THROWS_AS(rerank(r, p, ds, idx, bp, q, 0, 0.5), ConfigError);
}
