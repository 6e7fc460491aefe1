#include "forgetbench/rankers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "forgetbench/error.hpp"
#include "forgetbench/rng.hpp"

namespace forgetbench {

using ad::ParamBinder;
using ad::ParamVector;
using ad::Value;

// ---------------------------------------------------------------------------
// EmbeddingTable

EmbeddingTable EmbeddingTable::random(std::vector<std::string> vocab, std::size_t dim, std::uint64_t seed,
                                      bool trainable) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  EmbeddingTable t;
  t.dim_ = dim;
  t.trainable_ = trainable;
  t.oov_seed_ = mix_seed(seed, 0x00F);
  t.matrix_.reserve(vocab.size() * dim);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    // Per-token streams keep a token's vector independent of the rest of the vocabulary.
    Rng rng(mix_seed(seed, fnv1a(vocab[i])));
    for (std::size_t c = 0; c < dim; ++c) t.matrix_.push_back(rng.uniform(-0.1, 0.1));
    t.index_.emplace(vocab[i], i);
  }
  t.tokens_ = std::move(vocab);
  return t;
}

EmbeddingTable EmbeddingTable::load_text(const std::filesystem::path& path, bool trainable, std::uint64_t oov_seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  EmbeddingTable t;
  t.trainable_ = trainable;
  t.oov_seed_ = oov_seed;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> row;
    for (double v; fields >> v;) row.push_back(v);
    if (!fields.eof()) throw ParseError(path.string(), line_no, "non-numeric embedding component");
    if (row.empty()) throw ParseError(path.string(), line_no, "token without vector");
    if (t.dim_ == 0) t.dim_ = row.size();
    if (row.size() != t.dim_) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(t.dim_) + " components, got " + std::to_string(row.size()));
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw ParseError(path.string(), line_no, "non-finite embedding component");
    }
    if (!t.index_.emplace(token, t.tokens_.size()).second) continue;  // first occurrence wins
    t.tokens_.push_back(token);
    t.matrix_.insert(t.matrix_.end(), row.begin(), row.end());
  }
  if (t.tokens_.empty()) throw ParseError(path.string(), line_no, "no embeddings found");
  return t;
}

std::optional<std::size_t> EmbeddingTable::row(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::vector(std::size_t r) const {
  return std::span<const double>(matrix_).subspan(r * dim_, dim_);
}

std::vector<double> EmbeddingTable::oov_vector(std::string_view token) const {
  Rng rng(mix_seed(oov_seed_, fnv1a(token)));
  std::vector<double> v(dim_);
  for (double& x : v) x = rng.uniform(-0.1, 0.1);
  return v;
}

std::uint64_t EmbeddingTable::content_hash() const {
  std::uint64_t h = fnv1a(trainable_ ? "trainable" : "frozen");
  h = fnv1a(std::to_string(dim_) + ":" + std::to_string(oov_seed_), h);
  for (const auto& t : tokens_) h = fnv1a(t + "\x1f", h);
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(matrix_.data()), matrix_.size() * sizeof(double)), h);
  return h;
}

// ---------------------------------------------------------------------------
// RankerConfig

std::string_view model_kind_name(ModelKind kind) { return kind == ModelKind::knrm ? "knrm" : "drmm"; }

ModelKind parse_model_kind(std::string_view text) {
  if (text == "knrm") return ModelKind::knrm;
  if (text == "drmm") return ModelKind::drmm;
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

RankerConfig RankerConfig::knrm(std::size_t embedding_dim) {
  RankerConfig c;
  c.kind = ModelKind::knrm;
  c.embedding_dim = embedding_dim;
  // Exact-match kernel at 1.0, then soft kernels spaced 0.2 apart.
  c.kernel_mu = {1.0, 0.9, 0.7, 0.5, 0.3, 0.1, -0.1, -0.3, -0.5, -0.7, -0.9};
  c.kernel_sigma.assign(c.kernel_mu.size(), 0.1);
  c.kernel_sigma[0] = 1e-3;
  return c;
}

RankerConfig RankerConfig::drmm(std::size_t embedding_dim) {
  RankerConfig c;
  c.kind = ModelKind::drmm;
  c.embedding_dim = embedding_dim;
  c.hist_bins = 30;
  c.hidden = {10, 1};
  return c;
}

void RankerConfig::validate() const {
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
  if (kind == ModelKind::knrm) {
    if (kernel_mu.empty() || kernel_mu.size() != kernel_sigma.size()) {
      throw ConfigError("KNRM needs matching non-empty mu and sigma lists");
    }
    for (std::size_t k = 1; k < kernel_mu.size(); ++k) {
      if (!(kernel_mu[k] < kernel_mu[k - 1])) throw ConfigError("KNRM kernel means must be strictly decreasing");
    }
    for (double s : kernel_sigma) {
      if (!(s > 0.0)) throw ConfigError("KNRM kernel widths must be positive");
    }
    if (!(kernel_eps > 0.0)) throw ConfigError("KNRM epsilon must be positive");
  } else {
    if (hist_bins < 2) throw ConfigError("DRMM needs at least 2 histogram bins");
    if (hidden.empty() || hidden.back() != 1) throw ConfigError("DRMM hidden layers must end with a width-1 layer");
    for (std::size_t h : hidden) {
      if (h == 0) throw ConfigError("DRMM layer widths must be positive");
    }
  }
}

std::string RankerConfig::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << model_kind_name(kind) << ";dim=" << embedding_dim;
  if (kind == ModelKind::knrm) {
    out << ";mu=";
    for (double m : kernel_mu) out << m << ',';
    out << ";sigma=";
    for (double s : kernel_sigma) out << s << ',';
    out << ";eps=" << kernel_eps;
  } else {
    out << ";bins=" << hist_bins << ";hidden=";
    for (std::size_t h : hidden) out << h << ',';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Ranker

Ranker::Ranker(RankerConfig config, EmbeddingTable embeddings)
    : config_(std::move(config)), embeddings_(std::move(embeddings)) {
  config_.validate();
  if (embeddings_.dim() != config_.embedding_dim) {
    throw ConfigError("embedding table has dimension " + std::to_string(embeddings_.dim()) + ", config expects " +
                      std::to_string(config_.embedding_dim));
  }
}

ParamVector Ranker::init_params(std::uint64_t seed) const {
  Rng rng(mix_seed(seed, 0x1417));
  auto uniform = [&rng](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-0.1, 0.1);
    return v;
  };
  ParamVector p;
  if (config_.kind == ModelKind::knrm) {
    p.add("knrm.w", config_.kernel_mu.size(), 1, uniform(config_.kernel_mu.size()));
    p.add("knrm.b", 1, 1, uniform(1));
  } else {
    std::size_t in = config_.hist_bins;
    for (std::size_t l = 0; l < config_.hidden.size(); ++l) {
      const std::size_t out = config_.hidden[l];
      p.add("drmm.w" + std::to_string(l), in, out, uniform(in * out));
      p.add("drmm.b" + std::to_string(l), 1, out, uniform(out));
      in = out;
    }
    p.add("drmm.gate", 1, 1, uniform(1));
  }
  if (embeddings_.trainable()) p.add("embedding", embeddings_.size(), embeddings_.dim(), embeddings_.matrix());
  return p;
}

Value Ranker::embed(ParamBinder& binder, std::span<const std::string> tokens) const {
  const std::size_t d = embeddings_.dim();
  const bool trainable = embeddings_.trainable() && binder.params().contains("embedding");

  std::vector<std::size_t> known;  // unique table rows, first-appearance order
  std::vector<std::size_t> known_slot;
  std::vector<std::string_view> oov;
  std::vector<std::size_t> oov_slot;
  std::vector<std::pair<bool, std::size_t>> where;  // (is_known, slot)
  where.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto r = embeddings_.row(t)) {
      auto it = std::find(known.begin(), known.end(), *r);
      if (it == known.end()) {
        known.push_back(*r);
        where.emplace_back(true, known.size() - 1);
      } else {
        where.emplace_back(true, static_cast<std::size_t>(it - known.begin()));
      }
    } else {
      auto it = std::find(oov.begin(), oov.end(), std::string_view(t));
      if (it == oov.end()) {
        oov.push_back(t);
        where.emplace_back(false, oov.size() - 1);
      } else {
        where.emplace_back(false, static_cast<std::size_t>(it - oov.begin()));
      }
    }
  }

  std::vector<Value> parts;
  if (!known.empty()) {
    if (trainable) {
      parts.push_back(binder.rows("embedding", known));
    } else {
      std::vector<double> data;
      for (std::size_t r : known) {
        auto v = embeddings_.vector(r);
        data.insert(data.end(), v.begin(), v.end());
      }
      parts.push_back(Value::constant(known.size(), d, std::move(data)));
    }
  }
  if (!oov.empty()) {
    std::vector<double> data;
    for (auto t : oov) {
      auto v = embeddings_.oov_vector(t);
      data.insert(data.end(), v.begin(), v.end());
    }
    parts.push_back(Value::constant(oov.size(), d, std::move(data)));
  }
  const Value source = parts.size() == 1 ? parts.front() : ad::concat_rows(parts);
  std::vector<std::size_t> order;
  order.reserve(tokens.size());
  for (auto [is_known, slot] : where) order.push_back(is_known ? slot : known.size() + slot);
  return ad::select_rows(source, order);
}

Value knrm_forward(const Ranker& ranker, ParamBinder& binder, std::span<const std::string> query,
                   std::span<const std::string> doc) {
  if (query.empty()) throw ScoringError("empty query");
  if (doc.empty()) throw ScoringError("empty document");
  const auto& cfg = ranker.config();
  const Value sim = ad::cosine_similarity_matrix(ranker.embed(binder, query), ranker.embed(binder, doc));

  std::vector<Value> features;
  features.reserve(cfg.kernel_mu.size());
  const Value eps(cfg.kernel_eps);
  for (std::size_t k = 0; k < cfg.kernel_mu.size(); ++k) {
    const double scale = -1.0 / (2.0 * cfg.kernel_sigma[k] * cfg.kernel_sigma[k]);
    const Value kernel = ad::exp(ad::square(sim - Value(cfg.kernel_mu[k])) * Value(scale));
    features.push_back(ad::sum(ad::log(ad::sum_rows(kernel) + eps)));
  }
  const Value phi = ad::concat_rows(features);
  return ad::tanh(ad::dot(binder.array("knrm.w"), phi) + binder.array("knrm.b"));
}

std::vector<double> log_count_histogram(std::span<const double> similarities, std::size_t bins) {
  std::vector<double> counts(bins, 0.0);
  for (double s : similarities) {
    const double pos = (std::clamp(s, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(bins);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(pos));
    counts[b] += 1.0;
  }
  for (double& c : counts) c = std::log1p(c);
  return counts;
}

Value drmm_forward(const Ranker& ranker, ParamBinder& binder, std::span<const std::string> query,
                   std::span<const std::string> doc, const IdfFn& idf) {
  if (query.empty()) throw ScoringError("empty query");
  if (doc.empty()) throw ScoringError("empty document");
  const auto& cfg = ranker.config();

  // Histograms are piecewise constant in the embeddings, so they enter the graph as constants.
  ParamBinder frozen(binder.params(), false);
  const Value sim = ad::cosine_similarity_matrix(ranker.embed(frozen, query), ranker.embed(frozen, doc));
  const std::size_t q = query.size();
  const std::size_t n = doc.size();
  std::vector<double> hist;
  hist.reserve(q * cfg.hist_bins);
  for (std::size_t i = 0; i < q; ++i) {
    auto row = log_count_histogram(sim.data().subspan(i * n, n), cfg.hist_bins);
    hist.insert(hist.end(), row.begin(), row.end());
  }
  Value h = Value::constant(q, cfg.hist_bins, std::move(hist));
  for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
    h = ad::tanh(ad::matmul(h, binder.array("drmm.w" + std::to_string(l))) +
                 binder.array("drmm.b" + std::to_string(l)));
  }
  std::vector<double> idfs(q);
  for (std::size_t i = 0; i < q; ++i) idfs[i] = idf ? idf(query[i]) : 0.0;
  const Value gates = ad::softmax(Value::constant(q, 1, std::move(idfs)) * binder.array("drmm.gate"));
  return ad::dot(gates, h);
}

Value Ranker::score(ParamBinder& binder, std::span<const std::string> query, std::span<const std::string> doc,
                    const IdfFn& idf) const {
  return config_.kind == ModelKind::knrm ? knrm_forward(*this, binder, query, doc)
                                         : drmm_forward(*this, binder, query, doc, idf);
}

double Ranker::score_value(const ParamVector& params, std::span<const std::string> query,
                           std::span<const std::string> doc, const IdfFn& idf) const {
  ParamBinder binder(params, false);
  return score(binder, query, doc, idf).item();
}

// ---------------------------------------------------------------------------

double combined_score(double s_nn, double s_bm25, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (alpha == 1.0) return s_nn;
  if (alpha == 0.0) return s_bm25;
  return alpha * s_nn + (1.0 - alpha) * s_bm25;
}

IdfFn idf_of(const BM25Index& index) {
  return [&index](std::string_view t) { return index.idf(t); };
}

namespace {

std::vector<ScoredDoc> rerank_list(const Ranker& ranker, const ParamVector& params, const Dataset& dataset,
                                   const IdfFn& idf, const Query& query, std::vector<ScoredDoc> top, double alpha) {
  if (top.empty()) return top;
  double lo = top.front().score, hi = top.front().score;
  for (const auto& h : top) {
    lo = std::min(lo, h.score);
    hi = std::max(hi, h.score);
  }
  const double span = hi - lo;
  for (auto& h : top) {
    const double bm25 = span > 0.0 ? (h.score - lo) / span : 0.0;
    const double nn = alpha == 0.0 ? 0.0 : ranker.score_value(params, query.tokens, dataset.document(h.doc_id).tokens, idf);
    h.score = combined_score(nn, bm25, alpha);
  }
  sort_ranking(top);
  return top;
}

}  // namespace

std::vector<ScoredDoc> rerank(const Ranker& ranker, const ParamVector& params, const Dataset& dataset,
                              const BM25Index& index, const BM25Params& bm25, const Query& query, std::size_t k,
                              double alpha) {
  if (k == 0) throw ConfigError("rerank depth k must be >= 1");
  combined_score(0.0, 0.0, alpha);
  return rerank_list(ranker, params, dataset, idf_of(index), query, search_topk(index, bm25, query, k), alpha);
}

std::vector<Candidates> rerank_queries(const Ranker& ranker, const ParamVector& params, const Dataset& dataset,
                                       const BM25Index& index, const BM25Params& bm25,
                                       const std::vector<std::string>& query_ids, std::size_t k, double alpha) {
  std::vector<Candidates> out;
  out.reserve(query_ids.size());
  for (const auto& id : query_ids) {
    out.push_back({id, rerank(ranker, params, dataset, index, bm25, dataset.query(id), k, alpha)});
  }
  return out;
}

std::vector<Candidates> rerank_candidates(const Ranker& ranker, const ParamVector& params, const Dataset& dataset,
                                          const BM25Index& index, const std::vector<Candidates>& prerank,
                                          double alpha) {
  combined_score(0.0, 0.0, alpha);
  const IdfFn idf = idf_of(index);
  std::vector<Candidates> out;
  out.reserve(prerank.size());
  for (const auto& c : prerank) {
    out.push_back({c.query_id, rerank_list(ranker, params, dataset, idf, dataset.query(c.query_id), c.ranking, alpha)});
  }
  return out;
}

}  // namespace forgetbench
