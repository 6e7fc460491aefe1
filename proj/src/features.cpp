#include "forgetbench/features.hpp"

#include <algorithm>
#include <cmath>

#include "forgetbench/error.hpp"
#include "forgetbench/metrics.hpp"

namespace forgetbench {

const std::array<std::string_view, FeatureVector::size>& FeatureVector::names() {
  static const std::array<std::string_view, size> n = {"RS", "RD", "SD", "Vocab", "DL", "QL", "QD", "MAP", "std-AP"};
  return n;
}

const std::array<std::string_view, FeatureVector::size>& FeatureVector::descriptions() {
  static const std::array<std::string_view, size> d = {
      "Retrieval space size: log10(D x Q)",
      "Relevance density: log10(Qrels / (D x Q))",
      "Score relevance divergence: KL(RSV_D+ || RSV_D-)",
      "Size of the vocabulary",
      "Average length of documents",
      "Average length of queries",
      "Average query difficulty: avg_q(mean idf of q)",
      "Effectiveness of BM25: MAP",
      "Variation of BM25 effectiveness: std_q(AP_q)",
  };
  return d;
}

std::array<double, FeatureVector::size> FeatureVector::values() const {
  return {rs, rd, sd, vocab, dl, ql, qd, map, std_ap};
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_divergence: distributions differ in length");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) throw DomainError("kl_divergence: q has zero mass where p does not");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

double histogram_kl(std::span<const double> pos, std::span<const double> neg, std::size_t bins, double smoothing) {
  if (pos.empty() || neg.empty()) throw FeatureError("score divergence needs scores on both sides");
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  double lo = pos.front();
  double hi = pos.front();
  for (auto side : {pos, neg}) {
    for (double s : side) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  auto histogram = [&](std::span<const double> xs) {
    std::vector<double> h(bins, 0.0);
    for (double s : xs) {
      std::size_t b = width > 0.0 ? static_cast<std::size_t>((s - lo) / width) : 0;
      h[std::min(b, bins - 1)] += 1.0;
    }
    double total = 0.0;
    for (double& v : h) {
      v = v / static_cast<double>(xs.size()) + smoothing;
      total += v;
    }
    for (double& v : h) v /= total;
    return h;
  };
  return kl_divergence(histogram(pos), histogram(neg));
}

double kl_rsv(const BM25Index& index, const BM25Params& params, const Dataset& dataset, std::size_t bins,
              std::size_t depth) {
  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& qid : dataset.test_queries()) {
    for (const auto& hit : search_topk(index, params, dataset.query(qid), depth)) {
      (dataset.grade(qid, hit.doc_id) >= 1 ? pos : neg).push_back(hit.score);
    }
  }
  if (pos.empty()) throw FeatureError(dataset.name() + ": no relevant document retrieved for the score divergence");
  if (neg.empty()) throw FeatureError(dataset.name() + ": no non-relevant document retrieved for the score divergence");
  return histogram_kl(pos, neg, bins);
}

FeatureVector compute_features(const Dataset& dataset, const BM25Index& index, const BM25Params& params,
                               std::size_t kl_bins) {
  if (dataset.test_queries().empty()) throw FeatureError(dataset.name() + ": no test queries");
  FeatureVector f;
  f.dataset = dataset.name();
  const double n_docs = static_cast<double>(dataset.documents().size());
  const double n_queries = static_cast<double>(dataset.queries().size());
  const double space = n_docs * n_queries;
  const double relevant = static_cast<double>(dataset.relevant_count());
  if (relevant == 0.0) throw FeatureError(dataset.name() + ": relevance density undefined without relevant qrels");
  f.rs = std::log10(space);
  f.rd = std::log10(relevant / space);
  f.vocab = static_cast<double>(index.vocabulary_size());

  double doc_tokens = 0.0;
  for (const auto& d : dataset.documents()) doc_tokens += static_cast<double>(d.tokens.size());
  f.dl = doc_tokens / n_docs;

  double query_tokens = 0.0;
  double difficulty = 0.0;
  for (const auto& q : dataset.queries()) {
    query_tokens += static_cast<double>(q.tokens.size());
    double idf_sum = 0.0;
    for (const auto& t : q.tokens) idf_sum += index.idf(t);
    difficulty += q.tokens.empty() ? 0.0 : idf_sum / static_cast<double>(q.tokens.size());
  }
  f.ql = query_tokens / n_queries;
  f.qd = difficulty / n_queries;

  const MetricId ap = MetricId::parse("map@100");
  const auto run = prerank(dataset, index, params, dataset.test_queries(), ap.cutoff);
  const auto per = per_query(ap, run, dataset.qrel_map());
  if (per.empty()) throw FeatureError(dataset.name() + ": no test query has a relevant judgment");
  double sum = 0.0;
  for (const auto& [q, v] : per) sum += v;
  f.map = sum / static_cast<double>(per.size());
  double var = 0.0;
  for (const auto& [q, v] : per) var += (v - f.map) * (v - f.map);
  f.std_ap = std::sqrt(var / static_cast<double>(per.size()));

  f.sd = kl_rsv(index, params, dataset, kl_bins, ap.cutoff);
  return f;
}

}  // namespace forgetbench
