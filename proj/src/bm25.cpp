#include "forgetbench/bm25.hpp"

#include <algorithm>
#include <cmath>

#include "forgetbench/error.hpp"
#include "forgetbench/metrics.hpp"
#include "forgetbench/rng.hpp"

namespace forgetbench {

void BM25Params::validate() const {
  if (!(k1 >= 0.0)) throw ConfigError("BM25 k1 must be >= 0");
  if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("BM25 b must lie in [0, 1]");
}

BM25Index::BM25Index(const Dataset& dataset) : BM25Index(dataset.documents()) {}

BM25Index::BM25Index(const std::vector<Document>& documents) {
  if (documents.empty()) throw ValidationError("cannot index an empty document collection");
  doc_ids_.reserve(documents.size());
  doc_lengths_.reserve(documents.size());
  std::uint64_t total_len = 0;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    const auto& d = documents[i];
    if (!doc_pos_.emplace(d.doc_id, i).second) {
      throw ValidationError("duplicate doc_id '" + d.doc_id + "' while building index");
    }
    doc_ids_.push_back(d.doc_id);
    doc_lengths_.push_back(static_cast<std::uint32_t>(d.tokens.size()));
    total_len += d.tokens.size();

    std::unordered_map<std::string_view, std::uint32_t> tf;
    for (const auto& t : d.tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      postings_[std::string(term)].push_back({static_cast<std::uint32_t>(i), count});
    }
  }
  avg_doc_len_ = static_cast<double>(total_len) / static_cast<double>(documents.size());
  for (auto& [term, list] : postings_) {
    std::sort(list.begin(), list.end(), [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
  }
}

const std::vector<Posting>& BM25Index::postings(std::string_view term) const {
  static const std::vector<Posting> empty;
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? empty : it->second;
}

std::size_t BM25Index::doc_freq(std::string_view term) const { return postings(term).size(); }

double BM25Index::idf(std::string_view term) const {
  const double n = static_cast<double>(n_docs());
  const double df = static_cast<double>(doc_freq(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::size_t BM25Index::doc_position(std::string_view doc_id) const {
  auto it = doc_pos_.find(std::string(doc_id));
  if (it == doc_pos_.end()) throw LookupError("document '" + std::string(doc_id) + "' is not indexed");
  return it->second;
}

std::uint32_t BM25Index::term_freq(std::string_view term, std::size_t position) const {
  const auto& list = postings(term);
  auto it = std::lower_bound(list.begin(), list.end(), position,
                             [](const Posting& p, std::size_t pos) { return p.doc < pos; });
  return (it != list.end() && it->doc == position) ? it->tf : 0;
}

namespace {

double term_weight(double idf, double tf, double len, double avg_len, const BM25Params& p) {
  if (tf <= 0.0) return 0.0;
  return idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * len / avg_len));
}

}  // namespace

double bm25_score(const BM25Index& index, const BM25Params& params, const Query& query, std::string_view doc_id) {
  const std::size_t pos = index.doc_position(doc_id);
  const double len = index.doc_lengths()[pos];
  double score = 0.0;
  for (const auto& t : query.tokens) {
    score += term_weight(index.idf(t), index.term_freq(t, pos), len, index.avg_doc_len(), params);
  }
  return score;
}

std::vector<ScoredDoc> search_topk(const BM25Index& index, const BM25Params& params, const Query& query,
                                   std::size_t k) {
  if (k == 0) throw ConfigError("search depth k must be >= 1");
  std::unordered_map<std::uint32_t, double> acc;
  for (const auto& t : query.tokens) {
    const double idf = index.idf(t);
    for (const auto& p : index.postings(t)) {
      acc[p.doc] += term_weight(idf, p.tf, index.doc_lengths()[p.doc], index.avg_doc_len(), params);
    }
  }
  std::vector<ScoredDoc> hits;
  hits.reserve(acc.size());
  for (const auto& [doc, score] : acc) {
    if (score > 0.0) hits.push_back({index.doc_ids()[doc], score});
  }
  sort_ranking(hits);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<Candidates> prerank(const Dataset& dataset, const BM25Index& index, const BM25Params& params,
                                const std::vector<std::string>& query_ids, std::size_t k) {
  std::vector<Candidates> out;
  out.reserve(query_ids.size());
  for (const auto& id : query_ids) out.push_back({id, search_topk(index, params, dataset.query(id), k)});
  return out;
}

BM25Params grid_search_bm25(const Dataset& dataset, const BM25Index& index, const BM25Grid& grid,
                            std::string_view metric_name) {
  const MetricId metric = MetricId::parse(metric_name);
  if (grid.k1.empty() || grid.b.empty()) throw ConfigError("BM25 grid is empty");

  std::vector<std::string> judged;
  for (const auto& id : dataset.train_queries()) {
    for (const auto& [doc, g] : dataset.judgments(id)) {
      if (g >= 1) {
        judged.push_back(id);
        break;
      }
    }
  }
  if (judged.empty()) throw ConfigError(dataset.name() + ": no judged training queries for BM25 grid search");

  std::vector<BM25Params> points;
  for (double k1 : grid.k1) {
    for (double b : grid.b) {
      BM25Params p{k1, b};
      p.validate();
      points.push_back(p);
    }
  }
  std::sort(points.begin(), points.end(),
            [](const BM25Params& x, const BM25Params& y) { return x.k1 != y.k1 ? x.k1 < y.k1 : x.b < y.b; });

  const std::size_t depth = std::max<std::size_t>(metric.cutoff, 100);
  BM25Params best = points.front();
  double best_value = -1.0;
  for (const auto& p : points) {
    const double value = evaluate(metric, prerank(dataset, index, p, judged, depth), dataset.qrel_map());
    if (value > best_value) {
      best_value = value;
      best = p;
    }
  }
  return best;
}

std::vector<TrainingPair> sample_training_pairs(const Dataset& dataset, const std::vector<Candidates>& candidates,
                                                std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x9A12));
  std::vector<TrainingPair> pairs;
  std::vector<std::size_t> eligible;
  for (const auto& c : candidates) {
    const auto& judged = dataset.judgments(c.query_id);
    if (judged.empty()) continue;
    std::vector<int> grades;
    grades.reserve(c.ranking.size());
    for (const auto& hit : c.ranking) {
      auto it = judged.find(hit.doc_id);
      grades.push_back(it == judged.end() ? 0 : it->second);
    }
    for (std::size_t i = 0; i < c.ranking.size(); ++i) {
      if (grades[i] < 1) continue;
      eligible.clear();
      for (std::size_t j = 0; j < c.ranking.size(); ++j) {
        if (grades[j] < grades[i]) eligible.push_back(j);
      }
      if (eligible.empty()) continue;
      const std::size_t neg = eligible[rng.index(eligible.size())];
      pairs.push_back({c.query_id, c.ranking[i].doc_id, c.ranking[neg].doc_id});
    }
  }
  return pairs;
}

std::vector<TrainingPair> sample_training_pairs(const Dataset& dataset, const BM25Index& index,
                                                const BM25Params& params, std::size_t k, std::uint64_t seed) {
  return sample_training_pairs(dataset, prerank(dataset, index, params, dataset.train_queries(), k), seed);
}

}  // namespace forgetbench
