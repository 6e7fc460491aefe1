#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forgetbench/corpus.hpp"
#include "forgetbench/ranking.hpp"

namespace forgetbench {

struct BM25Params {
  double k1 = 1.2;
  double b = 0.75;

  void validate() const;
  bool operator==(const BM25Params&) const = default;
};

struct Posting {
  std::uint32_t doc = 0;  // position in doc_ids()
  std::uint32_t tf = 0;
};

/// Inverted index over one dataset's documents. Immutable after build.
class BM25Index {
 public:
  explicit BM25Index(const Dataset& dataset);
  BM25Index(const std::vector<Document>& documents);

  std::size_t n_docs() const noexcept { return doc_ids_.size(); }
  double avg_doc_len() const noexcept { return avg_doc_len_; }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }

  /// Document frequency; 0 for terms absent from the corpus.
  std::size_t doc_freq(std::string_view term) const;
  /// ln(1 + (N - df + 0.5) / (df + 0.5)).
  double idf(std::string_view term) const;
  const std::vector<Posting>& postings(std::string_view term) const;
  std::size_t vocabulary_size() const noexcept { return postings_.size(); }

  /// Position of doc_id in doc_ids(); throws LookupError if absent.
  std::size_t doc_position(std::string_view doc_id) const;
  std::uint32_t doc_length(std::string_view doc_id) const { return doc_lengths_[doc_position(doc_id)]; }
  std::uint32_t term_freq(std::string_view term, std::size_t doc_position) const;

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  std::unordered_map<std::string, std::size_t> doc_pos_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  double avg_doc_len_ = 0.0;
};

/// Okapi BM25 with the non-negative idf. Query tokens are summed as a
/// sequence, so a repeated query term contributes once per occurrence.
double bm25_score(const BM25Index& index, const BM25Params& params, const Query& query,
                  std::string_view doc_id);

/// Descending by score, ties by ascending doc_id; only documents with a
/// positive score; at most k entries.
std::vector<ScoredDoc> search_topk(const BM25Index& index, const BM25Params& params, const Query& query,
                                   std::size_t k);

struct BM25Grid {
  std::vector<double> k1 = {0.6, 0.9, 1.2, 1.5, 2.0};
  std::vector<double> b = {0.3, 0.5, 0.75, 0.9};
};

/// Exhaustive search over the grid maximizing `metric` (default map@100) on
/// the dataset's judged training queries. Ties keep the lexicographically
/// smallest (k1, b).
BM25Params grid_search_bm25(const Dataset& dataset, const BM25Index& index, const BM25Grid& grid,
                            std::string_view metric = "map@100");

struct TrainingPair {
  std::string query_id;
  std::string positive_doc;
  std::string negative_doc;

  bool operator==(const TrainingPair&) const = default;
};

std::vector<Candidates> prerank(const Dataset& dataset, const BM25Index& index, const BM25Params& params,
                                const std::vector<std::string>& query_ids, std::size_t k);

/// One pair per judged-relevant document of each query's top-k; the
/// negative is drawn uniformly among that query's top-k documents with a
/// strictly lower grade (unjudged counts as 0).
std::vector<TrainingPair> sample_training_pairs(const Dataset& dataset, const std::vector<Candidates>& candidates,
                                                std::uint64_t seed);

/// Convenience overload over the dataset's training queries.
std::vector<TrainingPair> sample_training_pairs(const Dataset& dataset, const BM25Index& index,
                                                const BM25Params& params, std::size_t k, std::uint64_t seed);

}  // namespace forgetbench
