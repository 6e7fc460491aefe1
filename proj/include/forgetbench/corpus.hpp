#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace forgetbench {

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;

  bool operator==(const Document&) const = default;
};

struct Query {
  std::string query_id;
  std::vector<std::string> tokens;

  bool operator==(const Query&) const = default;
};

struct QrelEntry {
  std::string query_id;
  std::string doc_id;
  int grade = 0;

  bool operator==(const QrelEntry&) const = default;
};

/// query_id -> doc_id -> grade. Only judged pairs are present.
using Qrels = std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>>;

/// One retrieval domain: documents, queries, judgments and a query-level
/// train/test split. Immutable once constructed; the constructor enforces
/// id uniqueness, referential integrity of qrels and split disjointness.
class Dataset {
 public:
  Dataset(std::string name, std::vector<Document> documents, std::vector<Query> queries,
          std::vector<QrelEntry> qrels, std::vector<std::string> train_queries,
          std::vector<std::string> test_queries);

  const std::string& name() const noexcept { return name_; }
  const std::vector<Document>& documents() const noexcept { return documents_; }
  const std::vector<Query>& queries() const noexcept { return queries_; }
  const std::vector<QrelEntry>& qrels() const noexcept { return qrels_; }
  const std::vector<std::string>& train_queries() const noexcept { return train_; }
  const std::vector<std::string>& test_queries() const noexcept { return test_; }

  const Document& document(std::string_view doc_id) const;
  const Query& query(std::string_view query_id) const;
  bool has_document(std::string_view doc_id) const;
  bool has_query(std::string_view query_id) const;

  /// Grade of (query, doc); unjudged pairs are 0.
  int grade(std::string_view query_id, std::string_view doc_id) const;
  /// Judgments of one query (empty map if none).
  const std::map<std::string, int, std::less<>>& judgments(std::string_view query_id) const;
  const Qrels& qrel_map() const noexcept { return qrel_map_; }

  /// Number of judged pairs with grade >= 1.
  std::size_t relevant_count() const noexcept { return relevant_count_; }

  /// Same corpus with a different split (validated the same way).
  Dataset with_split(std::vector<std::string> train, std::vector<std::string> test) const;
  Dataset renamed(std::string name) const;

  /// FNV-1a digest over every field, used as a cache key component.
  std::uint64_t content_hash() const;

  bool operator==(const Dataset& other) const;

 private:
  std::string name_;
  std::vector<Document> documents_;
  std::vector<Query> queries_;
  std::vector<QrelEntry> qrels_;
  std::vector<std::string> train_;
  std::vector<std::string> test_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::unordered_map<std::string, std::size_t> query_index_;
  Qrels qrel_map_;
  std::size_t relevant_count_ = 0;
};

/// An ordered dataset stream D1 -> ... -> Dn (n >= 2, distinct names).
struct StreamSetting {
  std::string name;
  std::vector<const Dataset*> datasets;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Splits

/// "train/test" counts, applied as proportions over the query set.
struct SplitProportion {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct SplitLists {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct SplitSpec {
  std::variant<SplitProportion, SplitLists> value;
  std::uint64_t seed = 0;

  /// Parses "27/18".
  static SplitSpec parse(std::string_view text, std::uint64_t seed = 0);
  /// Reads two files with one query id per line.
  static SplitSpec from_files(const std::filesystem::path& train, const std::filesystem::path& test);
};

/// Deterministic proportional split: ids are sorted, shuffled with `seed`,
/// and the first round(n * train / (train + test)) go to train.
SplitLists split_by_proportion(std::vector<std::string> query_ids, SplitProportion proportion,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// TREC-style files

/// Documents "doc_id<TAB>text", queries "query_id<TAB>text",
/// qrels "query_id 0 doc_id grade".
Dataset load_trec_dataset(std::string name, const std::filesystem::path& doc_path,
                          const std::filesystem::path& query_path,
                          const std::filesystem::path& qrels_path, const SplitSpec& split);

struct TrecPaths {
  std::filesystem::path docs;
  std::filesystem::path queries;
  std::filesystem::path qrels;
  std::filesystem::path train_ids;
  std::filesystem::path test_ids;
};

/// Writes the dataset (tokens joined by single spaces) plus explicit split
/// lists under `dir` using `stem` as the file prefix.
TrecPaths write_trec_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                             std::string_view stem);

/// Inverse of write_trec_dataset.
Dataset load_written_dataset(std::string name, const TrecPaths& paths);

// ---------------------------------------------------------------------------
// Synthetic domains

struct SyntheticSpec {
  std::size_t n_docs = 2000;
  std::size_t n_queries = 60;
  std::size_t vocab_size = 1000;
  double doc_len_mean = 20.0;
  double query_len_mean = 3.0;
  double relevance_density = 0.005;
  std::size_t domain_vocab_offset = 0;

  // Shape of the relevance signal. Each query term occurs
  // max(1, round(grade * relevant_tf)) times in a relevant document, whose
  // background length is scaled by `relevant_len_scale`. A `distractor_rate`
  // fraction of the remaining documents are judged non-relevant but carry
  // `distractor_terms` query terms (0 = all of them) `distractor_tf` times
  // each, with length scaled by `distractor_len_scale`. `topic_terms` words
  // co-occurring with each query are planted in its relevant documents.
  double relevant_len_scale = 1.0;
  double relevant_tf = 1.0;
  double distractor_rate = 0.0;
  std::size_t distractor_terms = 1;
  std::size_t distractor_tf = 2;
  double distractor_len_scale = 1.0;
  std::size_t topic_terms = 0;
  int max_grade = 2;
  std::string split = "4/1";

  void validate() const;
};

/// Pure function of (seed, spec). Token strings are "w<offset + rank>".
Dataset generate_synthetic_domain(std::string name, std::uint64_t seed, const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Sub-dataset sampling

class BM25Index;
struct BM25Params;

/// Samples `n_queries` queries without replacement, keeps the union of their
/// top-k BM25 documents and the qrels restricted to kept pairs. The split is
/// redrawn over the sampled queries with the parent's train/test proportion.
Dataset sample_subdataset(const Dataset& dataset, std::size_t n_queries, const BM25Index& index,
                          const BM25Params& params, int k, std::uint64_t seed);

}  // namespace forgetbench
