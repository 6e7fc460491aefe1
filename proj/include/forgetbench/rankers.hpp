#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forgetbench/autodiff.hpp"
#include "forgetbench/bm25.hpp"
#include "forgetbench/corpus.hpp"
#include "forgetbench/ranking.hpp"

namespace forgetbench {

/// Token vectors. When trainable, the rows are copied into the model's
/// ParamVector under "embedding" and this table only supplies the initial
/// values; otherwise the table is the frozen source. Tokens outside the
/// vocabulary get a fixed pseudo-random vector derived from (oov_seed, token).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  /// Vocabulary is sorted and de-duplicated; entries uniform in [-0.1, 0.1].
  static EmbeddingTable random(std::vector<std::string> vocab, std::size_t dim, std::uint64_t seed,
                               bool trainable = true);
  /// Whitespace-delimited text: a token followed by `dim` reals per line.
  static EmbeddingTable load_text(const std::filesystem::path& path, bool trainable = false,
                                  std::uint64_t oov_seed = 0);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool trainable() const noexcept { return trainable_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<double>& matrix() const noexcept { return matrix_; }

  std::optional<std::size_t> row(std::string_view token) const;
  std::span<const double> vector(std::size_t row) const;
  std::vector<double> oov_vector(std::string_view token) const;

  /// Digest of tokens, values and flags (cache key component).
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> matrix_;
  std::size_t dim_ = 0;
  bool trainable_ = false;
  std::uint64_t oov_seed_ = 0;
};

enum class ModelKind { knrm, drmm };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct RankerConfig {
  ModelKind kind = ModelKind::knrm;
  // KNRM
  std::vector<double> kernel_mu;
  std::vector<double> kernel_sigma;
  double kernel_eps = 1e-10;
  // DRMM
  std::size_t hist_bins = 30;
  std::vector<std::size_t> hidden = {10, 1};

  std::size_t embedding_dim = 16;

  /// 11 kernels, mu = 1.0, 0.9, ..., -0.9; sigma 1e-3 for the exact-match kernel, 0.1 otherwise.
  static RankerConfig knrm(std::size_t embedding_dim);
  /// 30 bins over [-1, 1], hidden layers [10, 1], idf gating.
  static RankerConfig drmm(std::size_t embedding_dim);

  void validate() const;
  /// Stable text form used in cache keys and reports.
  std::string describe() const;
};

using IdfFn = std::function<double(std::string_view)>;

/// An interaction-based ranker: configuration plus embedding table. The
/// trainable state lives in a separate ParamVector whose layout is
/// the model arrays in the order documented by init_params(), followed by
/// "embedding" when the table is trainable.
class Ranker {
 public:
  Ranker(RankerConfig config, EmbeddingTable embeddings);

  const RankerConfig& config() const noexcept { return config_; }
  const EmbeddingTable& embeddings() const noexcept { return embeddings_; }

  /// KNRM: "knrm.w" (K x 1), "knrm.b" (1 x 1).
  /// DRMM: "drmm.w<l>", "drmm.b<l>" per layer, then "drmm.gate" (1 x 1).
  /// Model weights are uniform in [-0.1, 0.1] from `seed`.
  ad::ParamVector init_params(std::uint64_t seed) const;

  /// Neural score s_NN as a graph value.
  ad::Value score(ad::ParamBinder& binder, std::span<const std::string> query,
                  std::span<const std::string> doc, const IdfFn& idf) const;
  /// Evaluation-only score.
  double score_value(const ad::ParamVector& params, std::span<const std::string> query,
                     std::span<const std::string> doc, const IdfFn& idf) const;

  /// Embedding rows for a token sequence (graph-aware when trainable).
  ad::Value embed(ad::ParamBinder& binder, std::span<const std::string> tokens) const;

 private:
  RankerConfig config_;
  EmbeddingTable embeddings_;
};

/// s = tanh(w . phi + b), phi_k = sum_i log(eps + sum_j exp(-(M_ij - mu_k)^2 / (2 sigma_k^2))).
ad::Value knrm_forward(const Ranker& ranker, ad::ParamBinder& binder, std::span<const std::string> query,
                       std::span<const std::string> doc);

/// s = sum_i g_i z_i with z_i = MLP(log(1 + histogram_i)) and g = softmax(w_g * idf).
ad::Value drmm_forward(const Ranker& ranker, ad::ParamBinder& binder, std::span<const std::string> query,
                       std::span<const std::string> doc, const IdfFn& idf);

/// log(1 + count) histogram of one similarity row over `bins` equal bins of [-1, 1].
std::vector<double> log_count_histogram(std::span<const double> similarities, std::size_t bins);

struct NeuralScore {
  double s_nn = 0.0;
  double alpha = 0.0;
  double s_bm25 = 0.0;
  double s_global = 0.0;
};

/// alpha * s_nn + (1 - alpha) * s_bm25; alpha outside [0, 1] is a ConfigError.
double combined_score(double s_nn, double s_bm25, double alpha);

/// Re-ranks the BM25 top-k of `query` by alpha * s_NN + (1 - alpha) * bm25',
/// where bm25' is min-max normalised over the top-k (0 when all equal).
std::vector<ScoredDoc> rerank(const Ranker& ranker, const ad::ParamVector& params, const Dataset& dataset,
                              const BM25Index& index, const BM25Params& bm25, const Query& query, std::size_t k,
                              double alpha);

/// rerank over several queries of `dataset`.
std::vector<Candidates> rerank_queries(const Ranker& ranker, const ad::ParamVector& params, const Dataset& dataset,
                                       const BM25Index& index, const BM25Params& bm25,
                                       const std::vector<std::string>& query_ids, std::size_t k, double alpha);

/// Re-ranks precomputed BM25 candidate lists (same scoring as rerank).
std::vector<Candidates> rerank_candidates(const Ranker& ranker, const ad::ParamVector& params,
                                          const Dataset& dataset, const BM25Index& index,
                                          const std::vector<Candidates>& prerank, double alpha);

/// idf lookup backed by an index.
IdfFn idf_of(const BM25Index& index);

}  // namespace forgetbench
