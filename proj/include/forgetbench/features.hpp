#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "forgetbench/bm25.hpp"
#include "forgetbench/corpus.hpp"

namespace forgetbench {

/// Dataset characteristics used to explain forgetting.
struct FeatureVector {
  std::string dataset;
  double rs = 0.0;      // log10(|D| * |Q|)
  double rd = 0.0;      // log10(#relevant qrels / (|D| * |Q|))
  double sd = 0.0;      // KL(RSV of relevant || RSV of other retrieved)
  double vocab = 0.0;   // distinct terms
  double dl = 0.0;      // mean document length
  double ql = 0.0;      // mean query length
  double qd = 0.0;      // mean over queries of mean query-term idf
  double map = 0.0;     // BM25 MAP@100 on the test queries
  double std_ap = 0.0;  // population std of BM25 AP@100 on the test queries

  static constexpr std::size_t size = 9;
  /// "RS", "RD", "SD", "Vocab", "DL", "QL", "QD", "MAP", "std-AP".
  static const std::array<std::string_view, size>& names();
  static const std::array<std::string_view, size>& descriptions();
  std::array<double, size> values() const;
};

/// KL(p || q) for probability vectors of equal length; terms with p = 0 add 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Histograms both samples on `bins` equal-width bins spanning their pooled
/// range, adds `smoothing` to every bin probability, renormalizes, and returns
/// KL(pos || neg).
double histogram_kl(std::span<const double> pos, std::span<const double> neg, std::size_t bins,
                    double smoothing = 1e-6);

/// KL between BM25 scores of relevant and other documents retrieved in the
/// top-`depth` lists of the test queries.
double kl_rsv(const BM25Index& index, const BM25Params& params, const Dataset& dataset, std::size_t bins = 20,
              std::size_t depth = 100);

FeatureVector compute_features(const Dataset& dataset, const BM25Index& index, const BM25Params& params,
                               std::size_t kl_bins = 20);

}  // namespace forgetbench
