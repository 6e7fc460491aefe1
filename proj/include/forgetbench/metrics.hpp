#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forgetbench/corpus.hpp"
#include "forgetbench/ranking.hpp"

namespace forgetbench {

enum class MetricKind { average_precision, precision, ndcg };

/// "map@100", "p@20", "ndcg@20".
struct MetricId {
  MetricKind kind = MetricKind::average_precision;
  std::size_t cutoff = 100;

  static MetricId parse(std::string_view text);
  std::string name() const;
  bool operator==(const MetricId&) const = default;
};

using Judgments = std::map<std::string, int, std::less<>>;

/// Sum over relevant hits within the cutoff of precision at that rank,
/// divided by min(#relevant judged, cutoff). Relevant means grade >= 1.
double average_precision(std::span<const std::string> ranking, const Judgments& judged, std::size_t cutoff);
double precision_at_k(std::span<const std::string> ranking, const Judgments& judged, std::size_t k);
/// Gain 2^grade - 1, log2(rank + 1) discount, ideal ordering by grade.
double ndcg_at_k(std::span<const std::string> ranking, const Judgments& judged, std::size_t k);

double metric_value(const MetricId& metric, std::span<const std::string> ranking, const Judgments& judged);

/// Per-query values over queries that have at least one relevant judgment;
/// judged queries missing from the run score 0 only if listed in `run`.
std::vector<std::pair<std::string, double>> per_query(const MetricId& metric, const std::vector<Candidates>& run,
                                                      const Qrels& qrels);

/// Mean of per_query (0 when no query is evaluable).
double evaluate(const MetricId& metric, const std::vector<Candidates>& run, const Qrels& qrels);

Qrels read_qrels_file(const std::filesystem::path& path);
RankedRun read_trec_run(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Forgetting measures

/// R(i, j) for i >= j (model after step i evaluated on dataset j), the oracle
/// diagonal R*(j, j) and BM25's score on each dataset. Indices are 1-based.
class PerformanceMatrix {
 public:
  PerformanceMatrix() = default;
  PerformanceMatrix(std::size_t n, MetricId metric) : n_(n), metric_(metric) {}

  std::size_t n() const noexcept { return n_; }
  const MetricId& metric() const noexcept { return metric_; }

  void set(std::size_t i, std::size_t j, double value);
  void set_oracle(std::size_t j, double value);
  void set_bm25(std::size_t j, double value);

  bool has(std::size_t i, std::size_t j) const { return cells_.count({i, j}) > 0; }
  double at(std::size_t i, std::size_t j) const;
  double oracle(std::size_t j) const;
  double bm25(std::size_t j) const;

  const std::map<std::pair<std::size_t, std::size_t>, double>& cells() const noexcept { return cells_; }

 private:
  std::size_t n_ = 0;
  MetricId metric_;
  std::map<std::pair<std::size_t, std::size_t>, double> cells_;
  std::map<std::size_t, double> oracle_;
  std::map<std::size_t, double> bm25_;
};

/// Mean over i in 2..n, j < i of (R(i,j) - R*(j,j)) / bm25(j).
double bwt(const PerformanceMatrix& matrix);
/// 1 - |min(bwt, 0)|.
double rem(double bwt_value);
/// 1/(n-1) * sum over i in 2..n of R(i,i) / R*(i,i).
double pr(const PerformanceMatrix& matrix);
/// (model - bm25) / bm25 in percent.
double delta_map(double model_perf, double bm25_perf);

}  // namespace forgetbench
