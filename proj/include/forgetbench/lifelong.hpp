#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forgetbench/autodiff.hpp"
#include "forgetbench/bm25.hpp"
#include "forgetbench/training.hpp"

namespace forgetbench {

/// Empirical diagonal Fisher: mean squared per-pair hinge-loss gradient.
struct FisherDiagonal {
  std::vector<double> values;
  std::string dataset;
  std::size_t n_samples = 0;
};

struct EWCAnchor {
  ad::ParamVector params;
  FisherDiagonal fisher;
};

/// Anchors of every dataset learned so far, in stream order.
struct EWCState {
  double lambda = 0.5;
  std::vector<EWCAnchor> anchors;
};

/// Pairs are drawn uniformly with replacement from the dataset's training
/// pairs (top-`depth` pre-ranking) using `seed`.
FisherDiagonal estimate_fisher_diagonal(const Ranker& ranker, const ad::ParamVector& params, const Dataset& dataset,
                                        const BM25Index& index, const BM25Params& bm25, std::size_t n_pairs,
                                        std::uint64_t seed, std::size_t depth = 100);

FisherDiagonal fisher_from_pairs(const Ranker& ranker, const ad::ParamVector& params, const Dataset& dataset,
                                 const BM25Index& index, std::span<const TrainingPair> pairs);

/// sum_i (lambda / 2) * sum_j F_ij (theta_j - anchor_ij)^2 as a graph value.
ad::Value ewc_penalty(ad::ParamBinder& binder, const EWCState& state);
double ewc_penalty_value(const ad::ParamVector& params, const EWCState& state);

enum class Strategy { finetune, ewc };
std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view text);

struct TransferResult {
  TrainResult train;
  EWCState state;
};

struct TransferOptions {
  std::size_t fisher_pairs = 512;
  std::uint64_t fisher_seed = 0;
};

/// Trains on `next` starting from `current`. For ewc the penalty uses the
/// incoming anchors and the returned state gains (new params, their Fisher
/// on `next`). For finetune the state is returned unchanged.
TransferResult transfer(Strategy strategy, const Ranker& ranker, const ad::ParamVector& current, const Dataset& next,
                        const BM25Index& index, const BM25Params& bm25, const TrainConfig& config, EWCState state,
                        const TransferOptions& options = {});

/// Parameter-file round trip for anchors (metadata: dataset, n_samples, lambda).
void write_anchor(const std::filesystem::path& path, const EWCAnchor& anchor, double lambda);
EWCAnchor read_anchor(const std::filesystem::path& path, double* lambda = nullptr);

}  // namespace forgetbench
