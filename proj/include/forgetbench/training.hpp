#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "forgetbench/autodiff.hpp"
#include "forgetbench/bm25.hpp"
#include "forgetbench/corpus.hpp"
#include "forgetbench/rankers.hpp"

namespace forgetbench {

struct EWCState;

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t batches_per_epoch = 32;
  std::size_t pairs_per_batch = 16;
  double learning_rate = 0.001;
  std::size_t early_stop_patience = 10;
  std::string selection_metric = "p@20";
  std::uint64_t seed = 0;

  std::size_t rerank_depth = 100;
  /// Interpolation weight used when re-ranking for model selection.
  double alpha = 0.5;
  /// Share of training queries held out for model selection.
  double validation_fraction = 0.2;

  void validate() const;
  std::string describe() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(std::size_t dim);
};

/// max(0, 1 - s_pos + s_neg).
ad::Value hinge_loss(const ad::Value& s_pos, const ad::Value& s_neg);

/// Bias-corrected Adam update of params in place.
void adam_step(ad::ParamVector& params, std::span<const double> grads, AdamState& state, double lr);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;     // NaN for epoch 0 (the untrained initial point)
  double mean_penalty = 0.0;  // NaN for epoch 0
  double selection = 0.0;
};

struct TrainResult {
  ad::ParamVector params;  // best snapshot by the selection metric
  std::vector<EpochLog> log;
  double best_selection = 0.0;
  std::size_t best_epoch = 0;
};

/// Deterministic split of the training queries into (fit, validation).
std::pair<std::vector<std::string>, std::vector<std::string>> validation_split(const Dataset& dataset,
                                                                               double fraction,
                                                                               std::uint64_t seed);

/// Pairwise hinge training with Adam. The initial point is evaluated as
/// epoch 0; the returned snapshot is the best by the selection metric on
/// the validation queries. With `ewc` set, the penalty is added to every
/// batch loss.
TrainResult train_model(const Ranker& ranker, const Dataset& dataset, const BM25Index& index,
                        const BM25Params& bm25, const TrainConfig& config, const ad::ParamVector& init,
                        const EWCState* ewc = nullptr);

struct OracleModel {
  ad::ParamVector params;
  std::string dataset;
  double selection = 0.0;
  std::vector<EpochLog> log;
};

/// train_model from a fresh initialisation seeded by (config.seed, dataset name).
OracleModel train_oracle(const Ranker& ranker, const Dataset& dataset, const BM25Index& index,
                         const BM25Params& bm25, const TrainConfig& config);

/// "epoch,mean_loss,penalty,selection" with blank loss fields at epoch 0.
void write_training_log(std::ostream& out, const std::vector<EpochLog>& log);
std::vector<EpochLog> read_training_log(std::istream& in);

}  // namespace forgetbench
