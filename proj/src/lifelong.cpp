#include "forgetbench/lifelong.hpp"

#include <algorithm>

#include "forgetbench/error.hpp"
#include "forgetbench/param_io.hpp"
#include "forgetbench/rng.hpp"

namespace forgetbench {

using ad::ParamBinder;
using ad::ParamVector;
using ad::Value;

FisherDiagonal fisher_from_pairs(const Ranker& ranker, const ParamVector& params, const Dataset& dataset,
                                 const BM25Index& index, std::span<const TrainingPair> pairs) {
  if (pairs.empty()) throw EstimationError(dataset.name() + ": no pairs for Fisher estimation");
  const IdfFn idf = idf_of(index);
  FisherDiagonal fisher{std::vector<double>(params.total_dim(), 0.0), dataset.name(), pairs.size()};
  std::vector<double> grad(params.total_dim());
  for (const auto& p : pairs) {
    ParamBinder binder(params, true);
    const auto& q = dataset.query(p.query_id).tokens;
    const Value loss = hinge_loss(ranker.score(binder, q, dataset.document(p.positive_doc).tokens, idf),
                                  ranker.score(binder, q, dataset.document(p.negative_doc).tokens, idf));
    ad::backward(loss);
    std::fill(grad.begin(), grad.end(), 0.0);
    binder.add_gradient_to(grad);
    for (std::size_t j = 0; j < grad.size(); ++j) fisher.values[j] += grad[j] * grad[j];
  }
  const double n = static_cast<double>(pairs.size());
  for (double& f : fisher.values) f /= n;
  return fisher;
}

FisherDiagonal estimate_fisher_diagonal(const Ranker& ranker, const ParamVector& params, const Dataset& dataset,
                                        const BM25Index& index, const BM25Params& bm25, std::size_t n_pairs,
                                        std::uint64_t seed, std::size_t depth) {
  if (n_pairs == 0) throw EstimationError("Fisher estimation needs n_pairs >= 1");
  const auto pool = sample_training_pairs(dataset, index, bm25, depth, mix_seed(seed, 0xF15));
  if (pool.empty()) throw EstimationError(dataset.name() + ": no training pairs available for Fisher estimation");
  Rng rng(mix_seed(seed, 0xF16));
  std::vector<TrainingPair> drawn;
  drawn.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) drawn.push_back(pool[rng.index(pool.size())]);
  return fisher_from_pairs(ranker, params, dataset, index, drawn);
}

Value ewc_penalty(ParamBinder& binder, const EWCState& state) {
  if (state.anchors.empty()) return Value(0.0);
  const std::size_t n = binder.params().total_dim();
  const Value theta = binder.flat();
  Value total(0.0);
  for (const auto& a : state.anchors) {
    if (a.params.total_dim() != n || a.fisher.values.size() != n) {
      throw ContractError("EWC anchor dimension does not match the parameters");
    }
    auto anchor = a.params.values();
    const Value diff = theta - Value::constant(n, 1, std::vector<double>(anchor.begin(), anchor.end()));
    const Value weighted = ad::dot(Value::constant(n, 1, a.fisher.values), ad::square(diff));
    total = total + weighted * Value(state.lambda / 2.0);
  }
  return total;
}

double ewc_penalty_value(const ParamVector& params, const EWCState& state) {
  ParamBinder binder(params, false);
  return ewc_penalty(binder, state).item();
}

std::string_view strategy_name(Strategy s) { return s == Strategy::finetune ? "finetune" : "ewc"; }

Strategy parse_strategy(std::string_view text) {
  if (text == "finetune") return Strategy::finetune;
  if (text == "ewc") return Strategy::ewc;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

TransferResult transfer(Strategy strategy, const Ranker& ranker, const ParamVector& current, const Dataset& next,
                        const BM25Index& index, const BM25Params& bm25, const TrainConfig& config, EWCState state,
                        const TransferOptions& options) {
  if (strategy == Strategy::finetune) {
    auto trained = train_model(ranker, next, index, bm25, config, current);
    return {std::move(trained), std::move(state)};
  }
  auto trained = train_model(ranker, next, index, bm25, config, current, &state);
  auto fisher = estimate_fisher_diagonal(ranker, trained.params, next, index, bm25, options.fisher_pairs,
                                         options.fisher_seed, config.rerank_depth);
  state.anchors.push_back({trained.params, std::move(fisher)});
  return {std::move(trained), std::move(state)};
}

void write_anchor(const std::filesystem::path& path, const EWCAnchor& anchor, double lambda) {
  ParamFile file;
  file.params = anchor.params;
  file.params.add("fisher", anchor.fisher.values.size(), 1, anchor.fisher.values);
  file.metadata["kind"] = "ewc-anchor";
  file.metadata["dataset"] = anchor.fisher.dataset;
  file.metadata["n_samples"] = std::to_string(anchor.fisher.n_samples);
  file.metadata["lambda"] = format_exact(lambda);
  write_param_file(path, file);
}

EWCAnchor read_anchor(const std::filesystem::path& path, double* lambda) {
  ParamFile file = read_param_file(path);
  if (file.metadata["kind"] != "ewc-anchor") throw IoError(path.string() + ": not an EWC anchor file");
  EWCAnchor anchor;
  for (const auto& s : file.params.slots()) {
    auto values = file.params.array(s.name);
    if (s.name == "fisher") {
      anchor.fisher.values.assign(values.begin(), values.end());
    } else {
      anchor.params.add(s.name, s.rows, s.cols, std::vector<double>(values.begin(), values.end()));
    }
  }
  anchor.fisher.dataset = file.metadata["dataset"];
  anchor.fisher.n_samples = std::stoull(file.metadata["n_samples"]);
  if (lambda) *lambda = std::stod(file.metadata["lambda"]);
  return anchor;
}

}  // namespace forgetbench
