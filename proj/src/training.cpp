#include "forgetbench/training.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "forgetbench/error.hpp"
#include "forgetbench/lifelong.hpp"
#include "forgetbench/metrics.hpp"
#include "forgetbench/param_io.hpp"
#include "forgetbench/rng.hpp"

namespace forgetbench {

using ad::ParamBinder;
using ad::ParamVector;
using ad::Value;

void TrainConfig::validate() const {
  if (batches_per_epoch == 0 || pairs_per_batch == 0) throw ConfigError("batch sizes must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (rerank_depth == 0) throw ConfigError("rerank_depth must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  MetricId::parse(selection_metric);
}

std::string TrainConfig::describe() const {
  std::ostringstream out;
  out << "epochs=" << max_epochs << ";batches=" << batches_per_epoch << ";pairs=" << pairs_per_batch
      << ";lr=" << format_exact(learning_rate) << ";patience=" << early_stop_patience << ";metric=" << selection_metric
      << ";seed=" << seed << ";depth=" << rerank_depth << ";alpha=" << format_exact(alpha)
      << ";val=" << format_exact(validation_fraction);
  return out.str();
}

AdamState AdamState::zeros(std::size_t dim) {
  AdamState s;
  s.m.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  return s;
}

Value hinge_loss(const Value& s_pos, const Value& s_neg) { return ad::relu(Value(1.0) - s_pos + s_neg); }

void adam_step(ParamVector& params, std::span<const double> grads, AdamState& state, double lr) {
  const std::size_t n = params.total_dim();
  if (grads.size() != n) throw ContractError("gradient dimension does not match parameters");
  if (state.m.empty() && state.v.empty() && state.t == 0) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n || state.v.size() != n) throw ContractError("Adam state dimension does not match parameters");
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto theta = params.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

std::pair<std::vector<std::string>, std::vector<std::string>> validation_split(const Dataset& dataset,
                                                                               double fraction,
                                                                               std::uint64_t seed) {
  std::vector<std::string> ids = dataset.train_queries();
  std::sort(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, 0x7A11));
  rng.shuffle(ids);
  const std::size_t n = ids.size();
  std::size_t n_val = 0;
  if (n >= 2 && fraction > 0.0) {
    n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1,
                                    n - 1);
  }
  if (n_val == 0) return {ids, ids};
  std::vector<std::string> val(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::string> fit(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());
  return {fit, val};
}

TrainResult train_model(const Ranker& ranker, const Dataset& dataset, const BM25Index& index, const BM25Params& bm25,
                        const TrainConfig& config, const ParamVector& init, const EWCState* ewc) {
  config.validate();
  const MetricId metric = MetricId::parse(config.selection_metric);
  const auto [fit, val] = validation_split(dataset, config.validation_fraction, config.seed);
  const auto fit_candidates = prerank(dataset, index, bm25, fit, config.rerank_depth);
  const auto val_candidates = prerank(dataset, index, bm25, val, config.rerank_depth);
  const IdfFn idf = idf_of(index);
  const bool penalised = ewc && !ewc->anchors.empty();

  auto select = [&](const ParamVector& p) {
    return evaluate(metric, rerank_candidates(ranker, p, dataset, index, val_candidates, config.alpha),
                    dataset.qrel_map());
  };

  TrainResult result;
  result.params = init;
  result.best_selection = select(init);
  result.best_epoch = 0;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  result.log.push_back({0, nan, nan, result.best_selection});
  if (config.max_epochs == 0) return result;

  ParamVector params = init;
  AdamState adam = AdamState::zeros(params.total_dim());
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // Pairs are resampled every epoch.
    const auto pairs = sample_training_pairs(dataset, fit_candidates, mix_seed(config.seed, epoch));
    if (pairs.empty()) throw TrainingError(dataset.name() + ": no training pairs could be sampled");
    Rng rng(mix_seed(config.seed, 0xBA7C000000ULL + epoch));

    double loss_sum = 0.0;
    double penalty_sum = 0.0;
    for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
      ParamBinder binder(params, true);
      std::vector<Value> losses;
      losses.reserve(config.pairs_per_batch);
      for (std::size_t i = 0; i < config.pairs_per_batch; ++i) {
        const TrainingPair& p = pairs[rng.index(pairs.size())];
        const auto& q = dataset.query(p.query_id).tokens;
        const Value pos = ranker.score(binder, q, dataset.document(p.positive_doc).tokens, idf);
        const Value neg = ranker.score(binder, q, dataset.document(p.negative_doc).tokens, idf);
        losses.push_back(hinge_loss(pos, neg));
      }
      Value loss = ad::mean(ad::concat_rows(losses));
      loss_sum += loss.item();
      if (penalised) {
        const Value penalty = ewc_penalty(binder, *ewc);
        penalty_sum += penalty.item();
        loss = loss + penalty;
      }
      ad::backward(loss);
      adam_step(params, binder.gradient(), adam, config.learning_rate);
    }

    const double selection = select(params);
    const double batches = static_cast<double>(config.batches_per_epoch);
    result.log.push_back({epoch, loss_sum / batches, penalty_sum / batches, selection});
    if (selection > result.best_selection) {
      result.best_selection = selection;
      result.best_epoch = epoch;
      result.params = params;
      stale = 0;
    } else if (++stale >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

OracleModel train_oracle(const Ranker& ranker, const Dataset& dataset, const BM25Index& index, const BM25Params& bm25,
                         const TrainConfig& config) {
  const ParamVector init = ranker.init_params(mix_seed(config.seed, fnv1a(dataset.name())));
  auto trained = train_model(ranker, dataset, index, bm25, config, init);
  return OracleModel{std::move(trained.params), dataset.name(), trained.best_selection, std::move(trained.log)};
}

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,mean_loss,penalty,selection\n";
  for (const auto& e : log) {
    out << e.epoch << ',';
    if (!std::isnan(e.mean_loss)) out << format_exact(e.mean_loss);
    out << ',';
    if (!std::isnan(e.mean_penalty)) out << format_exact(e.mean_penalty);
    out << ',' << format_exact(e.selection) << '\n';
  }
}

std::vector<EpochLog> read_training_log(std::istream& in) {
  std::vector<EpochLog> log;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() != 4) throw IoError("malformed training log line: " + line);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    log.push_back({static_cast<std::size_t>(std::stoull(cols[0])), cols[1].empty() ? nan : std::stod(cols[1]),
                   cols[2].empty() ? nan : std::stod(cols[2]), std::stod(cols[3])});
  }
  return log;
}

}  // namespace forgetbench
