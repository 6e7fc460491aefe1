#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forgetbench/config.hpp"
#include "forgetbench/features.hpp"
#include "forgetbench/metrics.hpp"
#include "forgetbench/regression.hpp"

namespace forgetbench {

/// Loaded datasets, their indexes and tuned BM25 parameters, plus the
/// oracle/Fisher caches shared by every run of one configuration.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const noexcept { return config_; }

  const Dataset& dataset(const std::string& name);
  /// Registers an extra dataset (e.g. a sampled sub-dataset); names must be new.
  const Dataset& add_dataset(Dataset dataset);
  const BM25Index& index(const std::string& name);
  /// Grid-searched on the dataset's training queries; computed once.
  const BM25Params& bm25(const std::string& name);
  /// BM25 effectiveness on the test queries (the normalisation reference).
  double bm25_reference(const std::string& name);

  /// Dataset names of a setting in stream order.
  std::vector<std::string> setting_order(const SettingSpec& setting);
  /// Sorted union of the tokens of every configured dataset.
  const std::vector<std::string>& vocabulary();

  Ranker ranker(const ModelSpec& model, std::uint64_t seed);
  /// Trained once per (dataset, model, train config, seed); cached on disk
  /// under <output_dir>/cache when caching is on.
  const OracleModel& oracle(const Ranker& ranker, const std::string& dataset, std::uint64_t seed);
  FisherDiagonal fisher(const Ranker& ranker, const ad::ParamVector& params, const std::string& dataset,
                        std::uint64_t seed);

  /// Effectiveness of `params` on the test queries of `dataset`; the run is
  /// appended to `run` when given.
  double measure(const Ranker& ranker, const ad::ParamVector& params, const std::string& dataset, double alpha,
                 RankedRun* run = nullptr);

 private:
  std::filesystem::path cache_dir() const { return config_.output_dir / "cache"; }

  ExperimentConfig config_;
  std::map<std::string, std::unique_ptr<Dataset>, std::less<>> datasets_;
  std::map<std::string, std::unique_ptr<BM25Index>, std::less<>> indexes_;
  std::map<std::string, BM25Params, std::less<>> bm25_;
  std::map<std::string, double, std::less<>> bm25_ref_;
  std::optional<std::vector<std::string>> vocabulary_;
  std::map<std::uint64_t, OracleModel> oracles_;
};

/// Datasets ordered by decreasing number of training queries (stable).
std::vector<const Dataset*> sort_by_train_size(std::vector<const Dataset*> datasets);

struct TrainingLog {
  std::string label;
  std::vector<EpochLog> epochs;
};

/// One (model, setting, strategy, seed) measurement.
struct SettingRun {
  std::string model;
  std::string setting;
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<std::string> datasets;
  double alpha = 0.0;
  PerformanceMatrix global;  // score_G with the configured alpha
  PerformanceMatrix neural;  // alpha = 1
  double bwt = 0.0, rem = 0.0, pr = 0.0, delta_map = 0.0;
  double bwt_n = 0.0, remn = 0.0, pr_n = 0.0, delta_mapn = 0.0;
  std::vector<TrainingLog> logs;
  std::vector<RankedRun> runs;
  double seconds = 0.0;
  bool complete = false;
  std::string error;  // stage and message when incomplete
};

/// The measurement protocol for one model and setting: oracles on every
/// dataset (shared by all strategies), then for each strategy a transfer
/// along the stream measuring R(k, j) for all j <= k with the configured
/// alpha and with alpha = 1. Failures mark the affected run incomplete.
std::vector<SettingRun> run_setting(Experiment& experiment, const SettingSpec& setting, const ModelSpec& model,
                                    const std::vector<Strategy>& strategies, std::uint64_t seed);

/// Every configured setting x model x seed.
std::vector<SettingRun> run_all(Experiment& experiment);

void write_summary_csv(std::ostream& out, const std::vector<SettingRun>& runs);
void write_summary_mean_csv(std::ostream& out, const std::vector<SettingRun>& runs);
void write_summary_table(std::ostream& out, const std::vector<SettingRun>& runs);
void write_matrix_csv(std::ostream& out, const std::vector<SettingRun>& runs);

/// summary.csv, summary_mean.csv, summary.txt, matrix.csv, timing.csv,
/// runs/*.run and logs/*.csv under `out_dir`.
void emit_reports(const std::vector<SettingRun>& runs, const std::filesystem::path& out_dir);

struct Rq2Sample {
  std::string setting;
  std::size_t index = 0;
  std::string subdataset;
  TrecPaths files;
  FeatureVector features;
  std::map<std::string, double> rem;   // by model
  std::map<std::string, double> remn;  // by model
  bool ok = false;
  std::string error;
};

struct Rq2Result {
  std::vector<Rq2Sample> samples;
  std::size_t failed = 0;
  RegressionDesign rem_design;
  RegressionDesign remn_design;
  RegressionReport rem_fit;
  RegressionReport remn_fit;
};

/// For each rq2 setting and sample: draw a sub-dataset of the left dataset,
/// store it under <out_dir>/rq2/<setting>/, measure fine-tuning REM/REMN per
/// model with the sub-dataset substituted, and record its characteristics.
/// Samples are written to <out_dir>/rq2/samples.csv before fitting, so a
/// FitError (too few rows) still leaves the per-sample output behind.
Rq2Result run_rq2(Experiment& experiment, const Rq2Spec& spec, std::uint64_t seed,
                  const std::filesystem::path& out_dir);

void write_rq2_samples_csv(std::ostream& out, const std::vector<Rq2Sample>& samples);

}  // namespace forgetbench
