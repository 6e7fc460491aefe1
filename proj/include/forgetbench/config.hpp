#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "forgetbench/bm25.hpp"
#include "forgetbench/corpus.hpp"
#include "forgetbench/lifelong.hpp"
#include "forgetbench/rankers.hpp"
#include "forgetbench/training.hpp"

namespace forgetbench {

struct SyntheticSource {
  std::uint64_t seed = 0;
  SyntheticSpec spec;
};

struct TrecSource {
  std::filesystem::path docs;
  std::filesystem::path queries;
  std::filesystem::path qrels;
  /// Either a "train/test" proportion or two id-list files.
  std::string split = "4/1";
  std::optional<std::filesystem::path> train_ids;
  std::optional<std::filesystem::path> test_ids;
  std::uint64_t split_seed = 0;
};

struct DatasetSource {
  std::string name;
  std::variant<SyntheticSource, TrecSource> source;
};

struct ModelSpec {
  std::string name;
  RankerConfig ranker;
  /// Pretrained vectors; when absent a random table over the experiment
  /// vocabulary is drawn from the run seed.
  std::optional<std::filesystem::path> embeddings;
  bool trainable_embeddings = true;
};

struct SettingSpec {
  std::string name;
  std::vector<std::string> datasets;
  /// Reorder by decreasing number of training queries.
  bool sort_by_train_size = false;
};

struct Rq2Spec {
  std::vector<std::string> settings;
  std::size_t n_samples = 30;
  /// Queries per sub-dataset; 0 means half of the left dataset's queries.
  std::size_t sample_queries = 0;
  std::size_t sample_depth = 100;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::vector<DatasetSource> datasets;
  std::vector<SettingSpec> settings;
  std::vector<ModelSpec> models;
  TrainConfig train;
  BM25Grid bm25_grid;
  std::string bm25_metric = "map@100";
  /// Metric of the forgetting measures.
  std::string metric = "map@100";
  double alpha = 0.5;
  std::vector<Strategy> strategies = {Strategy::finetune, Strategy::ewc};
  double lambda = 0.5;
  std::size_t fisher_pairs = 512;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path output_dir = "forgetbench-out";
  bool cache = true;
  std::optional<Rq2Spec> rq2;

  void validate() const;
  const DatasetSource& dataset(std::string_view name) const;
  const SettingSpec& setting(std::string_view name) const;
  const ModelSpec& model(std::string_view name) const;
};

/// Relative paths inside the document are resolved against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON echo of a configuration (stable key order).
std::string config_to_json(const ExperimentConfig& config);

}  // namespace forgetbench
