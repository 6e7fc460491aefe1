#include "forgetbench/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "forgetbench/error.hpp"
#include "forgetbench/metrics.hpp"
#include "json.hpp"

namespace forgetbench {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + std::string(key) + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

SyntheticSpec parse_synthetic(const json& j, const std::string& where) {
  check_keys(j, where,
             {"seed", "n_docs", "n_queries", "vocab_size", "doc_len_mean", "query_len_mean", "relevance_density",
              "domain_vocab_offset", "relevant_len_scale", "relevant_tf", "distractor_rate", "distractor_terms",
              "distractor_tf", "distractor_len_scale", "topic_terms", "max_grade", "split"});
  SyntheticSpec s;
  read(j, "n_docs", s.n_docs, where);
  read(j, "n_queries", s.n_queries, where);
  read(j, "vocab_size", s.vocab_size, where);
  read(j, "doc_len_mean", s.doc_len_mean, where);
  read(j, "query_len_mean", s.query_len_mean, where);
  read(j, "relevance_density", s.relevance_density, where);
  read(j, "domain_vocab_offset", s.domain_vocab_offset, where);
  read(j, "relevant_len_scale", s.relevant_len_scale, where);
  read(j, "relevant_tf", s.relevant_tf, where);
  read(j, "distractor_rate", s.distractor_rate, where);
  read(j, "distractor_terms", s.distractor_terms, where);
  read(j, "distractor_tf", s.distractor_tf, where);
  read(j, "distractor_len_scale", s.distractor_len_scale, where);
  read(j, "topic_terms", s.topic_terms, where);
  read(j, "max_grade", s.max_grade, where);
  read(j, "split", s.split, where);
  s.validate();
  return s;
}

DatasetSource parse_dataset(const std::string& name, const json& j, const std::filesystem::path& base) {
  const std::string where = "datasets." + name;
  check_keys(j, where, {"synthetic", "trec"});
  DatasetSource d;
  d.name = name;
  if (j.contains("synthetic") == j.contains("trec")) {
    throw ConfigError(where + " needs exactly one of 'synthetic' or 'trec'");
  }
  if (j.contains("synthetic")) {
    SyntheticSource s;
    read(j["synthetic"], "seed", s.seed, where);
    s.spec = parse_synthetic(j["synthetic"], where + ".synthetic");
    d.source = s;
  } else {
    const json& t = j["trec"];
    const std::string w = where + ".trec";
    check_keys(t, w, {"docs", "queries", "qrels", "split", "train_ids", "test_ids", "split_seed"});
    TrecSource s;
    for (auto key : {"docs", "queries", "qrels"}) {
      if (!t.contains(key)) throw ConfigError(w + " is missing '" + key + "'");
    }
    s.docs = resolve(base, t["docs"].get<std::string>());
    s.queries = resolve(base, t["queries"].get<std::string>());
    s.qrels = resolve(base, t["qrels"].get<std::string>());
    read(t, "split", s.split, w);
    read(t, "split_seed", s.split_seed, w);
    if (t.contains("train_ids") != t.contains("test_ids")) {
      throw ConfigError(w + ": train_ids and test_ids go together");
    }
    if (t.contains("train_ids")) {
      s.train_ids = resolve(base, t["train_ids"].get<std::string>());
      s.test_ids = resolve(base, t["test_ids"].get<std::string>());
    }
    d.source = s;
  }
  return d;
}

ModelSpec parse_model(const json& j, const std::filesystem::path& base) {
  check_keys(j, "models[]", {"name", "kind", "embedding_dim", "embeddings", "trainable_embeddings", "kernel_mu",
                             "kernel_sigma", "kernel_eps", "hist_bins", "hidden"});
  std::string kind = "knrm";
  read(j, "kind", kind, "models[]");
  std::size_t dim = 16;
  read(j, "embedding_dim", dim, "models[]");
  ModelSpec m;
  m.ranker = parse_model_kind(kind) == ModelKind::knrm ? RankerConfig::knrm(dim) : RankerConfig::drmm(dim);
  m.name = kind;
  read(j, "name", m.name, "models[]");
  const std::string where = "models." + m.name;
  read(j, "kernel_mu", m.ranker.kernel_mu, where);
  read(j, "kernel_sigma", m.ranker.kernel_sigma, where);
  read(j, "kernel_eps", m.ranker.kernel_eps, where);
  read(j, "hist_bins", m.ranker.hist_bins, where);
  read(j, "hidden", m.ranker.hidden, where);
  if (j.contains("embeddings")) {
    m.embeddings = resolve(base, j["embeddings"].get<std::string>());
    m.trainable_embeddings = false;
  }
  read(j, "trainable_embeddings", m.trainable_embeddings, where);
  m.ranker.validate();
  return m;
}

TrainConfig parse_train(const json& j) {
  check_keys(j, "train", {"max_epochs", "batches_per_epoch", "pairs_per_batch", "learning_rate",
                          "early_stop_patience", "selection_metric", "rerank_depth", "validation_fraction"});
  TrainConfig t;
  read(j, "max_epochs", t.max_epochs, "train");
  read(j, "batches_per_epoch", t.batches_per_epoch, "train");
  read(j, "pairs_per_batch", t.pairs_per_batch, "train");
  read(j, "learning_rate", t.learning_rate, "train");
  read(j, "early_stop_patience", t.early_stop_patience, "train");
  read(j, "selection_metric", t.selection_metric, "train");
  read(j, "rerank_depth", t.rerank_depth, "train");
  read(j, "validation_fraction", t.validation_fraction, "train");
  return t;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("no datasets defined");
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (!names.insert(d.name).second) throw ConfigError("dataset '" + d.name + "' defined twice");
  }
  std::set<std::string> setting_names;
  for (const auto& s : settings) {
    if (!setting_names.insert(s.name).second) throw ConfigError("setting '" + s.name + "' defined twice");
    if (s.datasets.size() < 2) throw ConfigError("setting '" + s.name + "' needs at least two datasets");
    std::set<std::string> seen;
    for (const auto& d : s.datasets) {
      if (!names.count(d)) throw ConfigError("setting '" + s.name + "' references unknown dataset '" + d + "'");
      if (!seen.insert(d).second) throw ConfigError("setting '" + s.name + "' repeats dataset '" + d + "'");
    }
  }
  if (models.empty()) throw ConfigError("no models defined");
  std::set<std::string> model_names;
  for (const auto& m : models) {
    if (!model_names.insert(m.name).second) throw ConfigError("model '" + m.name + "' defined twice");
    m.ranker.validate();
  }
  train.validate();
  MetricId::parse(metric);
  MetricId::parse(bm25_metric);
  if (bm25_grid.k1.empty() || bm25_grid.b.empty()) throw ConfigError("the BM25 grid is empty");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (fisher_pairs == 0) throw ConfigError("fisher_pairs must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (rq2) {
    if (rq2->settings.empty()) throw ConfigError("rq2 needs at least one setting");
    for (const auto& s : rq2->settings) setting(s);
    if (rq2->n_samples == 0) throw ConfigError("rq2.n_samples must be positive");
  }
}

const DatasetSource& ExperimentConfig::dataset(std::string_view name) const {
  for (const auto& d : datasets)
    if (d.name == name) return d;
  throw ConfigError("unknown dataset '" + std::string(name) + "'");
}

const SettingSpec& ExperimentConfig::setting(std::string_view name) const {
  for (const auto& s : settings)
    if (s.name == name) return s;
  throw ConfigError("unknown setting '" + std::string(name) + "'");
}

const ModelSpec& ExperimentConfig::model(std::string_view name) const {
  for (const auto& m : models)
    if (m.name == name) return m;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"datasets", "settings", "models", "train", "bm25_grid", "bm25_metric", "metric", "alpha", "strategies",
              "lambda", "fisher_pairs", "seeds", "output_dir", "cache", "rq2"});
  ExperimentConfig c;
  if (!root.contains("datasets")) throw ConfigError("config is missing 'datasets'");
  for (const auto& [name, value] : root["datasets"].items()) c.datasets.push_back(parse_dataset(name, value, base_dir));

  if (root.contains("settings")) {
    for (const auto& s : root["settings"]) {
      check_keys(s, "settings[]", {"name", "datasets", "sort_by_train_size"});
      SettingSpec spec;
      read(s, "datasets", spec.datasets, "settings[]");
      spec.name = "";
      for (const auto& d : spec.datasets) spec.name += (spec.name.empty() ? "" : "-") + d;
      read(s, "name", spec.name, "settings[]");
      read(s, "sort_by_train_size", spec.sort_by_train_size, "settings[]");
      c.settings.push_back(spec);
    }
  }
  if (root.contains("models")) {
    for (const auto& m : root["models"]) c.models.push_back(parse_model(m, base_dir));
  } else {
    c.models.push_back({"knrm", RankerConfig::knrm(16), std::nullopt, true});
  }
  if (root.contains("train")) c.train = parse_train(root["train"]);
  if (root.contains("bm25_grid")) {
    check_keys(root["bm25_grid"], "bm25_grid", {"k1", "b"});
    read(root["bm25_grid"], "k1", c.bm25_grid.k1, "bm25_grid");
    read(root["bm25_grid"], "b", c.bm25_grid.b, "bm25_grid");
  }
  read(root, "bm25_metric", c.bm25_metric, "config");
  read(root, "metric", c.metric, "config");
  if (!root.contains("alpha")) throw ConfigError("config is missing the required 'alpha'");
  read(root, "alpha", c.alpha, "config");
  c.train.alpha = c.alpha;
  if (root.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : root["strategies"]) c.strategies.push_back(parse_strategy(s.get<std::string>()));
  }
  read(root, "lambda", c.lambda, "config");
  read(root, "fisher_pairs", c.fisher_pairs, "config");
  read(root, "seeds", c.seeds, "config");
  if (root.contains("output_dir")) c.output_dir = resolve(base_dir, root["output_dir"].get<std::string>());
  read(root, "cache", c.cache, "config");
  if (root.contains("rq2")) {
    const json& r = root["rq2"];
    check_keys(r, "rq2", {"settings", "n_samples", "sample_queries", "sample_depth", "seed"});
    Rq2Spec spec;
    read(r, "settings", spec.settings, "rq2");
    read(r, "n_samples", spec.n_samples, "rq2");
    read(r, "sample_queries", spec.sample_queries, "rq2");
    read(r, "sample_depth", spec.sample_depth, "rq2");
    read(r, "seed", spec.seed, "rq2");
    c.rq2 = spec;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  json root;
  json datasets = json::object();
  for (const auto& d : c.datasets) {
    json entry;
    if (const auto* s = std::get_if<SyntheticSource>(&d.source)) {
      const auto& p = s->spec;
      entry["synthetic"] = {{"seed", s->seed},
                            {"n_docs", p.n_docs},
                            {"n_queries", p.n_queries},
                            {"vocab_size", p.vocab_size},
                            {"doc_len_mean", p.doc_len_mean},
                            {"query_len_mean", p.query_len_mean},
                            {"relevance_density", p.relevance_density},
                            {"domain_vocab_offset", p.domain_vocab_offset},
                            {"relevant_len_scale", p.relevant_len_scale},
                            {"relevant_tf", p.relevant_tf},
                            {"distractor_rate", p.distractor_rate},
                            {"distractor_terms", p.distractor_terms},
                            {"distractor_tf", p.distractor_tf},
                            {"distractor_len_scale", p.distractor_len_scale},
                            {"topic_terms", p.topic_terms},
                            {"max_grade", p.max_grade},
                            {"split", p.split}};
    } else {
      const auto& t = std::get<TrecSource>(d.source);
      entry["trec"] = {{"docs", t.docs.string()},       {"queries", t.queries.string()},
                       {"qrels", t.qrels.string()},     {"split", t.split},
                       {"split_seed", t.split_seed}};
      if (t.train_ids) {
        entry["trec"]["train_ids"] = t.train_ids->string();
        entry["trec"]["test_ids"] = t.test_ids->string();
      }
    }
    datasets[d.name] = entry;
  }
  root["datasets"] = datasets;
  root["settings"] = json::array();
  for (const auto& s : c.settings) {
    root["settings"].push_back({{"name", s.name}, {"datasets", s.datasets}, {"sort_by_train_size", s.sort_by_train_size}});
  }
  root["models"] = json::array();
  for (const auto& m : c.models) {
    json entry = {{"name", m.name},
                  {"kind", std::string(model_kind_name(m.ranker.kind))},
                  {"embedding_dim", m.ranker.embedding_dim},
                  {"trainable_embeddings", m.trainable_embeddings},
                  {"kernel_mu", m.ranker.kernel_mu},
                  {"kernel_sigma", m.ranker.kernel_sigma},
                  {"kernel_eps", m.ranker.kernel_eps},
                  {"hist_bins", m.ranker.hist_bins},
                  {"hidden", m.ranker.hidden}};
    if (m.embeddings) entry["embeddings"] = m.embeddings->string();
    root["models"].push_back(entry);
  }
  const auto& t = c.train;
  root["train"] = {{"max_epochs", t.max_epochs},
                   {"batches_per_epoch", t.batches_per_epoch},
                   {"pairs_per_batch", t.pairs_per_batch},
                   {"learning_rate", t.learning_rate},
                   {"early_stop_patience", t.early_stop_patience},
                   {"selection_metric", t.selection_metric},
                   {"rerank_depth", t.rerank_depth},
                   {"validation_fraction", t.validation_fraction}};
  root["bm25_grid"] = {{"k1", c.bm25_grid.k1}, {"b", c.bm25_grid.b}};
  root["bm25_metric"] = c.bm25_metric;
  root["metric"] = c.metric;
  root["alpha"] = c.alpha;
  root["strategies"] = json::array();
  for (auto s : c.strategies) root["strategies"].push_back(std::string(strategy_name(s)));
  root["lambda"] = c.lambda;
  root["fisher_pairs"] = c.fisher_pairs;
  root["seeds"] = c.seeds;
  root["cache"] = c.cache;
  if (c.rq2) {
    root["rq2"] = {{"settings", c.rq2->settings},
                   {"n_samples", c.rq2->n_samples},
                   {"sample_queries", c.rq2->sample_queries},
                   {"sample_depth", c.rq2->sample_depth},
                   {"seed", c.rq2->seed}};
  }
  return root.dump(2) + "\n";
}

}  // namespace forgetbench
