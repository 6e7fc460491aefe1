// Command-line front end: every subcommand reads the experiment config.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "forgetbench/error.hpp"
#include "forgetbench/metrics.hpp"
#include "forgetbench/param_io.hpp"
#include "forgetbench/pipeline.hpp"

namespace fb = forgetbench;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

fb::ExperimentConfig load(const Globals& g) {
  if (g.config.empty()) throw fb::ConfigError("--config is required");
  fb::ExperimentConfig cfg = fb::load_config(g.config);
  if (g.seed) cfg.seeds = {*g.seed};
  if (!g.out.empty()) cfg.output_dir = g.out;
  return cfg;
}

void write_config_echo(const fb::ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir / "config.json");
  out << fb::config_to_json(cfg) << '\n';
}

std::vector<std::string> all_or(const std::vector<std::string>& chosen, std::vector<std::string> all) {
  return chosen.empty() ? all : chosen;
}

int cmd_index(const Globals& g, const std::vector<std::string>& names) {
  fb::Experiment exp(load(g));
  std::vector<std::string> all;
  for (const auto& d : exp.config().datasets) all.push_back(d.name);
  const fs::path dir = exp.config().output_dir / "index";
  fs::create_directories(dir);
  std::ofstream csv(dir / "bm25.csv");
  csv << "dataset,docs,queries,train,test,relevant,vocabulary,avg_doc_len,k1,b," << exp.config().metric << '\n';
  for (const auto& n : all_or(names, all)) {
    const auto& ds = exp.dataset(n);
    const auto& idx = exp.index(n);
    const auto& p = exp.bm25(n);
    const double ref = exp.bm25_reference(n);
    csv << n << ',' << ds.documents().size() << ',' << ds.queries().size() << ',' << ds.train_queries().size() << ','
        << ds.test_queries().size() << ',' << ds.relevant_count() << ',' << idx.vocabulary_size() << ','
        << fb::format_exact(idx.avg_doc_len()) << ',' << fb::format_exact(p.k1) << ',' << fb::format_exact(p.b)
        << ',' << fb::format_exact(ref) << '\n';
    std::ofstream run(dir / (n + ".bm25.run"));
    fb::write_trec_run(run, fb::prerank(ds, idx, p, ds.test_queries(), exp.config().train.rerank_depth), "bm25");
    std::cout << n << ": " << ds.documents().size() << " docs, k1=" << p.k1 << " b=" << p.b << ", "
              << exp.config().metric << "=" << ref << '\n';
  }
  return 0;
}

int cmd_train_oracle(const Globals& g, const std::string& dataset, const std::string& model_name) {
  fb::Experiment exp(load(g));
  const auto& model = model_name.empty() ? exp.config().models.front() : exp.config().model(model_name);
  const fs::path dir = exp.config().output_dir / "oracles";
  fs::create_directories(dir);
  for (std::uint64_t seed : exp.config().seeds) {
    const fb::Ranker ranker = exp.ranker(model, seed);
    const auto& oracle = exp.oracle(ranker, dataset, seed);
    const std::string stem = dataset + "." + model.name + ".s" + std::to_string(seed);
    fb::ParamFile pf{oracle.params, {{"kind", "oracle"}, {"dataset", dataset}, {"model", model.name}}};
    fb::write_param_file(dir / (stem + ".params"), pf);
    std::ofstream log(dir / (stem + ".log.csv"));
    fb::write_training_log(log, oracle.log);
    const double test = exp.measure(ranker, oracle.params, dataset, exp.config().alpha);
    std::cout << stem << ": selection " << oracle.selection << ", test " << exp.config().metric << " " << test
              << " (bm25 " << exp.bm25_reference(dataset) << ")\n";
  }
  return 0;
}

int finish(const std::vector<fb::SettingRun>& runs, const fs::path& dir) {
  fb::emit_reports(runs, dir);
  fb::write_summary_table(std::cout, runs);
  int partial = 0;
  for (const auto& r : runs) partial += r.complete ? 0 : 1;
  if (partial) std::cerr << partial << " run(s) incomplete; see summary.csv\n";
  return partial ? 1 : 0;
}

int cmd_run_setting(const Globals& g, const std::vector<std::string>& settings, const std::vector<std::string>& models,
                    const std::vector<std::string>& strategies) {
  fb::Experiment exp(load(g));
  const auto& cfg = exp.config();
  write_config_echo(cfg);
  std::vector<fb::Strategy> strats = cfg.strategies;
  if (!strategies.empty()) {
    strats.clear();
    for (const auto& s : strategies) strats.push_back(fb::parse_strategy(s));
  }
  std::vector<std::string> all_settings, all_models;
  for (const auto& s : cfg.settings) all_settings.push_back(s.name);
  for (const auto& m : cfg.models) all_models.push_back(m.name);
  std::vector<fb::SettingRun> runs;
  for (std::uint64_t seed : cfg.seeds) {
    for (const auto& s : all_or(settings, all_settings)) {
      for (const auto& m : all_or(models, all_models)) {
        auto r = fb::run_setting(exp, cfg.setting(s), cfg.model(m), strats, seed);
        runs.insert(runs.end(), r.begin(), r.end());
      }
    }
  }
  return finish(runs, cfg.output_dir);
}

int cmd_run_rq2(const Globals& g) {
  fb::Experiment exp(load(g));
  const auto& cfg = exp.config();
  if (!cfg.rq2) throw fb::ConfigError("the config has no \"rq2\" section");
  write_config_echo(cfg);
  const auto result = fb::run_rq2(exp, *cfg.rq2, cfg.seeds.front(), cfg.output_dir);
  fb::write_regression_table(std::cout, result.rem_fit, "REM");
  std::cout << '\n';
  fb::write_regression_table(std::cout, result.remn_fit, "REMN");
  if (result.failed) std::cerr << result.failed << " sample(s) failed and were excluded\n";
  return 0;
}

int cmd_metrics(const std::string& qrels_path, const std::string& run_path, const std::vector<std::string>& metrics) {
  const fb::Qrels qrels = fb::read_qrels_file(qrels_path);
  const fb::RankedRun run = fb::read_trec_run(run_path);
  for (const auto& m : metrics) {
    const auto id = fb::MetricId::parse(m);
    std::cout << id.name() << '\t' << fb::format_exact(fb::evaluate(id, run.queries, qrels)) << '\n';
  }
  return 0;
}

int cmd_report(const Globals& g) {
  fb::Experiment exp(load(g));
  const auto& cfg = exp.config();
  write_config_echo(cfg);
  int status = finish(fb::run_all(exp), cfg.output_dir);
  if (cfg.rq2) {
    const auto result = fb::run_rq2(exp, *cfg.rq2, cfg.seeds.front(), cfg.output_dir);
    std::cout << '\n';
    fb::write_regression_table(std::cout, result.rem_fit, "REM");
    if (result.failed) std::cerr << result.failed << " rq2 sample(s) failed and were excluded\n";
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Catastrophic forgetting benchmark for neural re-rankers"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Use only this seed");
  app.add_option("--out", g.out, "Output directory (overrides the config)");

  std::vector<std::string> index_names;
  auto* index = app.add_subcommand("index", "Index datasets, tune BM25 and write baseline runs");
  index->add_option("--dataset", index_names, "Datasets (default: all)");

  std::string oracle_dataset, oracle_model;
  auto* oracle = app.add_subcommand("train-oracle", "Train the oracle of one dataset");
  oracle->add_option("--dataset", oracle_dataset)->required();
  oracle->add_option("--model", oracle_model, "Model name (default: first)");

  std::vector<std::string> settings, models, strategies;
  auto* setting = app.add_subcommand("run-setting", "Measure forgetting on settings");
  setting->add_option("--setting", settings, "Settings (default: all)");
  setting->add_option("--model", models, "Models (default: all)");
  setting->add_option("--strategy", strategies, "finetune and/or ewc (default: from config)");

  auto* rq2 = app.add_subcommand("run-rq2", "Regress forgetting on dataset characteristics");

  std::string qrels, run;
  std::vector<std::string> metric_names = {"map@100", "p@20", "ndcg@20"};
  auto* metrics = app.add_subcommand("metrics", "Evaluate a TREC run file");
  metrics->add_option("--qrels", qrels)->required()->check(CLI::ExistingFile);
  metrics->add_option("--run", run)->required()->check(CLI::ExistingFile);
  metrics->add_option("--metric", metric_names);

  auto* report = app.add_subcommand("report", "Run every configured setting (and rq2) and write all reports");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;

  fb::set_warning_sink([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
  try {
    if (*index) return cmd_index(g, index_names);
    if (*oracle) return cmd_train_oracle(g, oracle_dataset, oracle_model);
    if (*setting) return cmd_run_setting(g, settings, models, strategies);
    if (*rq2) return cmd_run_rq2(g);
    if (*metrics) return cmd_metrics(qrels, run, metric_names);
    if (*report) return cmd_report(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
