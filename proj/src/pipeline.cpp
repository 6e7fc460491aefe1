#include "forgetbench/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "forgetbench/error.hpp"
#include "forgetbench/param_io.hpp"
#include "forgetbench/rng.hpp"

namespace forgetbench {

namespace fs = std::filesystem;
using ad::ParamVector;

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::string csv_cell(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

std::string num(double v) { return std::isfinite(v) ? format_exact(v) : std::string(); }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

Dataset load_source(const DatasetSource& src) {
  if (const auto* syn = std::get_if<SyntheticSource>(&src.source)) {
    return generate_synthetic_domain(src.name, syn->seed, syn->spec);
  }
  const auto& trec = std::get<TrecSource>(src.source);
  const SplitSpec split = trec.train_ids ? SplitSpec::from_files(*trec.train_ids, *trec.test_ids)
                                         : SplitSpec::parse(trec.split, trec.split_seed);
  return load_trec_dataset(src.name, trec.docs, trec.queries, trec.qrels, split);
}

}  // namespace

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) { config_.validate(); }

const Dataset& Experiment::dataset(const std::string& name) {
  if (auto it = datasets_.find(name); it != datasets_.end()) return *it->second;
  auto ds = std::make_unique<Dataset>(load_source(config_.dataset(name)));
  return *datasets_.emplace(name, std::move(ds)).first->second;
}

const Dataset& Experiment::add_dataset(Dataset dataset) {
  const std::string name = dataset.name();
  if (datasets_.count(name)) throw ConfigError("dataset '" + name + "' is already registered");
  for (const auto& src : config_.datasets) {
    if (src.name == name) throw ConfigError("dataset '" + name + "' clashes with a configured dataset");
  }
  return *datasets_.emplace(name, std::make_unique<Dataset>(std::move(dataset))).first->second;
}

const BM25Index& Experiment::index(const std::string& name) {
  if (auto it = indexes_.find(name); it != indexes_.end()) return *it->second;
  auto idx = std::make_unique<BM25Index>(dataset(name));
  return *indexes_.emplace(name, std::move(idx)).first->second;
}

const BM25Params& Experiment::bm25(const std::string& name) {
  if (auto it = bm25_.find(name); it != bm25_.end()) return it->second;
  const auto params = grid_search_bm25(dataset(name), index(name), config_.bm25_grid, config_.bm25_metric);
  return bm25_.emplace(name, params).first->second;
}

double Experiment::bm25_reference(const std::string& name) {
  if (auto it = bm25_ref_.find(name); it != bm25_ref_.end()) return it->second;
  const Dataset& ds = dataset(name);
  const auto run = prerank(ds, index(name), bm25(name), ds.test_queries(), config_.train.rerank_depth);
  const double value = evaluate(MetricId::parse(config_.metric), run, ds.qrel_map());
  bm25_ref_.emplace(name, value);
  return value;
}

std::vector<std::string> Experiment::setting_order(const SettingSpec& setting) {
  if (!setting.sort_by_train_size) return setting.datasets;
  std::vector<const Dataset*> ds;
  for (const auto& n : setting.datasets) ds.push_back(&dataset(n));
  std::vector<std::string> names;
  for (const Dataset* d : sort_by_train_size(ds)) names.push_back(d->name());
  return names;
}

const std::vector<std::string>& Experiment::vocabulary() {
  if (vocabulary_) return *vocabulary_;
  std::set<std::string> tokens;
  for (const auto& src : config_.datasets) {
    const Dataset& ds = dataset(src.name);
    for (const auto& d : ds.documents()) tokens.insert(d.tokens.begin(), d.tokens.end());
    for (const auto& q : ds.queries()) tokens.insert(q.tokens.begin(), q.tokens.end());
  }
  vocabulary_.emplace(tokens.begin(), tokens.end());
  return *vocabulary_;
}

Ranker Experiment::ranker(const ModelSpec& model, std::uint64_t seed) {
  if (model.embeddings) {
    return Ranker(model.ranker, EmbeddingTable::load_text(*model.embeddings, model.trainable_embeddings, seed));
  }
  return Ranker(model.ranker, EmbeddingTable::random(vocabulary(), model.ranker.embedding_dim,
                                                     mix_seed(seed, 0xE3B), model.trainable_embeddings));
}

const OracleModel& Experiment::oracle(const Ranker& ranker, const std::string& name, std::uint64_t seed) {
  const Dataset& ds = dataset(name);
  TrainConfig tc = config_.train;
  tc.seed = seed;
  const BM25Params& params = bm25(name);
  std::uint64_t key = ds.content_hash();
  key = mix_seed(key, fnv1a(name));
  key = mix_seed(key, fnv1a(ranker.config().describe()));
  key = mix_seed(key, ranker.embeddings().content_hash());
  key = mix_seed(key, fnv1a(tc.describe()));
  key = mix_seed(key, fnv1a(format_exact(params.k1) + "/" + format_exact(params.b)));
  if (auto it = oracles_.find(key); it != oracles_.end()) return it->second;

  const fs::path file = cache_dir() / ("oracle-" + hex64(key) + ".params");
  const fs::path log_file = cache_dir() / ("oracle-" + hex64(key) + ".log.csv");
  if (config_.cache && fs::exists(file) && fs::exists(log_file)) {
    try {
      ParamFile pf = read_param_file(file);
      std::ifstream in(log_file);
      OracleModel m{std::move(pf.params), name, std::stod(pf.metadata.at("selection")), read_training_log(in)};
      return oracles_.emplace(key, std::move(m)).first->second;
    } catch (const std::exception& e) {
      warn("ignoring unreadable oracle cache " + file.string() + ": " + e.what());
    }
  }
  OracleModel m = train_oracle(ranker, ds, index(name), params, tc);
  if (config_.cache) {
    ParamFile pf{m.params, {{"kind", "oracle"}, {"dataset", name}, {"selection", format_exact(m.selection)}}};
    write_param_file(file, pf);
    auto out = open_out(log_file);
    write_training_log(out, m.log);
  }
  return oracles_.emplace(key, std::move(m)).first->second;
}

FisherDiagonal Experiment::fisher(const Ranker& ranker, const ParamVector& params, const std::string& name,
                                  std::uint64_t seed) {
  const Dataset& ds = dataset(name);
  std::uint64_t key = mix_seed(ds.content_hash(), seed);
  key = mix_seed(key, fnv1a(ranker.config().describe()));
  key = mix_seed(key, ranker.embeddings().content_hash());
  key = mix_seed(key, config_.fisher_pairs);
  key = mix_seed(key, config_.train.rerank_depth);
  for (double v : params.values()) key = mix_seed(key, fnv1a(format_exact(v)));
  const fs::path file = cache_dir() / ("fisher-" + hex64(key) + ".params");
  if (config_.cache && fs::exists(file)) {
    try {
      const EWCAnchor a = read_anchor(file);
      return a.fisher;
    } catch (const std::exception& e) {
      warn("ignoring unreadable Fisher cache " + file.string() + ": " + e.what());
    }
  }
  FisherDiagonal f = estimate_fisher_diagonal(ranker, params, ds, index(name), bm25(name), config_.fisher_pairs,
                                              seed, config_.train.rerank_depth);
  if (config_.cache) {
    fs::create_directories(cache_dir());
    write_anchor(file, EWCAnchor{params, f}, config_.lambda);
  }
  return f;
}

double Experiment::measure(const Ranker& ranker, const ParamVector& params, const std::string& name, double alpha,
                           RankedRun* run) {
  const Dataset& ds = dataset(name);
  const auto ranked = rerank_queries(ranker, params, ds, index(name), bm25(name), ds.test_queries(),
                                     config_.train.rerank_depth, alpha);
  if (run) run->queries = ranked;
  return evaluate(MetricId::parse(config_.metric), ranked, ds.qrel_map());
}

std::vector<const Dataset*> sort_by_train_size(std::vector<const Dataset*> datasets) {
  std::stable_sort(datasets.begin(), datasets.end(), [](const Dataset* a, const Dataset* b) {
    return a->train_queries().size() > b->train_queries().size();
  });
  return datasets;
}

// ---------------------------------------------------------------------------

namespace {

void finish_measures(SettingRun& r) {
  r.bwt = bwt(r.global);
  r.rem = rem(r.bwt);
  r.pr = pr(r.global);
  r.bwt_n = bwt(r.neural);
  r.remn = rem(r.bwt_n);
  r.pr_n = pr(r.neural);
}

}  // namespace

std::vector<SettingRun> run_setting(Experiment& exp, const SettingSpec& setting, const ModelSpec& model,
                                    const std::vector<Strategy>& strategies, std::uint64_t seed) {
  const ExperimentConfig& cfg = exp.config();
  const MetricId metric = MetricId::parse(cfg.metric);
  const auto order = exp.setting_order(setting);
  const std::size_t n = order.size();
  if (n < 2) throw ConfigError("setting '" + setting.name + "' needs at least two datasets");
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<SettingRun> out;
  for (Strategy s : strategies) {
    SettingRun r;
    r.model = model.name;
    r.setting = setting.name;
    r.strategy = std::string(strategy_name(s));
    r.seed = seed;
    r.datasets = order;
    r.alpha = cfg.alpha;
    r.global = PerformanceMatrix(n, metric);
    r.neural = PerformanceMatrix(n, metric);
    out.push_back(std::move(r));
  }
  auto fail_all = [&](const std::string& stage, const std::exception& e) {
    for (auto& r : out) {
      r.complete = false;
      r.error = stage + ": " + e.what();
    }
    warn(setting.name + "/" + model.name + ": " + stage + ": " + e.what());
  };

  // Oracles and references, shared by every strategy.
  std::optional<Ranker> ranker;
  std::vector<const OracleModel*> oracles;
  std::vector<double> oracle_g(n), oracle_n(n), ref(n);
  double delta = 0.0, delta_n = 0.0;
  std::vector<RankedRun> shared_runs;
  std::vector<TrainingLog> shared_logs;
  try {
    ranker.emplace(exp.ranker(model, seed));
    for (std::size_t j = 0; j < n; ++j) {
      const OracleModel& o = exp.oracle(*ranker, order[j], seed);
      oracles.push_back(&o);
      RankedRun run{"oracle." + order[j] + "." + model.name, {}};
      oracle_g[j] = exp.measure(*ranker, o.params, order[j], cfg.alpha, &run);
      oracle_n[j] = exp.measure(*ranker, o.params, order[j], 1.0);
      ref[j] = exp.bm25_reference(order[j]);
      shared_runs.push_back(std::move(run));
      shared_logs.push_back({"oracle." + order[j], o.log});
    }
    delta = delta_map(oracle_g[0], ref[0]);
    delta_n = delta_map(oracle_n[0], ref[0]);
  } catch (const std::exception& e) {
    fail_all("oracle", e);
    return out;
  }

  for (std::size_t si = 0; si < strategies.size(); ++si) {
    SettingRun& r = out[si];
    r.logs = shared_logs;
    r.runs = shared_runs;
    for (std::size_t j = 1; j <= n; ++j) {
      r.global.set_oracle(j, oracle_g[j - 1]);
      r.neural.set_oracle(j, oracle_n[j - 1]);
      r.global.set_bm25(j, ref[j - 1]);
      r.neural.set_bm25(j, ref[j - 1]);
    }
    r.global.set(1, 1, oracle_g[0]);
    r.neural.set(1, 1, oracle_n[0]);
    r.delta_map = delta;
    r.delta_mapn = delta_n;

    std::string stage = "transfer";
    try {
      EWCState state;
      state.lambda = cfg.lambda;
      if (strategies[si] == Strategy::ewc) {
        stage = "fisher " + order[0];
        state.anchors.push_back(
            {oracles[0]->params, exp.fisher(*ranker, oracles[0]->params, order[0], mix_seed(seed, fnv1a(order[0])))});
      }
      ParamVector current = oracles[0]->params;
      for (std::size_t k = 2; k <= n; ++k) {
        const std::string& next = order[k - 1];
        stage = "transfer to " + next;
        TrainConfig tc = cfg.train;
        // Same per-step seed for every strategy so they differ only by the penalty.
        tc.seed = mix_seed(seed, 0x57E9 + k);
        TransferOptions opts{cfg.fisher_pairs, mix_seed(seed, fnv1a(next))};
        auto result = transfer(strategies[si], *ranker, current, exp.dataset(next), exp.index(next), exp.bm25(next), tc,
                               std::move(state), opts);
        state = std::move(result.state);
        current = std::move(result.train.params);
        r.logs.push_back({r.strategy + ".step" + std::to_string(k) + "." + next, std::move(result.train.log)});
        stage = "evaluation after " + next;
        for (std::size_t j = 1; j <= k; ++j) {
          RankedRun run{r.strategy + ".step" + std::to_string(k) + "." + order[j - 1] + "." + model.name, {}};
          r.global.set(k, j, exp.measure(*ranker, current, order[j - 1], cfg.alpha, &run));
          r.neural.set(k, j, exp.measure(*ranker, current, order[j - 1], 1.0));
          r.runs.push_back(std::move(run));
        }
      }
      stage = "measures";
      finish_measures(r);
      r.complete = true;
    } catch (const std::exception& e) {
      r.complete = false;
      r.error = stage + ": " + e.what();
      warn(setting.name + "/" + model.name + "/" + r.strategy + ": " + r.error);
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (auto& r : out) r.seconds = secs / static_cast<double>(out.size());
  return out;
}

std::vector<SettingRun> run_all(Experiment& exp) {
  std::vector<SettingRun> all;
  for (std::uint64_t seed : exp.config().seeds) {
    for (const auto& s : exp.config().settings) {
      for (const auto& m : exp.config().models) {
        auto runs = run_setting(exp, s, m, exp.config().strategies, seed);
        std::move(runs.begin(), runs.end(), std::back_inserter(all));
      }
    }
  }
  return all;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

const SettingRun* finetune_peer(const std::vector<SettingRun>& runs, const SettingRun& r) {
  for (const auto& o : runs) {
    if (o.strategy == "finetune" && o.complete && o.model == r.model && o.setting == r.setting && o.seed == r.seed) {
      return &o;
    }
  }
  return nullptr;
}

double relative_pct(double x, double base) {
  return base == 0.0 ? std::numeric_limits<double>::quiet_NaN() : 100.0 * (x - base) / base;
}

constexpr const char* kSummaryHeader =
    "model,setting,strategy,seed,datasets,alpha,metric,bwt,rem,pr,delta_map,bwt_n,remn,pr_n,delta_mapn,"
    "delta_rem,delta_remn,status";

}  // namespace

void write_summary_csv(std::ostream& out, const std::vector<SettingRun>& runs) {
  out << kSummaryHeader << '\n';
  for (const auto& r : runs) {
    out << csv_cell(r.model) << ',' << csv_cell(r.setting) << ',' << r.strategy << ',' << r.seed << ','
        << csv_cell(join(r.datasets, ">")) << ',' << format_exact(r.alpha) << ',' << r.global.metric().name() << ',';
    if (!r.complete) {
      out << ",,,,,,,,,,partial: " << csv_cell(r.error) << '\n';
      continue;
    }
    double drem = std::numeric_limits<double>::quiet_NaN(), dremn = drem;
    if (r.strategy != "finetune") {
      if (const SettingRun* ft = finetune_peer(runs, r)) {
        drem = relative_pct(r.rem, ft->rem);
        dremn = relative_pct(r.remn, ft->remn);
      }
    }
    out << num(r.bwt) << ',' << num(r.rem) << ',' << num(r.pr) << ',' << num(r.delta_map) << ',' << num(r.bwt_n)
        << ',' << num(r.remn) << ',' << num(r.pr_n) << ',' << num(r.delta_mapn) << ',' << num(drem) << ','
        << num(dremn) << ",complete\n";
  }
}

namespace {

struct MeanRow {
  std::string model, setting, strategy;
  std::size_t count = 0, partial = 0;
  double v[10] = {};
};

std::vector<MeanRow> mean_rows(const std::vector<SettingRun>& runs) {
  std::vector<MeanRow> rows;
  for (const auto& r : runs) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const MeanRow& m) {
      return m.model == r.model && m.setting == r.setting && m.strategy == r.strategy;
    });
    if (it == rows.end()) {
      rows.push_back({r.model, r.setting, r.strategy});
      it = rows.end() - 1;
    }
    if (!r.complete) {
      ++it->partial;
      continue;
    }
    double drem = 0.0, dremn = 0.0;
    if (r.strategy != "finetune") {
      if (const SettingRun* ft = finetune_peer(runs, r)) {
        drem = relative_pct(r.rem, ft->rem);
        dremn = relative_pct(r.remn, ft->remn);
      }
    }
    const double vals[10] = {r.bwt, r.rem, r.pr, r.delta_map, r.bwt_n, r.remn, r.pr_n, r.delta_mapn, drem, dremn};
    for (int i = 0; i < 10; ++i) it->v[i] += vals[i];
    ++it->count;
  }
  for (auto& m : rows) {
    for (double& x : m.v) x = m.count ? x / static_cast<double>(m.count) : std::numeric_limits<double>::quiet_NaN();
    if (m.strategy == "finetune") m.v[8] = m.v[9] = std::numeric_limits<double>::quiet_NaN();
  }
  return rows;
}

}  // namespace

void write_summary_mean_csv(std::ostream& out, const std::vector<SettingRun>& runs) {
  out << "model,setting,strategy,n_seeds,n_partial,bwt,rem,pr,delta_map,bwt_n,remn,pr_n,delta_mapn,delta_rem,"
         "delta_remn\n";
  for (const auto& m : mean_rows(runs)) {
    out << csv_cell(m.model) << ',' << csv_cell(m.setting) << ',' << m.strategy << ',' << m.count << ','
        << m.partial;
    for (double x : m.v) out << ',' << num(x);
    out << '\n';
  }
}

void write_summary_table(std::ostream& out, const std::vector<SettingRun>& runs) {
  const auto rows = mean_rows(runs);
  auto cell = [](double x) {
    if (!std::isfinite(x)) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << x;
    return s.str();
  };
  std::size_t w = 7;
  for (const auto& m : rows) w = std::max(w, m.setting.size());
  out << std::left << std::setw(static_cast<int>(w)) << "setting" << "  " << std::setw(10) << "model"
      << std::setw(10) << "strategy" << std::right;
  for (const char* h : {"REM", "PR", "dMAP%", "REMN", "PRN", "dMAPN%", "dREM%"}) out << std::setw(9) << h;
  out << "  seeds\n";
  for (const auto& m : rows) {
    out << std::left << std::setw(static_cast<int>(w)) << m.setting << "  " << std::setw(10) << m.model
        << std::setw(10) << m.strategy << std::right;
    for (int i : {1, 2, 3, 5, 6, 7, 8}) out << std::setw(9) << cell(m.v[i]);
    out << "  " << m.count;
    if (m.partial) out << " (+" << m.partial << " partial)";
    out << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const std::vector<SettingRun>& runs) {
  out << "model,setting,strategy,seed,score,kind,i,j,dataset,value\n";
  for (const auto& r : runs) {
    for (int which = 0; which < 2; ++which) {
      const PerformanceMatrix& m = which ? r.neural : r.global;
      const char* score = which ? "neural" : "global";
      auto prefix = [&](std::ostream& o) {
        o << csv_cell(r.model) << ',' << csv_cell(r.setting) << ',' << r.strategy << ',' << r.seed << ',' << score
          << ',';
      };
      for (const auto& [ij, v] : m.cells()) {
        prefix(out);
        out << "R," << ij.first << ',' << ij.second << ',' << csv_cell(r.datasets[ij.second - 1]) << ','
            << format_exact(v) << '\n';
      }
      if (!r.error.empty() && r.error.rfind("oracle", 0) == 0) continue;
      for (std::size_t j = 1; j <= m.n(); ++j) {
        prefix(out);
        out << "oracle," << j << ',' << j << ',' << csv_cell(r.datasets[j - 1]) << ',' << format_exact(m.oracle(j))
            << '\n';
        prefix(out);
        out << "bm25,," << j << ',' << csv_cell(r.datasets[j - 1]) << ',' << format_exact(m.bm25(j)) << '\n';
      }
    }
  }
}

void emit_reports(const std::vector<SettingRun>& runs, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, runs);
  }
  {
    auto out = open_out(dir / "summary_mean.csv");
    write_summary_mean_csv(out, runs);
  }
  {
    auto out = open_out(dir / "summary.txt");
    write_summary_table(out, runs);
  }
  {
    auto out = open_out(dir / "matrix.csv");
    write_matrix_csv(out, runs);
  }
  {
    auto out = open_out(dir / "timing.csv");
    out << "model,setting,strategy,seed,seconds\n";
    for (const auto& r : runs) {
      out << csv_cell(r.model) << ',' << csv_cell(r.setting) << ',' << r.strategy << ',' << r.seed << ','
          << num(r.seconds) << '\n';
    }
  }
  std::set<std::string> written;
  for (const auto& r : runs) {
    const std::string base = r.setting + "." + r.model + ".s" + std::to_string(r.seed);
    for (const auto& run : r.runs) {
      const std::string name = base + "." + run.tag + ".run";
      if (!written.insert(name).second) continue;
      auto out = open_out(dir / "runs" / name);
      write_trec_run(out, run.queries, run.tag);
    }
    for (const auto& log : r.logs) {
      const std::string name = base + "." + log.label + ".csv";
      if (!written.insert(name).second) continue;
      auto out = open_out(dir / "logs" / name);
      write_training_log(out, log.epochs);
    }
  }
}

// ---------------------------------------------------------------------------
// Characteristics of sampled sub-datasets

void write_rq2_samples_csv(std::ostream& out, const std::vector<Rq2Sample>& samples) {
  std::set<std::string> models;
  for (const auto& s : samples) {
    for (const auto& [m, v] : s.rem) models.insert(m);
  }
  out << "setting,sample,subdataset";
  for (const auto& name : FeatureVector::names()) out << ',' << name;
  for (const auto& m : models) out << ",rem." << csv_cell(m) << ",remn." << csv_cell(m);
  out << ",status\n";
  for (const auto& s : samples) {
    out << csv_cell(s.setting) << ',' << s.index << ',' << csv_cell(s.subdataset);
    if (s.ok) {
      for (double v : s.features.values()) out << ',' << num(v);
    } else {
      for (std::size_t i = 0; i < FeatureVector::size; ++i) out << ',';
    }
    for (const auto& m : models) {
      auto a = s.rem.find(m), b = s.remn.find(m);
      out << ',' << (a != s.rem.end() ? num(a->second) : "") << ',' << (b != s.remn.end() ? num(b->second) : "");
    }
    out << ',' << (s.ok ? std::string("ok") : "failed: " + csv_cell(s.error)) << '\n';
  }
}

Rq2Result run_rq2(Experiment& exp, const Rq2Spec& spec, std::uint64_t seed, const fs::path& out_dir) {
  const ExperimentConfig& cfg = exp.config();
  Rq2Result result;
  const fs::path root = out_dir / "rq2";
  fs::create_directories(root);
  for (const auto& setting_name : spec.settings) {
    const SettingSpec& setting = cfg.setting(setting_name);
    const auto order = exp.setting_order(setting);
    const std::string& left = order.front();
    const Dataset& parent = exp.dataset(left);
    const std::size_t nq = spec.sample_queries ? spec.sample_queries : std::max<std::size_t>(2, parent.queries().size() / 2);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
      Rq2Sample sample;
      sample.setting = setting.name;
      sample.index = i;
      std::ostringstream name;
      name << left << "~" << setting.name << "~s" << std::setw(3) << std::setfill('0') << i;
      sample.subdataset = name.str();
      try {
        Dataset sub = sample_subdataset(parent, nq, exp.index(left), exp.bm25(left), static_cast<int>(spec.sample_depth),
                                        mix_seed(mix_seed(spec.seed, fnv1a(setting.name)), i))
                          .renamed(sample.subdataset);
        sample.files = write_trec_dataset(sub, root / setting.name, sample.subdataset);
        const Dataset& reg = exp.add_dataset(std::move(sub));
        sample.features = compute_features(reg, exp.index(reg.name()), exp.bm25(reg.name()));
        SettingSpec sub_setting{setting.name + "#" + std::to_string(i), order, false};
        sub_setting.datasets.front() = reg.name();
        for (const auto& model : cfg.models) {
          auto runs = run_setting(exp, sub_setting, model, {Strategy::finetune}, seed);
          if (!runs.front().complete) throw TrainingError(runs.front().error);
          sample.rem[model.name] = runs.front().rem;
          sample.remn[model.name] = runs.front().remn;
        }
        sample.ok = true;
      } catch (const std::exception& e) {
        sample.error = e.what();
        ++result.failed;
        warn("rq2 sample " + sample.subdataset + " failed: " + e.what());
      }
      result.samples.push_back(std::move(sample));
    }
  }
  {
    auto out = open_out(root / "samples.csv");
    write_rq2_samples_csv(out, result.samples);
  }

  std::vector<RegressionRow> rem_rows, remn_rows;
  for (const auto& s : result.samples) {
    if (!s.ok) continue;
    const std::string dataset = s.subdataset.substr(0, s.subdataset.find('~'));
    for (const auto& [model, v] : s.rem) {
      rem_rows.push_back({s.setting + "#" + std::to_string(s.index), dataset, model, v, s.features});
      remn_rows.push_back({s.setting + "#" + std::to_string(s.index), dataset, model, s.remn.at(model), s.features});
    }
  }
  result.rem_design = build_design(rem_rows);
  result.remn_design = build_design(remn_rows);
  {
    auto out = open_out(root / "design.csv");
    write_design_csv(out, result.rem_design);
  }
  result.rem_fit = ols_fit(result.rem_design);
  result.remn_fit = ols_fit(result.remn_design);
  {
    auto out = open_out(root / "regression_rem.csv");
    write_regression_csv(out, result.rem_fit);
  }
  {
    auto out = open_out(root / "regression_remn.csv");
    write_regression_csv(out, result.remn_fit);
  }
  {
    auto out = open_out(root / "regression.txt");
    write_regression_table(out, result.rem_fit, "REM");
    out << '\n';
    write_regression_table(out, result.remn_fit, "REMN");
  }
  return result;
}

}  // namespace forgetbench
