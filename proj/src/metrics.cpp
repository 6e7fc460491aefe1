#include "forgetbench/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "forgetbench/error.hpp"

namespace forgetbench {

MetricId MetricId::parse(std::string_view text) {
  auto at = text.find('@');
  if (at == std::string_view::npos) throw ConfigError("unknown metric '" + std::string(text) + "'");
  const auto head = text.substr(0, at);
  const auto tail = text.substr(at + 1);
  MetricId id;
  if (head == "map") {
    id.kind = MetricKind::average_precision;
  } else if (head == "p" || head == "P") {
    id.kind = MetricKind::precision;
  } else if (head == "ndcg") {
    id.kind = MetricKind::ndcg;
  } else {
    throw ConfigError("unknown metric '" + std::string(text) + "'");
  }
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), id.cutoff);
  if (ec != std::errc() || ptr != tail.data() + tail.size() || id.cutoff == 0) {
    throw ConfigError("bad cutoff in metric '" + std::string(text) + "'");
  }
  return id;
}

std::string MetricId::name() const {
  const char* head = kind == MetricKind::average_precision ? "map" : kind == MetricKind::precision ? "p" : "ndcg";
  return std::string(head) + "@" + std::to_string(cutoff);
}

namespace {
int grade_of(const Judgments& judged, const std::string& doc) {
  auto it = judged.find(doc);
  return it == judged.end() ? 0 : it->second;
}
}  // namespace

double average_precision(std::span<const std::string> ranking, const Judgments& judged, std::size_t cutoff) {
  if (cutoff == 0) throw ContractError("cutoff must be >= 1");
  std::size_t n_relevant = 0;
  for (const auto& [doc, g] : judged) n_relevant += g >= 1;
  if (n_relevant == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  const std::size_t depth = std::min(cutoff, ranking.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (grade_of(judged, ranking[r]) >= 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(std::min(n_relevant, cutoff));
}

double precision_at_k(std::span<const std::string> ranking, const Judgments& judged, std::size_t k) {
  if (k == 0) throw ContractError("k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) hits += grade_of(judged, ranking[r]) >= 1;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double ndcg_at_k(std::span<const std::string> ranking, const Judgments& judged, std::size_t k) {
  if (k == 0) throw ContractError("k must be >= 1");
  auto gain = [](int g) { return std::exp2(static_cast<double>(g)) - 1.0; };
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
    dcg += gain(grade_of(judged, ranking[r])) / std::log2(static_cast<double>(r) + 2.0);
  }
  std::vector<int> grades;
  for (const auto& [doc, g] : judged) grades.push_back(g);
  std::sort(grades.rbegin(), grades.rend());
  double ideal = 0.0;
  for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
    ideal += gain(grades[r]) / std::log2(static_cast<double>(r) + 2.0);
  }
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

double metric_value(const MetricId& metric, std::span<const std::string> ranking, const Judgments& judged) {
  switch (metric.kind) {
    case MetricKind::average_precision:
      return average_precision(ranking, judged, metric.cutoff);
    case MetricKind::precision:
      return precision_at_k(ranking, judged, metric.cutoff);
    case MetricKind::ndcg:
      return ndcg_at_k(ranking, judged, metric.cutoff);
  }
  return 0.0;
}

std::vector<std::pair<std::string, double>> per_query(const MetricId& metric, const std::vector<Candidates>& run,
                                                      const Qrels& qrels) {
  std::vector<std::pair<std::string, double>> out;
  std::vector<std::string> ids;
  for (const auto& c : run) {
    auto q = qrels.find(c.query_id);
    if (q == qrels.end()) continue;
    if (std::none_of(q->second.begin(), q->second.end(), [](const auto& e) { return e.second >= 1; })) continue;
    ids.clear();
    for (const auto& hit : c.ranking) ids.push_back(hit.doc_id);
    out.emplace_back(c.query_id, metric_value(metric, ids, q->second));
  }
  return out;
}

double evaluate(const MetricId& metric, const std::vector<Candidates>& run, const Qrels& qrels) {
  const auto values = per_query(metric, run, qrels);
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

Qrels read_qrels_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string q, zero, d, g;
    if (!(fields >> q)) continue;
    if (!(fields >> zero >> d >> g)) throw ParseError(path.string(), line_no, "expected 'query_id 0 doc_id grade'");
    int grade = 0;
    auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), grade);
    if (ec != std::errc() || ptr != g.data() + g.size()) throw ParseError(path.string(), line_no, "bad grade");
    qrels[q][d] = std::max(grade, 0);
  }
  return qrels;
}

RankedRun read_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  RankedRun run;
  std::map<std::string, std::vector<ScoredDoc>> by_query;
  std::vector<std::string> order;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string q, q0, d, rank, score, tag;
    if (!(fields >> q)) continue;
    if (!(fields >> q0 >> d >> rank >> score >> tag)) {
      throw ParseError(path.string(), line_no, "expected 'query_id Q0 doc_id rank score tag'");
    }
    double s = 0.0;
    try {
      s = std::stod(score);
    } catch (const std::exception&) {
      throw ParseError(path.string(), line_no, "bad score '" + score + "'");
    }
    if (!by_query.count(q)) order.push_back(q);
    by_query[q].push_back({d, s});
    run.tag = tag;
  }
  for (const auto& q : order) {
    auto ranking = std::move(by_query[q]);
    sort_ranking(ranking);
    run.queries.push_back({q, std::move(ranking)});
  }
  return run;
}

// ---------------------------------------------------------------------------

void PerformanceMatrix::set(std::size_t i, std::size_t j, double value) {
  if (i < 1 || j < 1 || i > n_ || j > i) throw ContractError("performance cell out of range");
  cells_[{i, j}] = value;
}
void PerformanceMatrix::set_oracle(std::size_t j, double value) {
  if (j < 1 || j > n_) throw ContractError("oracle index out of range");
  oracle_[j] = value;
}
void PerformanceMatrix::set_bm25(std::size_t j, double value) {
  if (j < 1 || j > n_) throw ContractError("bm25 index out of range");
  bm25_[j] = value;
}

double PerformanceMatrix::at(std::size_t i, std::size_t j) const {
  auto it = cells_.find({i, j});
  if (it == cells_.end()) throw ContractError("missing cell R(" + std::to_string(i) + "," + std::to_string(j) + ")");
  return it->second;
}
double PerformanceMatrix::oracle(std::size_t j) const {
  auto it = oracle_.find(j);
  if (it == oracle_.end()) throw ContractError("missing oracle R*(" + std::to_string(j) + "," + std::to_string(j) + ")");
  return it->second;
}
double PerformanceMatrix::bm25(std::size_t j) const {
  auto it = bm25_.find(j);
  if (it == bm25_.end()) throw ContractError("missing BM25 reference for dataset " + std::to_string(j));
  return it->second;
}

double bwt(const PerformanceMatrix& m) {
  if (m.n() < 2) throw ContractError("BWT needs n >= 2");
  double sum = 0.0;
  for (std::size_t i = 2; i <= m.n(); ++i) {
    for (std::size_t j = 1; j < i; ++j) {
      const double ref = m.bm25(j);
      if (ref == 0.0) throw ContractError("BM25 reference of dataset " + std::to_string(j) + " is zero");
      sum += (m.at(i, j) - m.oracle(j)) / ref;
    }
  }
  const double n = static_cast<double>(m.n());
  return sum / (n * (n - 1.0) / 2.0);
}

double rem(double bwt_value) { return 1.0 - std::fabs(std::min(bwt_value, 0.0)); }

double pr(const PerformanceMatrix& m) {
  if (m.n() < 2) throw ContractError("PR needs n >= 2");
  double sum = 0.0;
  for (std::size_t i = 2; i <= m.n(); ++i) {
    const double star = m.oracle(i);
    if (star == 0.0) throw ContractError("oracle performance R*(" + std::to_string(i) + ") is zero");
    sum += m.at(i, i) / star;
  }
  return sum / static_cast<double>(m.n() - 1);
}

double delta_map(double model_perf, double bm25_perf) {
  if (bm25_perf == 0.0) throw ContractError("BM25 performance is zero");
  return 100.0 * (model_perf - bm25_perf) / bm25_perf;
}

}  // namespace forgetbench
