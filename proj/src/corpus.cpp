#include "forgetbench/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "forgetbench/bm25.hpp"
#include "forgetbench/error.hpp"
#include "forgetbench/rng.hpp"
#include "forgetbench/text.hpp"

namespace forgetbench {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::string name, std::vector<Document> documents, std::vector<Query> queries,
                 std::vector<QrelEntry> qrels, std::vector<std::string> train_queries,
                 std::vector<std::string> test_queries)
    : name_(std::move(name)),
      documents_(std::move(documents)),
      queries_(std::move(queries)),
      qrels_(std::move(qrels)),
      train_(std::move(train_queries)),
      test_(std::move(test_queries)) {
  doc_index_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    const auto& d = documents_[i];
    if (d.tokens.empty()) throw ValidationError(name_ + ": document '" + d.doc_id + "' has no tokens");
    if (!doc_index_.emplace(d.doc_id, i).second) {
      throw ValidationError(name_ + ": duplicate doc_id '" + d.doc_id + "'");
    }
  }
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    const auto& q = queries_[i];
    if (q.tokens.empty()) throw ValidationError(name_ + ": query '" + q.query_id + "' has no tokens");
    if (!query_index_.emplace(q.query_id, i).second) {
      throw ValidationError(name_ + ": duplicate query_id '" + q.query_id + "'");
    }
  }
  for (const auto& e : qrels_) {
    if (!query_index_.count(e.query_id)) {
      throw ValidationError(name_ + ": qrel references unknown query '" + e.query_id + "'");
    }
    if (!doc_index_.count(e.doc_id)) {
      throw ValidationError(name_ + ": qrel references unknown document '" + e.doc_id + "'");
    }
    if (e.grade < 0) throw ValidationError(name_ + ": negative grade for " + e.query_id + "/" + e.doc_id);
    if (!qrel_map_[e.query_id].emplace(e.doc_id, e.grade).second) {
      throw ValidationError(name_ + ": duplicate qrel " + e.query_id + "/" + e.doc_id);
    }
    if (e.grade >= 1) ++relevant_count_;
  }
  std::set<std::string, std::less<>> seen;
  for (const auto& id : train_) {
    if (!query_index_.count(id)) throw ValidationError(name_ + ": train split names unknown query '" + id + "'");
    if (!seen.insert(id).second) throw ValidationError(name_ + ": query '" + id + "' repeated in split");
  }
  for (const auto& id : test_) {
    if (!query_index_.count(id)) throw ValidationError(name_ + ": test split names unknown query '" + id + "'");
    if (!seen.insert(id).second) {
      throw ValidationError(name_ + ": query '" + id + "' is in both train and test splits");
    }
  }
}

const Document& Dataset::document(std::string_view doc_id) const {
  auto it = doc_index_.find(std::string(doc_id));
  if (it == doc_index_.end()) throw LookupError(name_ + ": unknown document '" + std::string(doc_id) + "'");
  return documents_[it->second];
}

const Query& Dataset::query(std::string_view query_id) const {
  auto it = query_index_.find(std::string(query_id));
  if (it == query_index_.end()) throw LookupError(name_ + ": unknown query '" + std::string(query_id) + "'");
  return queries_[it->second];
}

bool Dataset::has_document(std::string_view doc_id) const { return doc_index_.count(std::string(doc_id)) > 0; }
bool Dataset::has_query(std::string_view query_id) const {
  return query_index_.count(std::string(query_id)) > 0;
}

int Dataset::grade(std::string_view query_id, std::string_view doc_id) const {
  auto q = qrel_map_.find(query_id);
  if (q == qrel_map_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

const std::map<std::string, int, std::less<>>& Dataset::judgments(std::string_view query_id) const {
  static const std::map<std::string, int, std::less<>> empty;
  auto q = qrel_map_.find(query_id);
  return q == qrel_map_.end() ? empty : q->second;
}

Dataset Dataset::with_split(std::vector<std::string> train, std::vector<std::string> test) const {
  return Dataset(name_, documents_, queries_, qrels_, std::move(train), std::move(test));
}

Dataset Dataset::renamed(std::string name) const {
  return Dataset(std::move(name), documents_, queries_, qrels_, train_, test_);
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = fnv1a(name_);
  auto feed = [&h](std::string_view s) {
    h = fnv1a(s, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  };
  for (const auto& d : documents_) {
    feed(d.doc_id);
    for (const auto& t : d.tokens) feed(t);
  }
  feed("#queries");
  for (const auto& q : queries_) {
    feed(q.query_id);
    for (const auto& t : q.tokens) feed(t);
  }
  feed("#qrels");
  for (const auto& e : qrels_) {
    feed(e.query_id);
    feed(e.doc_id);
    feed(std::to_string(e.grade));
  }
  feed("#train");
  for (const auto& id : train_) feed(id);
  feed("#test");
  for (const auto& id : test_) feed(id);
  return h;
}

bool Dataset::operator==(const Dataset& o) const {
  return name_ == o.name_ && documents_ == o.documents_ && queries_ == o.queries_ && qrels_ == o.qrels_ &&
         train_ == o.train_ && test_ == o.test_;
}

void StreamSetting::validate() const {
  if (datasets.size() < 2) throw ConfigError("setting '" + name + "' needs at least two datasets");
  std::set<std::string> names;
  for (const auto* d : datasets) {
    if (!d) throw ConfigError("setting '" + name + "' has a null dataset");
    if (!names.insert(d->name()).second) {
      throw ConfigError("setting '" + name + "' lists dataset '" + d->name() + "' twice");
    }
  }
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    ids.push_back(line.substr(first, last - first + 1));
  }
  return ids;
}

}  // namespace

SplitSpec SplitSpec::parse(std::string_view text, std::uint64_t seed) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) throw ConfigError("split spec must look like 'train/test': " + std::string(text));
  SplitProportion p{parse_count(text.substr(0, slash), "split train count"),
                    parse_count(text.substr(slash + 1), "split test count")};
  if (p.train + p.test == 0) throw ConfigError("split spec has zero total: " + std::string(text));
  return SplitSpec{p, seed};
}

SplitSpec SplitSpec::from_files(const fs::path& train, const fs::path& test) {
  return SplitSpec{SplitLists{read_id_list(train), read_id_list(test)}, 0};
}

SplitLists split_by_proportion(std::vector<std::string> ids, SplitProportion proportion, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, 0x5917));
  rng.shuffle(ids);
  const double frac = static_cast<double>(proportion.train) / static_cast<double>(proportion.train + proportion.test);
  const auto n_train = static_cast<std::size_t>(std::llround(frac * static_cast<double>(ids.size())));
  SplitLists out;
  out.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---------------------------------------------------------------------------
// TREC files

namespace {

struct TabLine {
  std::string id;
  std::vector<std::string> tokens;
};

std::vector<TabLine> read_tab_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TabLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError(path.string(), line_no, "expected '<id><TAB><text>'");
    }
    TabLine t{line.substr(0, tab), tokenize(std::string_view(line).substr(tab + 1))};
    if (t.tokens.empty()) throw ParseError(path.string(), line_no, "text of '" + t.id + "' has no tokens");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<QrelEntry> read_qrels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<QrelEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(f);
    if (cols.empty()) continue;
    if (cols.size() != 4) throw ParseError(path.string(), line_no, "expected 'query_id 0 doc_id grade'");
    int grade = 0;
    auto [ptr, ec] = std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), grade);
    if (ec != std::errc() || ptr != cols[3].data() + cols[3].size()) {
      throw ParseError(path.string(), line_no, "grade '" + cols[3] + "' is not an integer");
    }
    if (grade < 0) grade = 0;  // some collections mark non-relevant with -1
    out.push_back({cols[0], cols[2], grade});
  }
  return out;
}

}  // namespace

Dataset load_trec_dataset(std::string name, const fs::path& doc_path, const fs::path& query_path,
                          const fs::path& qrels_path, const SplitSpec& split) {
  std::vector<Document> docs;
  for (auto& t : read_tab_lines(doc_path)) docs.push_back({std::move(t.id), std::move(t.tokens)});
  std::vector<Query> queries;
  for (auto& t : read_tab_lines(query_path)) queries.push_back({std::move(t.id), std::move(t.tokens)});
  auto qrels = read_qrels(qrels_path);
  if (qrels.empty()) warn(qrels_path.string() + ": no relevance judgments");

  SplitLists lists;
  if (const auto* p = std::get_if<SplitProportion>(&split.value)) {
    std::vector<std::string> ids;
    for (const auto& q : queries) ids.push_back(q.query_id);
    lists = split_by_proportion(std::move(ids), *p, split.seed);
  } else {
    lists = std::get<SplitLists>(split.value);
  }
  return Dataset(std::move(name), std::move(docs), std::move(queries), std::move(qrels), std::move(lists.train),
                 std::move(lists.test));
}

TrecPaths write_trec_dataset(const Dataset& dataset, const fs::path& dir, std::string_view stem) {
  fs::create_directories(dir);
  const std::string s(stem);
  TrecPaths paths{dir / (s + ".docs.tsv"), dir / (s + ".queries.tsv"), dir / (s + ".qrels"),
                  dir / (s + ".train.ids"), dir / (s + ".test.ids")};
  auto open = [](const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(paths.docs);
    for (const auto& d : dataset.documents()) out << d.doc_id << '\t' << join_tokens(d.tokens) << '\n';
  }
  {
    auto out = open(paths.queries);
    for (const auto& q : dataset.queries()) out << q.query_id << '\t' << join_tokens(q.tokens) << '\n';
  }
  {
    auto out = open(paths.qrels);
    for (const auto& e : dataset.qrels()) out << e.query_id << " 0 " << e.doc_id << ' ' << e.grade << '\n';
  }
  {
    auto out = open(paths.train_ids);
    for (const auto& id : dataset.train_queries()) out << id << '\n';
  }
  {
    auto out = open(paths.test_ids);
    for (const auto& id : dataset.test_queries()) out << id << '\n';
  }
  return paths;
}

Dataset load_written_dataset(std::string name, const TrecPaths& paths) {
  return load_trec_dataset(std::move(name), paths.docs, paths.queries, paths.qrels,
                           SplitSpec::from_files(paths.train_ids, paths.test_ids));
}

// ---------------------------------------------------------------------------
// Synthetic domains

void SyntheticSpec::validate() const {
  if (n_docs < 1 || n_queries < 1 || vocab_size < 1) throw ConfigError("synthetic spec counts must be >= 1");
  if (doc_len_mean < 1.0 || query_len_mean < 1.0) throw ConfigError("synthetic spec mean lengths must be >= 1");
  if (!(relevance_density > 0.0 && relevance_density <= 1.0)) {
    throw ConfigError("relevance_density must lie in (0, 1]");
  }
  if (static_cast<double>(vocab_size) < query_len_mean) {
    throw ConfigError("vocab_size is smaller than query_len_mean");
  }
  if (static_cast<double>(vocab_size) < query_len_mean + static_cast<double>(topic_terms)) {
    throw ConfigError("vocab_size cannot hold query and topic terms");
  }
  if (relevant_len_scale <= 0.0) throw ConfigError("relevant_len_scale must be positive");
  if (relevant_tf <= 0.0) throw ConfigError("relevant_tf must be positive");
  if (distractor_rate < 0.0 || distractor_rate > 1.0) throw ConfigError("distractor_rate must lie in [0, 1]");
  if (distractor_tf < 1) throw ConfigError("distractor_tf must be >= 1");
  if (distractor_len_scale <= 0.0) throw ConfigError("distractor_len_scale must be positive");
  if (max_grade < 1) throw ConfigError("max_grade must be >= 1");
}

namespace {

std::string padded(char prefix, std::size_t value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

std::size_t draw_length(Rng& rng, double mean) {
  double len = mean > 50.0 ? std::round(mean + std::sqrt(mean) * rng.normal())
                           : static_cast<double>(rng.poisson(mean));
  return static_cast<std::size_t>(std::max(1.0, len));
}

// Distinct draws from [lo, hi).
std::vector<std::size_t> distinct_ranks(Rng& rng, std::size_t lo, std::size_t hi, std::size_t count) {
  std::vector<std::size_t> out;
  std::unordered_set<std::size_t> used;
  while (out.size() < count) {
    const std::size_t r = lo + rng.index(hi - lo);
    if (used.insert(r).second) out.push_back(r);
  }
  return out;
}

}  // namespace

Dataset generate_synthetic_domain(std::string name, std::uint64_t seed, const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(seed, 0xD0C5));

  auto term = [&](std::size_t rank) { return "w" + std::to_string(spec.domain_vocab_offset + rank); };

  // Zipfian background distribution over term ranks.
  std::vector<double> cdf(spec.vocab_size);
  double total = 0.0;
  for (std::size_t r = 0; r < spec.vocab_size; ++r) {
    total += 1.0 / static_cast<double>(r + 1);
    cdf[r] = total;
  }
  auto background = [&]() {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), spec.vocab_size - 1));
  };

  // Query and topic words come from the less frequent part of the vocabulary.
  const std::size_t content_lo = spec.vocab_size >= 20 ? spec.vocab_size / 10 : 0;
  const std::size_t content_span = spec.vocab_size - content_lo;

  std::vector<std::vector<std::size_t>> query_terms(spec.n_queries);
  std::vector<std::vector<std::size_t>> topic(spec.n_queries);
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    const std::size_t len = std::min<std::size_t>(
        std::max<std::size_t>(1, 1 + rng.poisson(spec.query_len_mean - 1.0)),
        std::min<std::size_t>(content_span, spec.vocab_size));
    auto ranks = distinct_ranks(rng, content_lo, spec.vocab_size, std::min(content_span, len + spec.topic_terms));
    query_terms[q].assign(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(len));
    topic[q].assign(ranks.begin() + static_cast<std::ptrdiff_t>(len), ranks.end());
  }

  // Which documents are relevant (and how much) for each query.
  const auto n_rel = std::min<std::size_t>(
      spec.n_docs,
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.relevance_density * static_cast<double>(spec.n_docs)))));
  std::vector<std::vector<std::pair<std::size_t, int>>> relevant(spec.n_queries);
  std::vector<bool> is_relevant_doc(spec.n_docs, false);
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    for (std::size_t d : distinct_ranks(rng, 0, spec.n_docs, n_rel)) {
      const int grade = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(spec.max_grade)));
      relevant[q].emplace_back(d, grade);
      is_relevant_doc[d] = true;
    }
    std::sort(relevant[q].begin(), relevant[q].end());
  }

  // Distractors: judged non-relevant documents that share query terms.
  std::vector<std::vector<std::size_t>> distractors(spec.n_queries);
  std::vector<bool> is_distractor_doc(spec.n_docs, false);
  if (spec.distractor_rate > 0.0) {
    const auto n_distract = static_cast<std::size_t>(
        std::llround(spec.distractor_rate * static_cast<double>(spec.n_docs - n_rel)));
    for (std::size_t q = 0; q < spec.n_queries; ++q) {
      std::set<std::size_t> rel_docs;
      for (auto [d, grade] : relevant[q]) rel_docs.insert(d);
      std::set<std::size_t> chosen;
      while (chosen.size() < n_distract) {
        const std::size_t d = rng.index(spec.n_docs);
        if (rel_docs.count(d) || !chosen.insert(d).second) continue;
        is_distractor_doc[d] = true;
      }
      distractors[q].assign(chosen.begin(), chosen.end());
    }
  }

  // Background text.
  std::vector<std::vector<std::size_t>> body(spec.n_docs);
  for (std::size_t d = 0; d < spec.n_docs; ++d) {
    double mean = spec.doc_len_mean;
    if (is_relevant_doc[d]) {
      mean *= spec.relevant_len_scale;
    } else if (is_distractor_doc[d]) {
      mean *= spec.distractor_len_scale;
    }
    const std::size_t len = draw_length(rng, mean);
    body[d].reserve(len);
    for (std::size_t i = 0; i < len; ++i) body[d].push_back(background());
  }
  auto inject = [&](std::size_t d, std::size_t rank) {
    auto& b = body[d];
    const std::size_t pos = rng.index(b.size() + 1);
    b.insert(b.begin() + static_cast<std::ptrdiff_t>(pos), rank);
  };

  std::vector<QrelEntry> qrels;
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    const std::string qid = padded('q', q + 1, 4);
    for (auto [d, grade] : relevant[q]) {
      const auto reps = std::max<long long>(1, std::llround(grade * spec.relevant_tf));
      for (long long r = 0; r < reps; ++r) {
        for (std::size_t t : query_terms[q]) inject(d, t);
      }
      for (std::size_t t : topic[q]) inject(d, t);
    }
    std::vector<std::pair<std::string, int>> judged;
    const auto& terms = query_terms[q];
    for (std::size_t d : distractors[q]) {
      std::vector<std::size_t> picked;
      if (spec.distractor_terms == 0 || spec.distractor_terms >= terms.size()) {
        picked = terms;
      } else {
        for (std::size_t i : distinct_ranks(rng, 0, terms.size(), spec.distractor_terms)) picked.push_back(terms[i]);
      }
      for (std::size_t t : picked) {
        for (std::size_t r = 0; r < spec.distractor_tf; ++r) inject(d, t);
      }
      judged.emplace_back(padded('d', d + 1, 6), 0);
    }
    for (auto [d, grade] : relevant[q]) judged.emplace_back(padded('d', d + 1, 6), grade);
    std::sort(judged.begin(), judged.end());
    for (auto& [doc, grade] : judged) qrels.push_back({qid, doc, grade});
  }

  std::vector<Document> docs;
  docs.reserve(spec.n_docs);
  for (std::size_t d = 0; d < spec.n_docs; ++d) {
    Document doc{padded('d', d + 1, 6), {}};
    doc.tokens.reserve(body[d].size());
    for (std::size_t r : body[d]) doc.tokens.push_back(term(r));
    docs.push_back(std::move(doc));
  }
  std::vector<Query> queries;
  std::vector<std::string> ids;
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    Query query{padded('q', q + 1, 4), {}};
    for (std::size_t r : query_terms[q]) query.tokens.push_back(term(r));
    ids.push_back(query.query_id);
    queries.push_back(std::move(query));
  }
  auto split = SplitSpec::parse(spec.split, seed);
  auto lists = split_by_proportion(std::move(ids), std::get<SplitProportion>(split.value), seed);
  return Dataset(std::move(name), std::move(docs), std::move(queries), std::move(qrels), std::move(lists.train),
                 std::move(lists.test));
}

// ---------------------------------------------------------------------------
// Sub-dataset sampling

Dataset sample_subdataset(const Dataset& dataset, std::size_t n_queries, const BM25Index& index,
                          const BM25Params& params, int k, std::uint64_t seed) {
  if (k <= 0) throw ConfigError("sub-dataset depth k must be positive");
  if (n_queries == 0 || n_queries > dataset.queries().size()) {
    throw ConfigError("cannot sample " + std::to_string(n_queries) + " queries from " +
                      std::to_string(dataset.queries().size()));
  }
  Rng rng(mix_seed(seed, 0x5AB5));
  std::vector<std::size_t> order(dataset.queries().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  order.resize(n_queries);
  std::sort(order.begin(), order.end());

  std::vector<Query> queries;
  std::set<std::string> keep_docs;
  std::set<std::pair<std::string, std::string>> retrieved;
  for (std::size_t qi : order) {
    const Query& q = dataset.queries()[qi];
    queries.push_back(q);
    for (const auto& hit : search_topk(index, params, q, static_cast<std::size_t>(k))) {
      keep_docs.insert(hit.doc_id);
      retrieved.emplace(q.query_id, hit.doc_id);
    }
  }
  std::vector<Document> docs;
  for (const auto& d : dataset.documents()) {
    if (keep_docs.count(d.doc_id)) docs.push_back(d);
  }
  std::vector<QrelEntry> qrels;
  for (const auto& e : dataset.qrels()) {
    if (retrieved.count({e.query_id, e.doc_id})) qrels.push_back(e);
  }

  std::vector<std::string> ids;
  for (const auto& q : queries) ids.push_back(q.query_id);
  SplitProportion proportion{dataset.train_queries().size(), dataset.test_queries().size()};
  if (proportion.train + proportion.test == 0) proportion = {4, 1};
  auto lists = split_by_proportion(std::move(ids), proportion, mix_seed(seed, 0x5B17));
  return Dataset(dataset.name(), std::move(docs), std::move(queries), std::move(qrels), std::move(lists.train),
                 std::move(lists.test));
}

}  // namespace forgetbench
