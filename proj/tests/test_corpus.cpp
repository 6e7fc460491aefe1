#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "forgetbench/bm25.hpp"
#include "forgetbench/corpus.hpp"
#include "forgetbench/error.hpp"
#include "forgetbench/text.hpp"

using namespace forgetbench;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fb_corpus_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

Dataset tiny() {
  return Dataset("tiny", {{"d1", {"a", "b"}}, {"d2", {"b", "c"}}, {"d3", {"c", "d", "e"}}},
                 {{"q1", {"a"}}, {"q2", {"c"}}}, {{"q1", "d1", 1}, {"q2", "d3", 2}, {"q2", "d2", 0}}, {"q1"}, {"q2"});
}

std::set<std::string> vocabulary(const Dataset& d) {
  std::set<std::string> v;
  for (const auto& doc : d.documents()) v.insert(doc.tokens.begin(), doc.tokens.end());
  for (const auto& q : d.queries()) v.insert(q.tokens.begin(), q.tokens.end());
  return v;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("Hello, World!! x-ray 42b") == std::vector<std::string>{"hello", "world", "x", "ray", "42b"});
  CHECK(tokenize("  ...  ").empty());
}

TEST_CASE("dataset invariants") {
  const Dataset d = tiny();
  CHECK(d.grade("q2", "d3") == 2);
  CHECK(d.grade("q1", "d3") == 0);
  CHECK(d.relevant_count() == 2);
  CHECK_THROWS_AS(d.document("nope"), LookupError);

  SUBCASE("duplicate doc id") {
    CHECK_THROWS_AS(Dataset("x", {{"d", {"a"}}, {"d", {"b"}}}, {{"q", {"a"}}}, {}, {"q"}, {}), ValidationError);
  }
  SUBCASE("qrel to unknown document") {
    CHECK_THROWS_AS(Dataset("x", {{"d", {"a"}}}, {{"q", {"a"}}}, {{"q", "zz", 1}}, {"q"}, {}), ValidationError);
  }
  SUBCASE("query in both splits") {
    CHECK_THROWS_AS(Dataset("x", {{"d", {"a"}}}, {{"q", {"a"}}}, {}, {"q"}, {"q"}), ValidationError);
  }
  SUBCASE("empty document") {
    CHECK_THROWS_AS(Dataset("x", {{"d", {}}}, {{"q", {"a"}}}, {}, {"q"}, {}), ValidationError);
  }
}

TEST_CASE("stream settings need two distinct datasets") {
  const Dataset a = tiny();
  const Dataset b = a.renamed("other");
  const StreamSetting ok{"s", {&a, &b}}, single{"s", {&a}}, repeated{"s", {&a, &a}};
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS(single.validate(), ConfigError);
  CHECK_THROWS_AS(repeated.validate(), ConfigError);
}

TEST_CASE("split proportions") {
  std::vector<std::string> ids;
  for (int i = 0; i < 45; ++i) ids.push_back("q" + std::to_string(i));
  const auto lists = split_by_proportion(ids, std::get<SplitProportion>(SplitSpec::parse("27/18").value), 7);
  CHECK(lists.train.size() == 27);
  CHECK(lists.test.size() == 18);
  std::set<std::string> all(lists.train.begin(), lists.train.end());
  all.insert(lists.test.begin(), lists.test.end());
  CHECK(all.size() == 45);
  // Same seed, same split; another seed reshuffles.
  CHECK(split_by_proportion(ids, {27, 18}, 7).train == lists.train);
  CHECK(split_by_proportion(ids, {27, 18}, 8).train != lists.train);
  CHECK_THROWS_AS(SplitSpec::parse("27-18"), ConfigError);
  CHECK_THROWS_AS(SplitSpec::parse("0/0"), ConfigError);
}

TEST_CASE("TREC loading") {
  const fs::path dir = scratch("load");
  write(dir / "docs.tsv", "D7\tThe Quick brown fox\nD8\tlazy dogs, sleeping.\n");
  write(dir / "queries.tsv", "Q1\tquick FOX\nQ2\tdogs\n");
  write(dir / "qrels.txt", "Q1 0 D7 1\nQ2 0 D8 2\n");
  const Dataset d = load_trec_dataset("t", dir / "docs.tsv", dir / "queries.tsv", dir / "qrels.txt",
                                      SplitSpec::parse("1/1", 3));
  REQUIRE(d.qrels().size() == 2);
  CHECK(d.qrels()[0] == QrelEntry{"Q1", "D7", 1});
  CHECK(d.document("D7").tokens == std::vector<std::string>{"the", "quick", "brown", "fox"});
  CHECK(d.query("Q1").tokens == std::vector<std::string>{"quick", "fox"});
  CHECK(d.train_queries().size() == 1);
  CHECK(d.test_queries().size() == 1);

  SUBCASE("malformed document line names file and line") {
    write(dir / "bad.tsv", "D1\tok\nno tab here\n");
    try {
      load_trec_dataset("t", dir / "bad.tsv", dir / "queries.tsv", dir / "qrels.txt", SplitSpec::parse("1/1"));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.file() == (dir / "bad.tsv").string());
    }
  }
  SUBCASE("qrel referencing an unknown document") {
    write(dir / "qrels_bad.txt", "Q1 0 D99 1\n");
    CHECK_THROWS_AS(load_trec_dataset("t", dir / "docs.tsv", dir / "queries.tsv", dir / "qrels_bad.txt",
                                      SplitSpec::parse("1/1")),
                    ValidationError);
  }
  SUBCASE("empty qrels warn") {
    write(dir / "empty.txt", "");
    std::vector<std::string> warnings;
    set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
    const Dataset e =
        load_trec_dataset("t", dir / "docs.tsv", dir / "queries.tsv", dir / "empty.txt", SplitSpec::parse("1/1"));
    set_warning_sink(nullptr);
    CHECK(e.qrels().empty());
    CHECK(warnings.size() == 1);
  }
  SUBCASE("explicit split files") {
    write(dir / "train.txt", "Q2\n");
    write(dir / "test.txt", "Q1\n");
    const Dataset s = load_trec_dataset("t", dir / "docs.tsv", dir / "queries.tsv", dir / "qrels.txt",
                                        SplitSpec::from_files(dir / "train.txt", dir / "test.txt"));
    CHECK(s.train_queries() == std::vector<std::string>{"Q2"});
    CHECK(s.test_queries() == std::vector<std::string>{"Q1"});
  }
}

TEST_CASE("TREC round trip is lossless") {
  SyntheticSpec spec;
  spec.n_docs = 150;
  spec.n_queries = 12;
  spec.distractor_rate = 0.05;
  const Dataset d = generate_synthetic_domain("rt", 5, spec);
  const fs::path dir = scratch("roundtrip");
  const TrecPaths paths = write_trec_dataset(d, dir, "rt");
  const Dataset back = load_written_dataset("rt", paths);
  CHECK(back == d);
  CHECK(back.content_hash() == d.content_hash());
}

TEST_CASE("synthetic generation") {
  SyntheticSpec spec;
  spec.n_docs = 300;
  spec.n_queries = 20;

  SUBCASE("pure function of seed and spec") {
    CHECK(generate_synthetic_domain("a", 1, spec) == generate_synthetic_domain("a", 1, spec));
    CHECK(generate_synthetic_domain("a", 1, spec).content_hash() !=
          generate_synthetic_domain("a", 2, spec).content_hash());
  }
  SUBCASE("every query has a relevant document containing its terms") {
    const Dataset d = generate_synthetic_domain("a", 3, spec);
    for (const auto& q : d.queries()) {
      bool found = false;
      for (const auto& [doc, g] : d.judgments(q.query_id)) {
        if (g < 1) continue;
        const auto& toks = d.document(doc).tokens;
        bool all = true;
        for (const auto& t : q.tokens) all = all && std::find(toks.begin(), toks.end(), t) != toks.end();
        found = found || all;
      }
      CHECK_MESSAGE(found, q.query_id);
    }
  }
  SUBCASE("full density") {
    SyntheticSpec s;
    s.n_docs = 3;
    s.n_queries = 2;
    s.vocab_size = 50;
    s.relevance_density = 1.0;
    s.split = "1/1";
    const Dataset d = generate_synthetic_domain("full", 4, s);
    CHECK(d.qrels().size() == 6);
    for (const auto& e : d.qrels()) CHECK(e.grade >= 1);
  }
  SUBCASE("disjoint offsets share no vocabulary") {
    SyntheticSpec a = spec, b = spec;
    b.domain_vocab_offset = 10000;
    const auto va = vocabulary(generate_synthetic_domain("a", 1, a));
    const auto vb = vocabulary(generate_synthetic_domain("b", 1, b));
    for (const auto& t : va) CHECK(vb.count(t) == 0);
  }
  SUBCASE("distractors are judged non-relevant") {
    spec.distractor_rate = 0.05;
    spec.distractor_terms = 0;
    const Dataset d = generate_synthetic_domain("a", 9, spec);
    std::size_t zero = 0;
    for (const auto& e : d.qrels()) zero += e.grade == 0;
    CHECK(zero > 0);
  }
  SUBCASE("bad specs") {
    SyntheticSpec s = spec;
    s.vocab_size = 2;
    CHECK_THROWS_AS(generate_synthetic_domain("a", 1, s), ConfigError);
    s = spec;
    s.relevance_density = 0.0;
    CHECK_THROWS_AS(generate_synthetic_domain("a", 1, s), ConfigError);
    s = spec;
    s.n_docs = 0;
    CHECK_THROWS_AS(generate_synthetic_domain("a", 1, s), ConfigError);
  }
}

TEST_CASE("sub-dataset sampling") {
  SyntheticSpec spec;
  spec.n_docs = 400;
  spec.n_queries = 30;
  const Dataset d = generate_synthetic_domain("parent", 12, spec);
  const BM25Index index(d);
  const BM25Params params{1.2, 0.75};

  SUBCASE("qrels subset and every document retrieved") {
    const Dataset s = sample_subdataset(d, 15, index, params, 100, 1);
    CHECK(s.queries().size() == 15);
    for (const auto& e : s.qrels()) CHECK(d.grade(e.query_id, e.doc_id) == e.grade);
    std::set<std::string> retrieved;
    for (const auto& q : s.queries()) {
      for (const auto& r : search_topk(index, params, d.query(q.query_id), 100)) retrieved.insert(r.doc_id);
    }
    for (const auto& doc : s.documents()) CHECK(retrieved.count(doc.doc_id) == 1);
    CHECK(s.train_queries().size() + s.test_queries().size() == 15);
    CHECK(s.train_queries().size() == 12);
  }
  SUBCASE("exhaustive sample keeps every query") {
    const Dataset s = sample_subdataset(d, d.queries().size(), index, params, 100000, 4);
    CHECK(s.queries().size() == d.queries().size());
    for (const auto& q : d.queries()) CHECK(s.has_query(q.query_id));
  }
  SUBCASE("deterministic per seed, distinct across seeds") {
    CHECK(sample_subdataset(d, 15, index, params, 100, 3) == sample_subdataset(d, 15, index, params, 100, 3));
    std::set<std::uint64_t> hashes;
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
      hashes.insert(sample_subdataset(d, 15, index, params, 20, seed).content_hash());
    }
    CHECK(hashes.size() == 300);
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(sample_subdataset(d, 15, index, params, 0, 1), ConfigError);
    CHECK_THROWS_AS(sample_subdataset(d, 31, index, params, 10, 1), ConfigError);
  }
}
