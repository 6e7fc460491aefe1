#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace forgetbench {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
};

/// Ranked list of one query, best first.
struct Candidates {
  std::string query_id;
  std::vector<ScoredDoc> ranking;
};

/// A run over many queries: no duplicate document per query, scores descending.
struct RankedRun {
  std::string tag;
  std::vector<Candidates> queries;
};

/// Sorts descending by score, ascending doc_id on ties.
void sort_ranking(std::vector<ScoredDoc>& ranking);

/// "query_id Q0 doc_id rank score tag" lines.
void write_trec_run(std::ostream& out, const std::vector<Candidates>& run, std::string_view tag);

}  // namespace forgetbench
