#include "forgetbench/ranking.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace forgetbench {

void sort_ranking(std::vector<ScoredDoc>& ranking) {
  std::sort(ranking.begin(), ranking.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });
}

void write_trec_run(std::ostream& out, const std::vector<Candidates>& run, std::string_view tag) {
  char buf[64];
  for (const auto& c : run) {
    for (std::size_t r = 0; r < c.ranking.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", c.ranking[r].score);
      out << c.query_id << " Q0 " << c.ranking[r].doc_id << ' ' << (r + 1) << ' ' << buf << ' ' << tag << '\n';
    }
  }
}

}  // namespace forgetbench
