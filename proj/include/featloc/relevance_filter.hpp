#pragma once

// TF-IDF style method scoring for filtering omnipresent (utility) methods.
//
//   tf(i, j)   = raw count of method j in trace i / raw invocations in trace i
//   idf(j)     = log10(D / D_j)
//   score(j)   = sum_i tf(i, j) * idf(j)
//
// A method invoked by every trace has idf 0 and therefore score 0.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "featloc/error.hpp"
#include "featloc/text.hpp"
#include "featloc/trace_corpus.hpp"

namespace featloc {

struct MethodScore {
  MethodKey method;
  std::vector<double> tf;  // one entry per trace, zero where absent
  double idf = 0.0;
  double score = 0.0;

  double cell(std::size_t trace) const { return tf[trace] * idf; }
};

struct MethodScoreTable {
  std::vector<std::string> trace_ids;
  std::vector<MethodScore> rows;  // ordered by MethodKey

  const MethodScore* find(const MethodKey& key) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), key,
                               [](const MethodScore& r, const MethodKey& k) { return r.method < k; });
    return it != rows.end() && it->method == key ? &*it : nullptr;
  }
};

inline MethodScoreTable score_methods(const TraceMethodCounts& counts) {
  const std::size_t num_traces = counts.num_traces();
  if (num_traces == 0) throw Error(ErrorKind::parameter, "score_methods: no traces");

  std::vector<double> totals(num_traces);
  for (std::size_t i = 0; i < num_traces; ++i) {
    totals[i] = static_cast<double>(counts.total(i));
    if (totals[i] == 0.0)
      throw Error(ErrorKind::parameter,
                  fmt::format("score_methods: trace '{}' has no method invocations",
                              counts.trace_ids[i]));
  }

  MethodScoreTable table;
  table.trace_ids = counts.trace_ids;
  table.rows.reserve(counts.doc_freq.size());
  for (const auto& [method, df] : counts.doc_freq) {
    MethodScore row;
    row.method = method;
    row.idf = std::log10(static_cast<double>(num_traces) / static_cast<double>(df));
    row.tf.assign(num_traces, 0.0);
    for (std::size_t i = 0; i < num_traces; ++i) {
      auto it = counts.counts[i].find(method);
      if (it == counts.counts[i].end()) continue;
      row.tf[i] = static_cast<double>(it->second) / totals[i];
      row.score += row.tf[i] * row.idf;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct FilterResult {
  double threshold = 0.0;
  std::vector<MethodKey> kept;       // ordered by MethodKey
  std::vector<MethodScore> removed;  // ordered by MethodKey

  std::set<MethodKey> kept_set() const { return {kept.begin(), kept.end()}; }
};

/// Keeps methods whose score is at least `threshold`.
inline FilterResult filter_methods(const MethodScoreTable& table, double threshold) {
  if (!(threshold >= 0.0))
    throw Error(ErrorKind::parameter, fmt::format("score threshold must be >= 0, got {}", threshold));
  FilterResult out;
  out.threshold = threshold;
  double best = 0.0;
  for (const auto& row : table.rows) {
    best = std::max(best, row.score);
    if (row.score >= threshold)
      out.kept.push_back(row.method);
    else
      out.removed.push_back(row);
  }
  if (out.kept.empty())
    throw Error(ErrorKind::empty_result,
                fmt::format("threshold {} removes all {} methods (max score {}); nothing left to "
                            "analyze",
                            threshold, table.rows.size(), best));
  return out;
}

/// Tab-separated report, ordered by descending score then method name.
inline std::string format_score_report(const MethodScoreTable& table, const FilterResult& filter) {
  std::vector<const MethodScore*> order;
  for (const auto& r : table.rows) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const MethodScore* a, const MethodScore* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->method < b->method;
  });
  const auto kept = filter.kept_set();

  std::string out = "method";
  for (const auto& id : table.trace_ids) out += "\t" + id;
  out += "\tscore\tkept\n";
  for (const auto* r : order) {
    out += r->method.qualified_name();
    for (std::size_t i = 0; i < table.trace_ids.size(); ++i) out += "\t" + text::number(r->cell(i));
    out += fmt::format("\t{}\t{}\n", text::number(r->score), kept.contains(r->method) ? 1 : 0);
  }
  return out;
}

}  // namespace featloc
