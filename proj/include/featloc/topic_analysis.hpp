#pragma once

// Post-model analytics: topic categories, class-topic weights, fuzzy
// equivalence clustering of classes, heat-map grids and F-measure.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "featloc/dense_matrix.hpp"
#include "featloc/error.hpp"
#include "featloc/lexicon.hpp"
#include "featloc/text.hpp"
#include "featloc/topic_engine.hpp"

namespace featloc {

inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(ErrorKind::parameter, fmt::format("cosine: length mismatch {} vs {}", u.size(), v.size()));
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw Error(ErrorKind::parameter, "cosine: zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), 0.0, 1.0);
}

/// Symmetric pairwise cosine over rows, unit diagonal.
inline DenseMatrix<double> row_similarity(const DenseMatrix<double>& m) {
  DenseMatrix<double> out(m.rows(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m.rows(); ++j) out(i, j) = out(j, i) = cosine(m.row(i), m.row(j));
  }
  return out;
}

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }

  // The smaller root wins so components are labelled by their first member.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

  /// Components ordered by smallest member, members ascending.
  std::vector<std::vector<std::size_t>> groups() {
    std::map<std::size_t, std::vector<std::size_t>> by_root;
    for (std::size_t i = 0; i < parent_.size(); ++i) by_root[find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> out;
    for (auto& [root, members] : by_root) out.push_back(std::move(members));
    return out;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

struct Category {
  std::size_t id = 0;
  std::vector<std::size_t> topics;
  std::vector<std::pair<std::size_t, std::size_t>> linked_pairs;  // pairs above threshold
};

struct TopicGrouping {
  double threshold = 0.0;
  std::vector<Category> categories;
  std::vector<std::size_t> rest;                   // topics linked to nothing
  std::vector<std::vector<std::size_t>> membership;  // per topic: category ids
};

/// Topics whose phi rows have cosine strictly above `threshold` share a
/// category; categories are the single-link components of that graph.
inline TopicGrouping group_topics(const DenseMatrix<double>& phi, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(ErrorKind::parameter, fmt::format("group_topics: threshold {} outside (0, 1]", threshold));
  const auto sim = row_similarity(phi);
  const std::size_t k = phi.rows();
  detail::DisjointSets sets(k);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (sim(i, j) > threshold) {
        edges.emplace_back(i, j);
        sets.unite(i, j);
      }

  TopicGrouping out;
  out.threshold = threshold;
  out.membership.resize(k);
  for (auto& members : sets.groups()) {
    if (members.size() == 1) {
      out.rest.push_back(members.front());
      continue;
    }
    Category c;
    c.id = out.categories.size();
    c.topics = members;
    for (const auto& e : edges)
      if (std::binary_search(members.begin(), members.end(), e.first)) c.linked_pairs.push_back(e);
    for (auto t : members) out.membership[t].push_back(c.id);
    out.categories.push_back(std::move(c));
  }
  return out;
}

/// Normalized topic affinity of an entity described by term counts:
/// w_k ∝ sum_v phi_kv * count_v, scaled to sum to 1.
inline std::vector<double> topic_affinity(const DenseMatrix<double>& phi, const SparseRow& counts) {
  std::vector<double> w(phi.rows(), 0.0);
  for (std::size_t k = 0; k < phi.rows(); ++k)
    for (const auto& tc : counts) w[k] += phi(k, tc.term) * tc.count;
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (total > 0.0)
    for (auto& x : w) x /= total;
  return w;
}

struct ClassTopicMatrix {
  std::vector<std::string> classes;
  DenseMatrix<double> weights;  // classes x topics
  std::string formula;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kClassTopicFormula =
    "weight(c,k) = sum_v phi[k][v]*count[c][v] / sum_k' sum_v phi[k'][v]*count[c][v]; "
    "count[c][v] = term v's count summed over c's kept methods";

/// Sums each class's kept-method term vectors and scores them against phi.
/// Classes without kept methods are excluded with a warning.
inline ClassTopicMatrix class_topic_matrix(const TopicModel& model, const FactsStore& store,
                                           const TraceIdentifierMatrix& mx) {
  if (model.dictionary_fingerprint != mx.dictionary.fingerprint())
    throw Error(ErrorKind::stale_artifact, "class_topic_matrix: model and matrix use different dictionaries");
  std::map<std::string, std::map<std::uint32_t, std::uint32_t>> per_class;
  for (std::size_t m = 0; m < mx.methods.size(); ++m) {
    auto& acc = per_class[mx.methods[m].class_name()];
    for (const auto& tc : mx.method_terms[m]) acc[tc.term] += tc.count;
  }

  ClassTopicMatrix out;
  out.formula = std::string(kClassTopicFormula);
  std::vector<std::vector<double>> rows;
  for (const auto& [name, fact] : store.classes()) {
    auto it = per_class.find(name);
    if (it == per_class.end() || it->second.empty()) {
      out.warnings.push_back(fmt::format("class '{}' has no terms; excluded", name));
      continue;
    }
    SparseRow counts;
    for (const auto& [t, c] : it->second) counts.push_back({t, c});
    out.classes.push_back(name);
    rows.push_back(topic_affinity(model.phi, counts));
  }
  out.weights = DenseMatrix<double>(rows.size(), model.topics);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < model.topics; ++k) out.weights(r, k) = rows[r][k];
  return out;
}

/// (a ∘ b)_ij = max_k min(a_ik, b_kj)
inline DenseMatrix<double> maxmin_compose(const DenseMatrix<double>& a, const DenseMatrix<double>& b) {
  DenseMatrix<double> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double best = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) best = std::max(best, std::min(a(i, k), b(k, j)));
      out(i, j) = best;
    }
  return out;
}

struct Closure {
  DenseMatrix<double> matrix;
  std::size_t squarings = 0;  // squarings that changed the matrix
};

/// Max-min transitive closure of a reflexive symmetric relation, by
/// repeated squaring until a fixed point.
inline Closure maxmin_closure(const DenseMatrix<double>& relation) {
  if (relation.rows() != relation.cols()) throw Error(ErrorKind::parameter, "closure: matrix not square");
  Closure out{relation, 0};
  while (true) {
    auto next = maxmin_compose(out.matrix, out.matrix);
    if (next == out.matrix) return out;
    out.matrix = std::move(next);
    ++out.squarings;
  }
}

struct ClusterPartition {
  double lambda = 0.0;
  std::vector<std::vector<std::string>> clusters;
  std::vector<std::vector<std::size_t>> indices;  // row indices, same shape as clusters
};

/// Connected components of {(i, j) | closure_ij >= lambda}.
inline ClusterPartition lambda_cut(const DenseMatrix<double>& closure, std::span<const std::string> names,
                                   double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorKind::parameter, fmt::format("lambda {} outside [0, 1]", lambda));
  if (closure.rows() != names.size()) throw Error(ErrorKind::parameter, "lambda_cut: name count mismatch");
  detail::DisjointSets sets(names.size());
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (closure(i, j) >= lambda) sets.unite(i, j);
  ClusterPartition out;
  out.lambda = lambda;
  out.indices = sets.groups();
  for (const auto& g : out.indices) {
    auto& c = out.clusters.emplace_back();
    for (auto i : g) c.push_back(names[i]);
  }
  return out;
}

inline ClusterPartition lambda_cut_clusters(const ClassTopicMatrix& ctm, double lambda) {
  if (ctm.classes.empty()) throw Error(ErrorKind::parameter, "lambda_cut_clusters: no classes");
  return lambda_cut(maxmin_closure(row_similarity(ctm.weights)).matrix, ctm.classes, lambda);
}

/// Harmonic mean 2pr/(p+r); zero when either input is zero.
inline double f_measure(double precision, double recall, std::vector<std::string>* warnings = nullptr) {
  if (!(precision >= 0.0 && precision <= 1.0 && recall >= 0.0 && recall <= 1.0))
    throw Error(ErrorKind::parameter, "f_measure: inputs must lie in [0, 1]");
  if (precision == 0.0 || recall == 0.0) {
    if (precision == 0.0 && recall == 0.0 && warnings)
      warnings->push_back("f_measure: precision and recall are both 0");
    return 0.0;
  }
  return 2.0 * precision * recall / (precision + recall);
}

enum class ShadeScale { global, per_row };

struct HeatCell {
  std::string class_name;
  std::size_t topic = 0;
  double weight = 0.0;
  double shade = 0.0;  // weight / max, in [0, 1]
};

inline std::vector<HeatCell> heatmap(const ClassTopicMatrix& ctm, ShadeScale scale = ShadeScale::global) {
  if (ctm.classes.empty()) throw Error(ErrorKind::parameter, "heatmap: empty class-topic matrix");
  const auto& w = ctm.weights;
  const double global_max =
      w.data().empty() ? 0.0 : *std::max_element(w.data().begin(), w.data().end());
  std::vector<HeatCell> out;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    const double max = scale == ShadeScale::global ? global_max : *std::max_element(row.begin(), row.end());
    for (std::size_t k = 0; k < w.cols(); ++k)
      out.push_back({ctm.classes[r], k, row[k], max > 0.0 ? row[k] / max : 0.0});
  }
  return out;
}

inline std::string format_categories(const TopicGrouping& g) {
  std::string out = fmt::format("# threshold={}\ncategory\ttopics\n", text::number(g.threshold));
  for (const auto& c : g.categories) {
    std::vector<std::string> ids;
    for (auto t : c.topics) ids.push_back(std::to_string(t));
    out += fmt::format("{}\t{}\n", c.id, text::join(ids, ","));
  }
  std::vector<std::string> rest;
  for (auto t : g.rest) rest.push_back(std::to_string(t));
  out += fmt::format("rest\t{}\n", text::join(rest, ","));
  return out;
}

inline std::string format_labeled_matrix(std::span<const std::string> labels, const DenseMatrix<double>& m,
                                         std::string_view corner, std::string_view column_prefix) {
  std::string out(corner);
  for (std::size_t c = 0; c < m.cols(); ++c) out += fmt::format("\t{}{}", column_prefix, c);
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += labels[r];
    for (std::size_t c = 0; c < m.cols(); ++c) out += "\t" + text::number(m(r, c));
    out += '\n';
  }
  return out;
}

inline std::string format_class_topic(const ClassTopicMatrix& ctm) {
  return fmt::format("# {}\n", ctm.formula) + format_labeled_matrix(ctm.classes, ctm.weights, "class", "topic");
}

/// Inverse of format_class_topic.
inline ClassTopicMatrix parse_class_topic(std::string_view content) {
  auto ls = text::lines(content);
  ClassTopicMatrix ctm;
  std::size_t first = 0;
  if (!ls.empty() && ls[0].starts_with("# ")) ctm.formula = ls[first++].substr(2);
  if (ls.size() <= first) throw Error(ErrorKind::parse, "class_topic: missing header");
  const auto width = text::split(ls[first], '\t').size() - 1;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = first + 1; i < ls.size(); ++i) {
    const auto f = text::split(ls[i], '\t');
    if (f.size() != width + 1) throw Error(ErrorKind::parse, "class_topic: ragged row");
    ctm.classes.push_back(f[0]);
    auto& row = rows.emplace_back();
    for (std::size_t c = 1; c < f.size(); ++c) row.push_back(text::parse_double(f[c], "class_topic"));
  }
  ctm.weights = DenseMatrix<double>(rows.size(), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) ctm.weights(r, c) = rows[r][c];
  return ctm;
}

inline std::string format_clusters(const ClusterPartition& p) {
  std::string out = fmt::format("# lambda={}\ncluster\tmembers\n", text::number(p.lambda));
  for (std::size_t i = 0; i < p.clusters.size(); ++i)
    out += fmt::format("{}\t{}\n", i, text::join(p.clusters[i], ","));
  return out;
}

inline std::string format_heatmap(std::span<const HeatCell> cells) {
  std::string out = "class\ttopic\tweight\tshade\n";
  for (const auto& c : cells)
    out += fmt::format("{}\t{}\t{}\t{}\n", c.class_name, c.topic, text::number(c.weight), text::number(c.shade));
  return out;
}

}  // namespace featloc
