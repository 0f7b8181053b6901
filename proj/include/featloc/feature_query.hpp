#pragma once

// Inverted index over topics, classes and methods, and the free-text query
// and drill-down operations on top of it.
//
// Weights stored in the index:
//   term -> topic   phi[k][term]
//   term -> class   share of the class's term count (kept methods only)
//   term -> method  share of the method's term count
//   topic -> class  class-topic matrix column
//   topic -> method topic_affinity of the method's term vector
//   topic -> trace  theta column

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "featloc/error.hpp"
#include "featloc/lexicon.hpp"
#include "featloc/text.hpp"
#include "featloc/tokenizer.hpp"
#include "featloc/topic_analysis.hpp"
#include "featloc/topic_engine.hpp"

namespace featloc {

struct ScoredEntity {
  std::string name;
  double weight = 0.0;

  friend bool operator==(const ScoredEntity&, const ScoredEntity&) = default;
};

struct TopicPosting {
  std::size_t topic = 0;
  double weight = 0.0;

  friend bool operator==(const TopicPosting&, const TopicPosting&) = default;
};

struct TermPostings {
  std::vector<TopicPosting> topics;
  std::vector<ScoredEntity> classes;
  std::vector<ScoredEntity> methods;

  friend bool operator==(const TermPostings&, const TermPostings&) = default;
};

struct QueryIndex {
  static constexpr int kVersion = 1;

  std::string dictionary_fingerprint;
  std::size_t topics = 0;
  std::size_t top_n = 5;
  std::vector<std::string> trace_ids;
  std::vector<std::vector<WeightedTerm>> top_words;
  std::map<std::string, TermPostings> postings;
  std::vector<std::vector<ScoredEntity>> topic_classes;
  std::vector<std::vector<ScoredEntity>> topic_methods;
  std::vector<std::vector<ScoredEntity>> topic_traces;
  std::map<std::string, std::vector<std::string>> method_traces;

  friend bool operator==(const QueryIndex&, const QueryIndex&) = default;
};

namespace detail {

inline void rank(std::vector<ScoredEntity>& v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.name < b.name;
  });
}

inline void rank(std::vector<TopicPosting>& v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.topic < b.topic;
  });
}

inline std::vector<ScoredEntity> take(const std::vector<ScoredEntity>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

}  // namespace detail

/// The model, class-topic matrix and matrix must share one dictionary and
/// one trace list; any mismatch names the stale artifact.
inline QueryIndex build_index(const TopicModel& model, const ClassTopicMatrix& ctm, const FactsStore& store,
                              const TraceIdentifierMatrix& mx, std::size_t top_n) {
  if (model.topics == 0) throw Error(ErrorKind::parameter, "index: model has no topics");
  const auto fp = mx.dictionary.fingerprint();
  if (model.dictionary_fingerprint != fp)
    throw Error(ErrorKind::stale_artifact,
                fmt::format("index: topic model (theta/phi) was built from dictionary {}, matrix has {}",
                            model.dictionary_fingerprint, fp));
  if (model.num_docs() != mx.num_docs() || model.vocab_size != mx.vocab_size())
    throw Error(ErrorKind::stale_artifact, "index: topic model (theta/phi) shape does not match the matrix");
  if (ctm.weights.cols() != model.topics)
    throw Error(ErrorKind::stale_artifact, "index: class_topic has a different topic count than the model");
  for (const auto& c : ctm.classes)
    if (!store.find_class(c))
      throw Error(ErrorKind::stale_artifact, fmt::format("index: class_topic names unknown class '{}'", c));
  for (const auto& m : mx.methods)
    if (!store.find_method(m))
      throw Error(ErrorKind::stale_artifact,
                  fmt::format("index: matrix names method '{}' missing from facts", m.qualified_name()));

  QueryIndex idx;
  idx.dictionary_fingerprint = fp;
  idx.topics = model.topics;
  idx.top_n = std::min(top_n, mx.vocab_size());
  idx.trace_ids = mx.trace_ids;
  idx.top_words = top_words(model, mx.dictionary, idx.top_n);

  const auto& terms = mx.dictionary.terms();
  for (std::uint32_t v = 0; v < terms.size(); ++v) {
    auto& p = idx.postings[terms[v]];
    for (std::size_t k = 0; k < model.topics; ++k) p.topics.push_back({k, model.phi(k, v)});
  }

  std::map<std::string, std::map<std::uint32_t, double>> class_counts;
  for (std::size_t m = 0; m < mx.methods.size(); ++m) {
    const auto name = mx.methods[m].qualified_name();
    double total = 0.0;
    for (const auto& tc : mx.method_terms[m]) total += tc.count;
    for (const auto& tc : mx.method_terms[m]) {
      idx.postings[terms[tc.term]].methods.push_back({name, tc.count / total});
      class_counts[mx.methods[m].class_name()][tc.term] += tc.count;
    }
  }
  for (const auto& [cls, counts] : class_counts) {
    double total = 0.0;
    for (const auto& [t, c] : counts) total += c;
    for (const auto& [t, c] : counts) idx.postings[terms[t]].classes.push_back({cls, c / total});
  }
  for (auto& [term, p] : idx.postings) {
    detail::rank(p.topics);
    detail::rank(p.classes);
    detail::rank(p.methods);
  }

  idx.topic_classes.resize(model.topics);
  idx.topic_methods.resize(model.topics);
  idx.topic_traces.resize(model.topics);
  for (std::size_t r = 0; r < ctm.classes.size(); ++r)
    for (std::size_t k = 0; k < model.topics; ++k) idx.topic_classes[k].push_back({ctm.classes[r], ctm.weights(r, k)});
  for (std::size_t m = 0; m < mx.methods.size(); ++m) {
    const auto w = topic_affinity(model.phi, mx.method_terms[m]);
    for (std::size_t k = 0; k < model.topics; ++k)
      idx.topic_methods[k].push_back({mx.methods[m].qualified_name(), w[k]});
  }
  for (std::size_t d = 0; d < mx.num_docs(); ++d)
    for (std::size_t k = 0; k < model.topics; ++k) idx.topic_traces[k].push_back({mx.trace_ids[d], model.theta(d, k)});
  for (std::size_t k = 0; k < model.topics; ++k) {
    detail::rank(idx.topic_classes[k]);
    detail::rank(idx.topic_methods[k]);
    detail::rank(idx.topic_traces[k]);
  }

  for (const auto& m : mx.methods) idx.method_traces[m.qualified_name()];
  for (std::size_t d = 0; d < mx.num_docs(); ++d)
    for (auto m : mx.trace_methods[d]) idx.method_traces[mx.methods[m].qualified_name()].push_back(mx.trace_ids[d]);
  for (auto& [m, traces] : idx.method_traces) std::sort(traces.begin(), traces.end());
  return idx;
}

struct TopicDetail {
  std::size_t topic = 0;
  std::vector<WeightedTerm> top_words;
  std::vector<ScoredEntity> classes;
  std::vector<ScoredEntity> methods;
  std::vector<ScoredEntity> traces;
};

struct TopicHit {
  std::size_t topic = 0;
  double score = 0.0;
  TopicDetail detail;  // truncated to top_n per list
};

struct QueryResult {
  std::string query;
  std::vector<std::string> terms;          // after preprocessing
  std::vector<std::string> unknown_terms;  // not in the vocabulary
  std::vector<TopicHit> topics;            // score > 0, descending
  std::vector<ScoredEntity> classes;       // direct term matches, summed weight
  std::vector<ScoredEntity> methods;
  std::string notice;
};

/// Full listing for one topic. `limit` truncates the class and method lists;
/// traces are always complete.
inline TopicDetail drill_down(const QueryIndex& idx, std::size_t topic,
                              std::optional<std::size_t> limit = std::nullopt) {
  if (topic >= idx.topics)
    throw Error(ErrorKind::not_found, fmt::format("topic {} not found (model has {})", topic, idx.topics));
  const auto n = limit.value_or(static_cast<std::size_t>(-1));
  return {topic, idx.top_words[topic], detail::take(idx.topic_classes[topic], n),
          detail::take(idx.topic_methods[topic], n), idx.topic_traces[topic]};
}

inline QueryResult query(const QueryIndex& idx, std::string_view q, const Tokenizer& tokenizer = Tokenizer()) {
  QueryResult out;
  out.query = std::string(q);
  out.terms = tokenizer(q);
  if (out.terms.empty())
    throw Error(ErrorKind::empty_query, fmt::format("empty query after preprocessing: '{}'", q));

  std::vector<double> score(idx.topics, 0.0);
  std::map<std::string, double> classes, methods;
  for (const auto& t : out.terms) {
    auto it = idx.postings.find(t);
    if (it == idx.postings.end()) {
      if (std::find(out.unknown_terms.begin(), out.unknown_terms.end(), t) == out.unknown_terms.end())
        out.unknown_terms.push_back(t);
      continue;
    }
    for (const auto& p : it->second.topics) score[p.topic] += p.weight;
    for (const auto& c : it->second.classes) classes[c.name] += c.weight;
    for (const auto& m : it->second.methods) methods[m.name] += m.weight;
  }

  for (std::size_t k = 0; k < idx.topics; ++k)
    if (score[k] > 0.0) out.topics.push_back({k, score[k], drill_down(idx, k, idx.top_n)});
  std::stable_sort(out.topics.begin(), out.topics.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  for (auto& [n, w] : classes) out.classes.push_back({n, w});
  for (auto& [n, w] : methods) out.methods.push_back({n, w});
  detail::rank(out.classes);
  detail::rank(out.methods);
  if (out.topics.empty())
    out.notice = fmt::format("no topics match: none of [{}] is in the vocabulary", text::join(out.terms, ", "));
  return out;
}

// JSON layout of index.json:
//   {"format":"featloc-index","version":1,"dictionary":<fingerprint>,
//    "topics":K,"top_n":n,"traces":[ids],
//    "top_words":[[[term,p],...] per topic],
//    "postings":{term:{"topics":[[k,w]],"classes":[[name,w]],"methods":[[name,w]]}},
//    "topic_classes"|"topic_methods"|"topic_traces":[[[name,w],...] per topic],
//    "method_traces":{method:[trace ids]}}
// Keys are emitted sorted, doubles in shortest round-trip form.

using Json = nlohmann::json;

namespace detail {

inline Json pairs(const std::vector<ScoredEntity>& v) {
  Json a = Json::array();
  for (const auto& e : v) a.push_back(Json::array({e.name, e.weight}));
  return a;
}

inline Json pairs(const std::vector<WeightedTerm>& v) {
  Json a = Json::array();
  for (const auto& e : v) a.push_back(Json::array({e.term, e.probability}));
  return a;
}

inline std::vector<ScoredEntity> entities_from_pairs(const Json& a) {
  std::vector<ScoredEntity> v;
  for (const auto& e : a) v.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
  return v;
}

}  // namespace detail

inline std::string serialize_index(const QueryIndex& idx) {
  Json j;
  j["format"] = "featloc-index";
  j["version"] = QueryIndex::kVersion;
  j["dictionary"] = idx.dictionary_fingerprint;
  j["topics"] = idx.topics;
  j["top_n"] = idx.top_n;
  j["traces"] = idx.trace_ids;
  Json tw = Json::array();
  for (const auto& t : idx.top_words) tw.push_back(detail::pairs(t));
  j["top_words"] = tw;
  Json postings = Json::object();
  for (const auto& [term, p] : idx.postings) {
    Json topics = Json::array();
    for (const auto& tp : p.topics) topics.push_back(Json::array({tp.topic, tp.weight}));
    postings[term] = {{"topics", topics}, {"classes", detail::pairs(p.classes)}, {"methods", detail::pairs(p.methods)}};
  }
  j["postings"] = postings;
  for (auto [key, table] : {std::pair{"topic_classes", &idx.topic_classes},
                            std::pair{"topic_methods", &idx.topic_methods},
                            std::pair{"topic_traces", &idx.topic_traces}}) {
    Json a = Json::array();
    for (const auto& row : *table) a.push_back(detail::pairs(row));
    j[key] = a;
  }
  j["method_traces"] = idx.method_traces;
  return j.dump(1) + "\n";
}

inline QueryIndex parse_index(std::string_view content) {
  QueryIndex idx;
  try {
    const auto j = Json::parse(content);
    if (j.at("format") != "featloc-index")
      throw Error(ErrorKind::parse, "index: not an index file");
    if (j.at("version").get<int>() != QueryIndex::kVersion)
      throw Error(ErrorKind::stale_artifact,
                  fmt::format("index: version {} unsupported (expected {})", j.at("version").dump(), QueryIndex::kVersion));
    idx.dictionary_fingerprint = j.at("dictionary").get<std::string>();
    idx.topics = j.at("topics").get<std::size_t>();
    idx.top_n = j.at("top_n").get<std::size_t>();
    idx.trace_ids = j.at("traces").get<std::vector<std::string>>();
    for (const auto& t : j.at("top_words")) {
      auto& row = idx.top_words.emplace_back();
      for (const auto& e : t) row.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
    }
    for (const auto& [term, p] : j.at("postings").items()) {
      auto& tp = idx.postings[term];
      for (const auto& e : p.at("topics")) tp.topics.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>()});
      tp.classes = detail::entities_from_pairs(p.at("classes"));
      tp.methods = detail::entities_from_pairs(p.at("methods"));
    }
    for (auto [key, table] : {std::pair{"topic_classes", &idx.topic_classes},
                              std::pair{"topic_methods", &idx.topic_methods},
                              std::pair{"topic_traces", &idx.topic_traces}})
      for (const auto& row : j.at(key)) table->push_back(detail::entities_from_pairs(row));
    idx.method_traces = j.at("method_traces").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, fmt::format("index: {}", e.what()));
  }
  if (idx.top_words.size() != idx.topics || idx.topic_classes.size() != idx.topics ||
      idx.topic_methods.size() != idx.topics || idx.topic_traces.size() != idx.topics)
    throw Error(ErrorKind::parse, "index: per-topic tables disagree with topic count");
  return idx;
}

// Service payloads use named fields: {"name", "probability"} and {"term", "probability"}.
inline Json to_json(const std::vector<ScoredEntity>& v) {
  Json a = Json::array();
  for (const auto& e : v) a.push_back({{"name", e.name}, {"probability", e.weight}});
  return a;
}

inline Json to_json(const std::vector<WeightedTerm>& v) {
  Json a = Json::array();
  for (const auto& e : v) a.push_back({{"term", e.term}, {"probability", e.probability}});
  return a;
}

inline Json to_json(const TopicDetail& d) {
  return {{"topic", d.topic},
          {"top_words", to_json(d.top_words)},
          {"classes", to_json(d.classes)},
          {"methods", to_json(d.methods)},
          {"traces", to_json(d.traces)}};
}

inline Json to_json(const QueryResult& r) {
  Json topics = Json::array();
  for (const auto& h : r.topics) {
    auto t = to_json(h.detail);
    t["score"] = h.score;
    topics.push_back(std::move(t));
  }
  return {{"query", r.query},     {"terms", r.terms},    {"unknown_terms", r.unknown_terms},
          {"topics", topics},     {"classes", to_json(r.classes)}, {"methods", to_json(r.methods)},
          {"notice", r.notice}};
}

/// Aligned-column rendering for the CLI.
inline std::string format_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += r[c];
      if (c + 1 < r.size()) line += std::string(width[c] - r[c].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

inline std::string format_detail_text(const TopicDetail& d) {
  std::vector<std::string> words;
  for (const auto& w : d.top_words) words.push_back(w.term);
  std::string out = fmt::format("topic {}: {}\n", d.topic, text::join(words, " "));
  for (auto [label, list] : {std::pair{"class", &d.classes}, std::pair{"method", &d.methods},
                             std::pair{"trace", &d.traces}}) {
    std::vector<std::vector<std::string>> rows{{label, "probability"}};
    for (const auto& e : *list) rows.push_back({"  " + e.name, fmt::format("{:.6f}", e.weight)});
    rows[0][0] = "  " + rows[0][0];
    out += format_table(rows);
  }
  return out;
}

inline std::string format_query_text(const QueryResult& r) {
  if (r.topics.empty()) return r.notice + "\n";
  std::vector<std::vector<std::string>> rows{{"rank", "topic", "score", "top words"}};
  for (std::size_t i = 0; i < r.topics.size(); ++i) {
    std::vector<std::string> words;
    for (const auto& w : r.topics[i].detail.top_words) words.push_back(w.term);
    rows.push_back({std::to_string(i + 1), std::to_string(r.topics[i].topic),
                    fmt::format("{:.6f}", r.topics[i].score), text::join(words, " ")});
  }
  std::string out = format_table(rows);
  out += "\n" + format_detail_text(r.topics.front().detail);
  return out;
}

}  // namespace featloc
