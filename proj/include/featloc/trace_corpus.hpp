#pragma once

// Execution-trace ingestion, repetition compression and corpus statistics.
//
// Trace file format, one event per line:
//   M <thread> <class>.<method><signature>   method entry
//   START / STOP                             user markers
//   # ...                                    comment
//
// Manifest format, tab separated: <trace_id> <use_case_id> <path>. Relative
// paths resolve against the manifest's directory.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "featloc/error.hpp"
#include "featloc/text.hpp"

namespace featloc {

/// Method identity: class, method name and signature, all byte-compared.
class MethodKey {
 public:
  MethodKey() = default;
  MethodKey(std::string class_name, std::string method_name, std::string signature)
      : class_name_(std::move(class_name)),
        method_name_(std::move(method_name)),
        signature_(std::move(signature)) {}

  /// Parses `pkg.Class.method(sig)`. The class is everything before the last
  /// '.' preceding the signature's opening parenthesis.
  static MethodKey parse(std::string_view qualified) {
    const auto paren = qualified.find('(');
    const auto head = qualified.substr(0, paren);
    const auto sig = paren == std::string_view::npos ? std::string_view{} : qualified.substr(paren);
    const auto dot = head.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == head.size())
      throw Error(ErrorKind::parse, fmt::format("malformed method name '{}'", qualified));
    return MethodKey(std::string(head.substr(0, dot)), std::string(head.substr(dot + 1)),
                     std::string(sig));
  }

  const std::string& class_name() const noexcept { return class_name_; }
  const std::string& method_name() const noexcept { return method_name_; }
  const std::string& signature() const noexcept { return signature_; }

  std::string qualified_name() const { return class_name_ + "." + method_name_ + signature_; }

  friend bool operator==(const MethodKey&, const MethodKey&) = default;
  friend std::strong_ordering operator<=>(const MethodKey& a, const MethodKey& b) {
    // Orders by qualified text so sorted output matches lexicographic names.
    return a.qualified_name().compare(b.qualified_name()) <=> 0;
  }

 private:
  std::string class_name_;
  std::string method_name_;
  std::string signature_;
};

enum class EventKind { method_entry, marker_start, marker_stop };

struct TraceEvent {
  std::string thread_id;
  EventKind kind = EventKind::method_entry;
  MethodKey method;  // empty for markers
  std::uint64_t seq = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
  std::string trace_id;
  std::string use_case_id;
  std::vector<TraceEvent> events;
  bool marked_only = false;
  bool empty_warning = false;  // source file had no events

  /// Method entries in order, markers skipped.
  std::vector<MethodKey> methods() const {
    std::vector<MethodKey> out;
    for (const auto& e : events)
      if (e.kind == EventKind::method_entry) out.push_back(e.method);
    return out;
  }

  std::size_t method_count() const {
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const auto& e) {
      return e.kind == EventKind::method_entry;
    }));
  }

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Parses trace text. `source` names the file in error messages.
///
/// With `marked_only`, method entries outside START/STOP are dropped. A START
/// inside an open region restarts it; a STOP without an open region is a
/// structural error; a region left open at end of input is kept.
inline Trace parse_trace(std::string_view content, std::string_view source, std::string trace_id,
                         std::string use_case_id, bool marked_only) {
  Trace trace;
  trace.trace_id = std::move(trace_id);
  trace.use_case_id = std::move(use_case_id);
  trace.marked_only = marked_only;

  bool in_region = false;
  std::uint64_t seq = 0;
  std::size_t line_no = 0;
  for (const auto& raw : text::lines(content)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto where = [&] { return fmt::format("{}:{}", source, line_no); };

    if (line == "START") {
      in_region = true;
      trace.events.push_back({"", EventKind::marker_start, {}, seq++});
      continue;
    }
    if (line == "STOP") {
      if (!in_region)
        throw Error(ErrorKind::structural, fmt::format("{}: STOP without matching START", where()));
      in_region = false;
      trace.events.push_back({"", EventKind::marker_stop, {}, seq++});
      continue;
    }
    if (line.size() < 2 || line[0] != 'M' || (line[1] != ' ' && line[1] != '\t'))
      throw Error(ErrorKind::parse, fmt::format("{}: unrecognized event '{}'", where(), line));

    const auto rest = text::trim(line.substr(2));
    const auto sp = rest.find_first_of(" \t");
    if (sp == std::string_view::npos)
      throw Error(ErrorKind::parse, fmt::format("{}: expected 'M <thread> <method>'", where()));
    const auto thread = rest.substr(0, sp);
    const auto qualified = text::trim(rest.substr(sp));
    MethodKey key;
    try {
      key = MethodKey::parse(qualified);
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, fmt::format("{}: {}", where(), e.what()));
    }
    if (marked_only && !in_region) continue;
    trace.events.push_back({std::string(thread), EventKind::method_entry, std::move(key), seq++});
  }
  trace.empty_warning = trace.events.empty();
  return trace;
}

/// Inverse of parse_trace for the retained events.
inline std::string serialize_trace(const Trace& trace) {
  std::string out = fmt::format("# trace {} use_case {}\n", trace.trace_id, trace.use_case_id);
  for (const auto& e : trace.events) {
    switch (e.kind) {
      case EventKind::marker_start: out += "START\n"; break;
      case EventKind::marker_stop: out += "STOP\n"; break;
      case EventKind::method_entry:
        out += fmt::format("M {} {}\n", e.thread_id, e.method.qualified_name());
        break;
    }
  }
  return out;
}

struct TraceSource {
  std::string trace_id;
  std::string use_case_id;
  std::filesystem::path path;
};

inline std::vector<TraceSource> read_trace_manifest(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  std::vector<TraceSource> out;
  std::size_t line_no = 0;
  for (const auto& raw : text::lines(text::read_file(manifest))) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = text::split(line, '\t');
    if (fields.size() != 3)
      throw Error(ErrorKind::parse, fmt::format("{}:{}: expected 3 tab-separated fields",
                                                manifest.string(), line_no));
    std::filesystem::path p = fields[2];
    if (p.is_relative()) p = base / p;
    out.push_back({fields[0], fields[1], p});
  }
  return out;
}

inline std::string write_trace_manifest(std::span<const TraceSource> sources) {
  std::string out = "# trace_id\tuse_case_id\tpath\n";
  for (const auto& s : sources)
    out += fmt::format("{}\t{}\t{}\n", s.trace_id, s.use_case_id, s.path.generic_string());
  return out;
}

/// Reads one Trace per source. Files are parsed concurrently; output keeps
/// the input order. Duplicate trace ids are a structural error.
inline std::vector<Trace> ingest_traces(std::span<const TraceSource> sources, bool marked_only) {
  std::set<std::string> seen;
  for (const auto& s : sources)
    if (!seen.insert(s.trace_id).second)
      throw Error(ErrorKind::structural, fmt::format("duplicate trace id '{}'", s.trace_id));

  std::vector<std::future<Trace>> jobs;
  jobs.reserve(sources.size());
  for (const auto& s : sources) {
    jobs.push_back(std::async(std::launch::async, [&s, marked_only] {
      return parse_trace(text::read_file(s.path), s.path.string(), s.trace_id, s.use_case_id,
                         marked_only);
    }));
  }
  std::vector<Trace> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

/// Trace ids default to file stems; use cases are left blank.
inline std::vector<Trace> ingest_traces(std::span<const std::filesystem::path> paths,
                                        bool marked_only) {
  std::vector<TraceSource> sources;
  for (const auto& p : paths) sources.push_back({p.stem().string(), "", p});
  return ingest_traces(std::span<const TraceSource>(sources), marked_only);
}

/// Keeps the first occurrence of each method; markers are untouched.
inline Trace compress_trace(const Trace& trace) {
  Trace out = trace;
  out.events.clear();
  std::set<MethodKey> seen;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::method_entry && !seen.insert(e.method).second) continue;
    out.events.push_back(e);
  }
  return out;
}

/// Raw invocation counts per trace plus document frequencies.
struct TraceMethodCounts {
  std::vector<std::string> trace_ids;
  std::vector<std::map<MethodKey, std::uint64_t>> counts;
  std::map<MethodKey, std::size_t> doc_freq;

  std::size_t num_traces() const noexcept { return trace_ids.size(); }

  std::uint64_t total(std::size_t trace) const {
    std::uint64_t sum = 0;
    for (const auto& [k, c] : counts[trace]) sum += c;
    return sum;
  }
};

inline TraceMethodCounts count_methods(std::span<const Trace> corpus) {
  TraceMethodCounts out;
  for (const auto& t : corpus) {
    out.trace_ids.push_back(t.trace_id);
    auto& row = out.counts.emplace_back();
    for (const auto& e : t.events)
      if (e.kind == EventKind::method_entry) ++row[e.method];
    for (const auto& [k, c] : row) ++out.doc_freq[k];
  }
  return out;
}

struct UseCaseStats {
  std::string use_case_id;
  std::size_t scenarios = 0;
  std::size_t methods = 0;           // method_entry events
  std::size_t distinct_methods = 0;
  std::size_t methods_after_filtering = 0;  // only meaningful when a kept set was given

  friend bool operator==(const UseCaseStats&, const UseCaseStats&) = default;
};

/// Per use case totals, sorted by use case id. When `kept` is given the
/// after-filtering column counts the method entries whose key survives.
inline std::vector<UseCaseStats> corpus_stats(std::span<const Trace> corpus,
                                              const std::set<MethodKey>* kept = nullptr) {
  if (corpus.empty()) throw Error(ErrorKind::parameter, "corpus_stats: empty corpus");
  std::map<std::string, UseCaseStats> by_case;
  std::map<std::string, std::set<MethodKey>> distinct;
  for (const auto& t : corpus) {
    auto& s = by_case[t.use_case_id];
    s.use_case_id = t.use_case_id;
    ++s.scenarios;
    for (const auto& e : t.events) {
      if (e.kind != EventKind::method_entry) continue;
      ++s.methods;
      distinct[t.use_case_id].insert(e.method);
      if (kept && kept->contains(e.method)) ++s.methods_after_filtering;
    }
  }
  std::vector<UseCaseStats> out;
  for (auto& [id, s] : by_case) {
    s.distinct_methods = distinct[id].size();
    if (!kept) s.methods_after_filtering = s.methods;
    out.push_back(s);
  }
  return out;
}

inline std::string format_corpus_stats(std::span<const UseCaseStats> stats) {
  std::string out = "use_case\tscenarios\tmethods\tdistinct_methods\tmethods_after_filtering\n";
  for (const auto& s : stats)
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", s.use_case_id, s.scenarios, s.methods,
                       s.distinct_methods, s.methods_after_filtering);
  return out;
}

}  // namespace featloc
