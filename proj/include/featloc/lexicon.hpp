#pragma once

// Source facts, method term vectors and the trace-by-identifier matrix.
//
// Facts file: UTF-8, one tab-separated record per line, '#' comments.
//   C <class> <inherits_from> <implements,...> <variables,...>
//   M <class>.<method><signature> <arguments,...> <return_type> <return_value> <comment>
// Trailing empty fields may be omitted.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "featloc/error.hpp"
#include "featloc/text.hpp"
#include "featloc/tokenizer.hpp"
#include "featloc/trace_corpus.hpp"

namespace featloc {

struct ClassFact {
  std::string class_name;
  std::optional<std::string> inherits_from;
  std::vector<std::string> implements_to;
  std::vector<std::string> variables;

  friend bool operator==(const ClassFact&, const ClassFact&) = default;
};

struct MethodFact {
  MethodKey method_key;
  std::vector<std::string> arguments;
  std::string return_type;
  std::optional<std::string> return_value;
  std::vector<std::string> comment_terms;

  const std::string& class_name() const noexcept { return method_key.class_name(); }

  friend bool operator==(const MethodFact&, const MethodFact&) = default;
};

class FactsStore {
 public:
  void add_class(ClassFact fact) {
    const auto name = fact.class_name;
    if (!classes_.emplace(name, std::move(fact)).second)
      throw Error(ErrorKind::structural, fmt::format("duplicate class '{}'", name));
  }

  void add_method(MethodFact fact) {
    const auto key = fact.method_key;
    if (!methods_.emplace(key, std::move(fact)).second)
      throw Error(ErrorKind::structural,
                  fmt::format("duplicate method '{}'", key.qualified_name()));
  }

  /// Every method's owning class must be present.
  void validate() const {
    std::vector<std::string> orphans;
    for (const auto& [key, m] : methods_)
      if (!classes_.contains(m.class_name())) orphans.push_back(key.qualified_name());
    if (!orphans.empty())
      throw Error(ErrorKind::structural,
                  fmt::format("methods reference unknown classes: {}", text::join(orphans, ", ")));
  }

  const MethodFact* find_method(const MethodKey& key) const {
    auto it = methods_.find(key);
    return it == methods_.end() ? nullptr : &it->second;
  }

  const ClassFact* find_class(std::string_view name) const {
    auto it = classes_.find(name);
    return it == classes_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, ClassFact, std::less<>>& classes() const noexcept { return classes_; }
  const std::map<MethodKey, MethodFact>& methods() const noexcept { return methods_; }
  bool empty() const noexcept { return classes_.empty() && methods_.empty(); }

 private:
  std::map<std::string, ClassFact, std::less<>> classes_;
  std::map<MethodKey, MethodFact> methods_;
};

namespace detail {

inline std::vector<std::string> list_field(std::string_view field) {
  std::vector<std::string> out;
  for (auto& item : text::split(field, ','))
    if (auto t = text::trim(item); !t.empty()) out.emplace_back(t);
  return out;
}

inline std::optional<std::string> optional_field(std::string_view field) {
  auto t = text::trim(field);
  if (t.empty()) return std::nullopt;
  return std::string(t);
}

}  // namespace detail

inline FactsStore parse_facts(std::string_view content, std::string_view source) {
  FactsStore store;
  std::size_t line_no = 0;
  for (const auto& raw : text::lines(content)) {
    ++line_no;
    if (text::trim(raw).empty() || text::trim(raw).front() == '#') continue;
    auto f = text::split(raw, '\t');
    const auto where = fmt::format("{}:{}", source, line_no);
    const std::string tag(text::trim(f[0]));
    const std::size_t width = tag == "C" ? 5 : tag == "M" ? 6 : 0;
    if (width == 0) throw Error(ErrorKind::parse, fmt::format("{}: unknown record kind '{}'", where, tag));
    if (f.size() < 2 || f.size() > width)
      throw Error(ErrorKind::parse,
                  fmt::format("{}: {} record needs 2..{} fields, got {}", where, tag, width, f.size()));
    f.resize(width);

    try {
      if (tag == "C") {
        ClassFact c;
        c.class_name = std::string(text::trim(f[1]));
        if (c.class_name.empty()) throw Error(ErrorKind::parse, "empty class name");
        c.inherits_from = detail::optional_field(f[2]);
        c.implements_to = detail::list_field(f[3]);
        c.variables = detail::list_field(f[4]);
        store.add_class(std::move(c));
      } else {
        MethodFact m;
        m.method_key = MethodKey::parse(text::trim(f[1]));
        m.arguments = detail::list_field(f[2]);
        m.return_type = std::string(text::trim(f[3]));
        m.return_value = detail::optional_field(f[4]);
        m.comment_terms = text::split_ws(f[5]);
        store.add_method(std::move(m));
      }
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("{}: {}", where, e.what()));
    }
  }
  store.validate();
  return store;
}

inline FactsStore ingest_facts(const std::filesystem::path& path) {
  return parse_facts(text::read_file(path), path.string());
}

/// Snapshot in the facts file format, classes then methods, each sorted.
inline std::string serialize_facts(const FactsStore& store) {
  std::string out = "# kind\tname\t...\n";
  for (const auto& [name, c] : store.classes())
    out += fmt::format("C\t{}\t{}\t{}\t{}\n", name, c.inherits_from.value_or(""),
                       text::join(c.implements_to, ","), text::join(c.variables, ","));
  for (const auto& [key, m] : store.methods())
    out += fmt::format("M\t{}\t{}\t{}\t{}\t{}\n", key.qualified_name(), text::join(m.arguments, ","),
                       m.return_type, m.return_value.value_or(""), text::join(m.comment_terms, " "));
  return out;
}

struct TermOptions {
  // Also take terms from the owning class's parent, interfaces and fields.
  bool include_class_details = false;
};

using TermCounts = std::map<std::string, std::uint32_t>;

inline TermCounts method_term_vector(const MethodFact& m, const ClassFact& c,
                                     const Tokenizer& tokenizer = {}, TermOptions opts = {}) {
  TermCounts out;
  auto add = [&](std::string_view raw) {
    for (auto& t : tokenizer(raw)) ++out[t];
  };
  add(m.method_key.method_name());
  for (const auto& a : m.arguments) add(a);
  add(m.return_type);
  if (m.return_value) add(*m.return_value);
  for (const auto& w : m.comment_terms) add(w);
  add(c.class_name);
  if (opts.include_class_details) {
    if (c.inherits_from) add(*c.inherits_from);
    for (const auto& i : c.implements_to) add(i);
    for (const auto& v : c.variables) add(v);
  }
  return out;
}

/// Term <-> dense id. Ids follow lexicographic term order.
class TermDictionary {
 public:
  TermDictionary() = default;

  explicit TermDictionary(const std::set<std::string>& terms) {
    terms_.assign(terms.begin(), terms.end());
    for (std::uint32_t i = 0; i < terms_.size(); ++i) ids_.emplace(terms_[i], i);
  }

  std::size_t size() const noexcept { return terms_.size(); }
  const std::string& term(std::uint32_t id) const { return terms_.at(id); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }

  std::optional<std::uint32_t> id(const std::string& term) const {
    auto it = ids_.find(term);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  /// Content hash linking downstream artifacts to this vocabulary.
  std::string fingerprint() const {
    std::uint64_t h = text::fnv1a("");
    for (const auto& t : terms_) h = text::fnv1a(t + "\n", h);
    return text::hex64(h);
  }

  std::string serialize() const {
    std::string out;
    for (std::uint32_t i = 0; i < terms_.size(); ++i) out += fmt::format("{}\t{}\n", i, terms_[i]);
    return out;
  }

  static TermDictionary parse(std::string_view content) {
    std::set<std::string> terms;
    std::uint32_t expect = 0;
    for (const auto& line : text::lines(content)) {
      auto f = text::split(line, '\t');
      if (f.size() != 2 || text::parse_int(f[0], "dictionary id") != expect++)
        throw Error(ErrorKind::parse, fmt::format("dictionary: bad line '{}'", line));
      terms.insert(f[1]);
    }
    TermDictionary d(terms);
    if (d.size() != expect) throw Error(ErrorKind::parse, "dictionary: ids not in term order");
    return d;
  }

  friend bool operator==(const TermDictionary& a, const TermDictionary& b) {
    return a.terms_ == b.terms_;
  }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct TermCount {
  std::uint32_t term = 0;
  std::uint32_t count = 0;

  friend bool operator==(const TermCount&, const TermCount&) = default;
};

/// Sorted by term id, counts > 0.
using SparseRow = std::vector<TermCount>;

/// Documents are traces, words are identifier terms. Stored with the two
/// factors whose product it is: binary trace-method and method-term counts.
struct TraceIdentifierMatrix {
  std::vector<std::string> trace_ids;
  std::vector<MethodKey> methods;
  std::vector<std::vector<std::uint32_t>> trace_methods;  // per trace: sorted method indices
  std::vector<SparseRow> method_terms;                    // per method
  std::vector<SparseRow> rows;                            // per trace
  TermDictionary dictionary;

  std::size_t num_docs() const noexcept { return trace_ids.size(); }
  std::size_t vocab_size() const noexcept { return dictionary.size(); }

  std::uint64_t total_tokens() const {
    std::uint64_t n = 0;
    for (const auto& r : rows)
      for (const auto& tc : r) n += tc.count;
    return n;
  }

  /// Dense D x M 0/1 view of the trace-method factor.
  std::vector<std::vector<std::uint32_t>> dense_trace_method() const {
    std::vector<std::vector<std::uint32_t>> out(num_docs(), std::vector<std::uint32_t>(methods.size()));
    for (std::size_t d = 0; d < num_docs(); ++d)
      for (auto m : trace_methods[d]) out[d][m] = 1;
    return out;
  }

  static std::vector<std::vector<std::uint32_t>> densify(std::span<const SparseRow> sparse,
                                                         std::size_t width) {
    std::vector<std::vector<std::uint32_t>> out(sparse.size(), std::vector<std::uint32_t>(width));
    for (std::size_t r = 0; r < sparse.size(); ++r)
      for (const auto& tc : sparse[r]) out[r][tc.term] = tc.count;
    return out;
  }
};

/// rows = trace_methods x method_terms, computed sparsely.
inline std::vector<SparseRow> multiply_factors(std::span<const std::vector<std::uint32_t>> trace_methods,
                                               std::span<const SparseRow> method_terms) {
  std::vector<SparseRow> rows;
  rows.reserve(trace_methods.size());
  for (const auto& methods : trace_methods) {
    std::map<std::uint32_t, std::uint32_t> acc;
    for (auto m : methods)
      for (const auto& tc : method_terms[m]) acc[tc.term] += tc.count;
    SparseRow row;
    for (const auto& [t, c] : acc) row.push_back({t, c});
    rows.push_back(std::move(row));
  }
  return rows;
}

struct MatrixBuild {
  TraceIdentifierMatrix matrix;
  std::vector<std::string> warnings;
};

/// Builds the LDA corpus from compressed traces restricted to kept methods.
/// Kept methods absent from the facts store are skipped with a warning.
inline MatrixBuild build_matrix(std::span<const Trace> corpus, const std::set<MethodKey>& kept,
                                const FactsStore& store, const Tokenizer& tokenizer = {},
                                TermOptions opts = {}) {
  if (kept.empty()) throw Error(ErrorKind::parameter, "build_matrix: no kept methods");
  if (store.empty()) throw Error(ErrorKind::empty_result, "build_matrix: facts store is empty");
  MatrixBuild out;

  std::set<MethodKey> present;
  for (const auto& t : corpus)
    for (const auto& e : t.events)
      if (e.kind == EventKind::method_entry && kept.contains(e.method)) present.insert(e.method);

  std::vector<MethodKey> methods;
  std::vector<TermCounts> vectors;
  for (const auto& key : present) {
    const auto* fact = store.find_method(key);
    if (!fact) {
      out.warnings.push_back(fmt::format("method '{}' has no facts record; skipped", key.qualified_name()));
      continue;
    }
    methods.push_back(key);
    vectors.push_back(method_term_vector(*fact, *store.find_class(fact->class_name()), tokenizer, opts));
  }

  std::set<std::string> vocab;
  for (const auto& v : vectors)
    for (const auto& [term, c] : v) vocab.insert(term);
  if (vocab.empty()) throw Error(ErrorKind::empty_result, "build_matrix: vocabulary is empty");

  auto& mx = out.matrix;
  mx.dictionary = TermDictionary(vocab);
  mx.methods = methods;
  for (const auto& v : vectors) {
    SparseRow row;
    for (const auto& [term, c] : v) row.push_back({*mx.dictionary.id(term), c});
    mx.method_terms.push_back(std::move(row));
  }

  std::map<MethodKey, std::uint32_t> index;
  for (std::uint32_t i = 0; i < methods.size(); ++i) index.emplace(methods[i], i);
  for (const auto& t : corpus) {
    mx.trace_ids.push_back(t.trace_id);
    std::set<std::uint32_t> cols;
    for (const auto& e : compress_trace(t).events)
      if (e.kind == EventKind::method_entry)
        if (auto it = index.find(e.method); it != index.end()) cols.insert(it->second);
    mx.trace_methods.emplace_back(cols.begin(), cols.end());
  }
  mx.rows = multiply_factors(mx.trace_methods, mx.method_terms);
  for (std::size_t d = 0; d < mx.rows.size(); ++d)
    if (mx.rows[d].empty())
      throw Error(ErrorKind::empty_result,
                  fmt::format("build_matrix: trace '{}' has no surviving terms", mx.trace_ids[d]));
  return out;
}

namespace detail {

inline std::string format_sparse(const SparseRow& row, const TermDictionary& dict) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ' ';
    out += fmt::format("{}:{}", dict.term(row[i].term), row[i].count);
  }
  return out;
}

inline SparseRow parse_sparse(std::string_view s, const TermDictionary& dict, std::string_view what) {
  std::map<std::uint32_t, std::uint32_t> acc;
  for (const auto& tok : text::split_ws(s)) {
    const auto colon = tok.rfind(':');
    if (colon == std::string::npos)
      throw Error(ErrorKind::parse, fmt::format("{}: expected term:count, got '{}'", what, tok));
    const auto id = dict.id(tok.substr(0, colon));
    if (!id)
      throw Error(ErrorKind::stale_artifact,
                  fmt::format("{}: term '{}' not in dictionary", what, tok.substr(0, colon)));
    const auto c = text::parse_int(tok.substr(colon + 1), what);
    if (c <= 0) throw Error(ErrorKind::parse, fmt::format("{}: non-positive count in '{}'", what, tok));
    acc[*id] += static_cast<std::uint32_t>(c);
  }
  SparseRow row;
  for (const auto& [t, c] : acc) row.push_back({t, c});
  return row;
}

}  // namespace detail

/// `<num_docs>` then one line of `term:count` pairs per trace.
inline std::string format_matrix(const TraceIdentifierMatrix& mx) {
  std::string out = fmt::format("{}\n", mx.num_docs());
  for (const auto& row : mx.rows) out += detail::format_sparse(row, mx.dictionary) + "\n";
  return out;
}

/// Dense 0/1 table, header `trace_id` followed by method names.
inline std::string format_trace_method(const TraceIdentifierMatrix& mx) {
  std::string out = "trace_id";
  for (const auto& m : mx.methods) out += "\t" + m.qualified_name();
  out += "\n";
  const auto dense = mx.dense_trace_method();
  for (std::size_t d = 0; d < mx.num_docs(); ++d) {
    out += mx.trace_ids[d];
    for (auto v : dense[d]) out += fmt::format("\t{}", v);
    out += "\n";
  }
  return out;
}

inline std::string format_method_terms(const TraceIdentifierMatrix& mx) {
  std::string out;
  for (std::size_t m = 0; m < mx.methods.size(); ++m)
    out += mx.methods[m].qualified_name() + "\t" + detail::format_sparse(mx.method_terms[m], mx.dictionary) + "\n";
  return out;
}

/// Reassembles a matrix from its exported parts and checks that the stored
/// rows equal the product of the stored factors.
inline TraceIdentifierMatrix parse_matrix(std::string_view dictionary, std::string_view trace_method,
                                          std::string_view method_terms, std::string_view matrix) {
  TraceIdentifierMatrix mx;
  mx.dictionary = TermDictionary::parse(dictionary);

  const auto tm_lines = text::lines(trace_method);
  if (tm_lines.empty()) throw Error(ErrorKind::parse, "trace_method: missing header");
  const auto header = text::split(tm_lines[0], '\t');
  for (std::size_t i = 1; i < header.size(); ++i) mx.methods.push_back(MethodKey::parse(header[i]));
  for (std::size_t r = 1; r < tm_lines.size(); ++r) {
    const auto f = text::split(tm_lines[r], '\t');
    if (f.size() != header.size()) throw Error(ErrorKind::parse, "trace_method: ragged row");
    mx.trace_ids.push_back(f[0]);
    auto& cols = mx.trace_methods.emplace_back();
    for (std::uint32_t c = 1; c < f.size(); ++c) {
      if (f[c] == "1") cols.push_back(c - 1);
      else if (f[c] != "0") throw Error(ErrorKind::parse, "trace_method: cells must be 0 or 1");
    }
  }

  const auto mt_lines = text::lines(method_terms);
  if (mt_lines.size() != mx.methods.size())
    throw Error(ErrorKind::stale_artifact, "method_terms: method count differs from trace_method");
  for (std::size_t m = 0; m < mt_lines.size(); ++m) {
    const auto tab = mt_lines[m].find('\t');
    if (tab == std::string::npos || mt_lines[m].substr(0, tab) != mx.methods[m].qualified_name())
      throw Error(ErrorKind::stale_artifact, "method_terms: method order differs from trace_method");
    mx.method_terms.push_back(detail::parse_sparse(mt_lines[m].substr(tab + 1), mx.dictionary, "method_terms"));
  }

  const auto mlines = text::lines(matrix);
  if (mlines.empty() || text::parse_int(mlines[0], "matrix header") != static_cast<long long>(mx.num_docs()) ||
      mlines.size() != mx.num_docs() + 1)
    throw Error(ErrorKind::stale_artifact, "matrix: document count differs from trace_method");
  for (std::size_t d = 1; d < mlines.size(); ++d)
    mx.rows.push_back(detail::parse_sparse(mlines[d], mx.dictionary, "matrix"));

  if (mx.rows != multiply_factors(mx.trace_methods, mx.method_terms))
    throw Error(ErrorKind::stale_artifact, "matrix: rows are not the product of the stored factors");
  return mx;
}

}  // namespace featloc
