#pragma once

// End-to-end orchestration over an artifact directory.
//
// Layout of an artifact directory (all paths relative to it):
//   config.txt            resolved configuration, key = value
//   corpus/manifest.tsv   trace_id, use_case_id, corpus/<id>.trace
//   corpus/<id>.trace     ingested traces (marker filtering applied)
//   method_scores.tsv     per method: tf-idf cell per trace, score, kept flag
//   kept_methods.txt      one qualified method per line
//   corpus_stats.tsv      per use case: scenarios, methods, distinct, after filtering
//   facts.tsv             snapshot of the facts file
//   dictionary.tsv        term id, term
//   trace_method.tsv      binary trace x method factor
//   method_terms.tsv      method x term counts factor
//   matrix.txt            trace x term counts (first line: trace count)
//   theta.tsv, phi.tsv    topic model point estimates with a parameter header
//   top_words.tsv         top_n terms per topic
//   likelihood.tsv        sweep, log-likelihood
//   assignments.txt       final token assignments (dump_assignments only)
//   topic_similarity.tsv  cosine between phi rows
//   categories.tsv        single-link topic categories at cosine_threshold
//   class_topic.tsv       class x topic weights
//   closure.tsv           max-min closure of class cosine similarity
//   clusters.tsv          lambda-cut of the closure
//   heatmap.tsv           class, topic, weight, shade
//   index.json            query index
//   manifest.json         per stage: inputs and outputs with FNV-1a hashes, timestamps
//
// Each file is written by exactly one stage. Everything except manifest.json
// is a pure function of the inputs and the seed.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "featloc/error.hpp"
#include "featloc/feature_query.hpp"
#include "featloc/lexicon.hpp"
#include "featloc/relevance_filter.hpp"
#include "featloc/text.hpp"
#include "featloc/topic_analysis.hpp"
#include "featloc/topic_engine.hpp"
#include "featloc/trace_corpus.hpp"

#ifndef FEATLOC_VERSION
#define FEATLOC_VERSION "0.0.0"
#endif

namespace featloc {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path traces;  // trace manifest
  fs::path facts;
  fs::path out = "featloc-out";
  bool marked_only = false;
  double threshold = 0.0;
  LdaConfig lda;
  double cosine_threshold = 0.6;
  double lambda = 0.912;
  std::optional<fs::path> keywords;
  std::optional<fs::path> stop_words;
  bool class_details = false;
  ShadeScale heatmap_scale = ShadeScale::global;
  bool dump_assignments = false;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "traces",     "facts",     "out",       "marked_only",      "threshold",        "topics",
        "alpha",      "beta",      "iterations", "seed",            "top_n",            "cosine_threshold",
        "lambda",     "keywords",  "stop_words", "class_details",   "heatmap_scale",    "dump_assignments",
        "likelihood_interval"};
    return k;
  }

  /// Sets one key. Relative paths resolve against `base`.
  void set(std::string_view key, std::string_view raw, const fs::path& base = {}) {
    const std::string value(text::trim(raw));
    const auto what = fmt::format("config key '{}'", key);
    auto path = [&] { return fs::path(value).is_relative() && !base.empty() ? base / value : fs::path(value); };
    auto boolean = [&] {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      throw Error(ErrorKind::parameter, fmt::format("{}: expected true/false, got '{}'", what, value));
    };
    auto count = [&] {
      const auto v = text::parse_int(value, what);
      if (v < 0) throw Error(ErrorKind::parameter, fmt::format("{}: must be >= 0", what));
      return static_cast<std::size_t>(v);
    };
    try {
      if (key == "traces") traces = path();
      else if (key == "facts") facts = path();
      else if (key == "out") out = path();
      else if (key == "marked_only") marked_only = boolean();
      else if (key == "threshold") threshold = text::parse_double(value, what);
      else if (key == "topics") lda.topics = count();
      else if (key == "alpha") lda.alpha = text::parse_double(value, what);
      else if (key == "beta") lda.beta = text::parse_double(value, what);
      else if (key == "iterations") lda.iterations = count();
      else if (key == "seed") lda.seed = count();
      else if (key == "top_n") lda.top_n = count();
      else if (key == "likelihood_interval") lda.likelihood_interval = count();
      else if (key == "cosine_threshold") cosine_threshold = text::parse_double(value, what);
      else if (key == "lambda") lambda = text::parse_double(value, what);
      else if (key == "keywords") keywords = path();
      else if (key == "stop_words") stop_words = path();
      else if (key == "class_details") class_details = boolean();
      else if (key == "dump_assignments") dump_assignments = boolean();
      else if (key == "heatmap_scale") {
        if (value == "global") heatmap_scale = ShadeScale::global;
        else if (value == "per_row") heatmap_scale = ShadeScale::per_row;
        else throw Error(ErrorKind::parameter, fmt::format("{}: expected global or per_row", what));
      } else {
        throw Error(ErrorKind::parameter, fmt::format("unknown config key '{}'", key));
      }
    } catch (const Error& e) {
      throw Error(ErrorKind::parameter, e.what());
    }
  }

  void validate() const {
    lda.validate();
    if (!(threshold >= 0.0)) throw Error(ErrorKind::parameter, "threshold must be >= 0");
    if (!(cosine_threshold > 0.0 && cosine_threshold <= 1.0))
      throw Error(ErrorKind::parameter, "cosine_threshold must be in (0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorKind::parameter, "lambda must be in [0, 1]");
    if (out.empty()) throw Error(ErrorKind::parameter, "out must be set");
  }

  /// Resolved values, one `key = value` per line, in key order.
  std::string serialize() const {
    std::string s;
    auto put = [&](std::string_view k, const std::string& v) { s += fmt::format("{} = {}\n", k, v); };
    put("traces", traces.generic_string());
    put("facts", facts.generic_string());
    put("marked_only", marked_only ? "true" : "false");
    put("threshold", text::number(threshold));
    put("topics", std::to_string(lda.topics));
    put("alpha", text::number(lda.resolved_alpha()));
    put("beta", text::number(lda.beta));
    put("iterations", std::to_string(lda.iterations));
    put("seed", std::to_string(lda.seed));
    put("top_n", std::to_string(lda.top_n));
    put("likelihood_interval", std::to_string(lda.likelihood_interval));
    put("cosine_threshold", text::number(cosine_threshold));
    put("lambda", text::number(lambda));
    if (keywords) put("keywords", keywords->generic_string());
    if (stop_words) put("stop_words", stop_words->generic_string());
    put("class_details", class_details ? "true" : "false");
    put("heatmap_scale", heatmap_scale == ShadeScale::global ? "global" : "per_row");
    put("dump_assignments", dump_assignments ? "true" : "false");
    return s;
  }

  Tokenizer tokenizer() const {
    auto lists = StopLists::defaults();
    if (keywords) lists.keywords = StopLists::load(*keywords);
    if (stop_words) lists.stop_words = StopLists::load(*stop_words);
    return Tokenizer(std::move(lists));
  }
};

/// Flat `key = value` text; '#' starts a comment line. Later duplicates win.
inline PipelineConfig parse_config(std::string_view content, const fs::path& base, PipelineConfig cfg = {}) {
  std::size_t line_no = 0;
  for (const auto& raw : text::lines(content)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::parameter, fmt::format("config line {}: expected key = value", line_no));
    try {
      cfg.set(text::trim(line.substr(0, eq)), line.substr(eq + 1), base);
    } catch (const Error& e) {
      throw Error(ErrorKind::parameter, fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path, PipelineConfig cfg = {}) {
  return parse_config(text::read_file(path), path.parent_path(), std::move(cfg));
}

// ---------------------------------------------------------------- manifest

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> s{"ingest", "score", "matrix", "lda", "analyze", "index"};
  return s;
}

inline std::size_t stage_number(std::string_view stage) {
  const auto& s = stage_names();
  return static_cast<std::size_t>(std::find(s.begin(), s.end(), stage) - s.begin());
}

struct StageRecord {
  std::string name;
  std::map<std::string, std::string> inputs;   // path -> fnv1a hex
  std::map<std::string, std::string> outputs;  // path relative to the artifact dir -> fnv1a hex
  std::string started;
  std::string finished;
  std::vector<std::string> warnings;
};

struct RunManifest {
  std::string tool_version = FEATLOC_VERSION;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;
  std::string status = "partial";  // partial | complete | failed
  std::string failed_stage;
  std::string error;
};

inline std::string file_hash(const fs::path& p) { return text::hex64(text::fnv1a(text::read_file(p))); }

inline std::string utc_now() {
  const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}Z", now);
}

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : m.stages)
    stages.push_back({{"name", s.name},
                      {"inputs", s.inputs},
                      {"outputs", s.outputs},
                      {"started", s.started},
                      {"finished", s.finished},
                      {"warnings", s.warnings}});
  nlohmann::json j{{"tool_version", m.tool_version}, {"seed", m.seed}, {"stages", stages}, {"status", m.status}};
  if (!m.failed_stage.empty()) {
    j["failed_stage"] = m.failed_stage;
    j["error"] = m.error;
  }
  return j;
}

inline RunManifest parse_manifest(std::string_view content) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(content);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.status = j.at("status").get<std::string>();
    m.failed_stage = j.value("failed_stage", "");
    m.error = j.value("error", "");
    for (const auto& s : j.at("stages"))
      m.stages.push_back({s.at("name").get<std::string>(),
                          s.at("inputs").get<std::map<std::string, std::string>>(),
                          s.at("outputs").get<std::map<std::string, std::string>>(),
                          s.at("started").get<std::string>(), s.at("finished").get<std::string>(),
                          s.at("warnings").get<std::vector<std::string>>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, fmt::format("manifest.json: {}", e.what()));
  }
  return m;
}

inline RunManifest read_manifest(const fs::path& out) {
  if (!fs::exists(out / "manifest.json")) return {};
  return parse_manifest(text::read_file(out / "manifest.json"));
}

inline void write_manifest(const fs::path& out, const RunManifest& m) {
  text::write_file(out / "manifest.json", to_json(m).dump(2) + "\n");
}

/// Replaces the record for `rec.name`; later stages are dropped since they
/// were derived from the previous outputs.
inline void record_stage(RunManifest& m, StageRecord rec) {
  const auto n = stage_number(rec.name);
  std::erase_if(m.stages, [&](const StageRecord& s) { return stage_number(s.name) >= n; });
  m.stages.push_back(std::move(rec));
  m.status = m.stages.size() == stage_names().size() ? "complete" : "partial";
  m.failed_stage.clear();
  m.error.clear();
}

/// Problems that make the directory unfit to serve; empty when it is
/// complete and every recorded hash still matches.
inline std::vector<std::string> verify_manifest(const fs::path& out) {
  std::vector<std::string> problems;
  if (!fs::exists(out / "manifest.json")) return {fmt::format("{}: no manifest.json", out.string())};
  RunManifest m;
  try {
    m = read_manifest(out);
  } catch (const Error& e) {
    return {e.what()};
  }
  if (m.status != "complete")
    problems.push_back(m.failed_stage.empty() ? fmt::format("run status is '{}'", m.status)
                                              : fmt::format("run failed at stage {}: {}", m.failed_stage, m.error));
  std::vector<std::string> names;
  for (const auto& s : m.stages) names.push_back(s.name);
  if (names != stage_names()) problems.push_back(fmt::format("stages recorded: [{}]", text::join(names, ", ")));
  for (const auto& s : m.stages) {
    auto check = [&](const fs::path& p, const std::string& hash, std::string_view role) {
      if (!fs::exists(p)) {
        problems.push_back(fmt::format("{}: {} {} is missing", s.name, role, p.string()));
        return;
      }
      if (file_hash(p) != hash)
        problems.push_back(fmt::format("{}: {} {} changed since the run (stale)", s.name, role, p.string()));
    };
    for (const auto& [p, h] : s.outputs) check(out / p, h, "output");
    for (const auto& [p, h] : s.inputs)
      if (p.starts_with("@/")) check(out / p.substr(2), h, "input");
  }
  return problems;
}

// ------------------------------------------------------------------ stages

struct StageError : Error {
  StageError(std::string stage_name, const Error& cause)
      : Error(cause.kind(), fmt::format("stage {} failed: {}", stage_name, cause.what())),
        stage(std::move(stage_name)) {}
  std::string stage;
};

namespace detail {

// Tracks one stage's reads and writes. Inputs inside the artifact dir are
// keyed "@/<relative path>", external ones by their path as given.
class StageContext {
 public:
  StageContext(const PipelineConfig& cfg, std::string name) : cfg_(cfg) {
    rec_.name = std::move(name);
    rec_.started = utc_now();
  }

  const fs::path& out() const { return cfg_.out; }

  std::string read(const std::string& rel) {
    auto content = text::read_file(cfg_.out / rel);
    rec_.inputs["@/" + rel] = text::hex64(text::fnv1a(content));
    return content;
  }

  std::string read_external(const fs::path& p) {
    auto content = text::read_file(p);
    rec_.inputs[p.generic_string()] = text::hex64(text::fnv1a(content));
    return content;
  }

  void write(const std::string& rel, std::string_view content) {
    text::write_file(cfg_.out / rel, content);
    rec_.outputs[rel] = text::hex64(text::fnv1a(content));
  }

  void warn(std::string w) { rec_.warnings.push_back(std::move(w)); }
  void warn_all(const std::vector<std::string>& ws) {
    for (const auto& w : ws) warn(w);
  }

  StageRecord finish() {
    rec_.finished = utc_now();
    return std::move(rec_);
  }

 private:
  const PipelineConfig& cfg_;
  StageRecord rec_;
};

inline std::vector<Trace> load_corpus(StageContext& ctx) {
  std::vector<Trace> corpus;
  for (const auto& line : text::lines(ctx.read("corpus/manifest.tsv"))) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 3) throw Error(ErrorKind::parse, "corpus/manifest.tsv: expected 3 fields");
    corpus.push_back(parse_trace(ctx.read(f[2]), f[2], f[0], f[1], false));
  }
  return corpus;
}

inline std::set<MethodKey> load_kept(StageContext& ctx) {
  std::set<MethodKey> kept;
  for (const auto& line : text::lines(ctx.read("kept_methods.txt")))
    if (!line.empty()) kept.insert(MethodKey::parse(line));
  return kept;
}

inline TraceIdentifierMatrix load_matrix(StageContext& ctx) {
  return parse_matrix(ctx.read("dictionary.tsv"), ctx.read("trace_method.tsv"), ctx.read("method_terms.tsv"),
                      ctx.read("matrix.txt"));
}

inline TopicModel load_model(StageContext& ctx) { return parse_model(ctx.read("theta.tsv"), ctx.read("phi.tsv")); }

inline FactsStore load_facts(StageContext& ctx) { return parse_facts(ctx.read("facts.tsv"), "facts.tsv"); }

}  // namespace detail

inline StageRecord stage_ingest(const PipelineConfig& cfg) {
  detail::StageContext ctx(cfg, "ingest");
  if (cfg.traces.empty()) throw Error(ErrorKind::parameter, "no trace manifest configured (traces)");
  ctx.read_external(cfg.traces);
  auto sources = read_trace_manifest(cfg.traces);
  if (sources.empty()) throw Error(ErrorKind::parameter, fmt::format("{} lists no traces", cfg.traces.string()));
  for (const auto& s : sources) ctx.read_external(s.path);
  const auto corpus = ingest_traces(std::span<const TraceSource>(sources), cfg.marked_only);

  std::vector<TraceSource> copies;
  for (const auto& t : corpus) {
    if (t.empty_warning) ctx.warn(fmt::format("trace '{}' has no events", t.trace_id));
    const auto rel = fmt::format("corpus/{}.trace", t.trace_id);
    ctx.write(rel, serialize_trace(t));
    copies.push_back({t.trace_id, t.use_case_id, rel});
  }
  ctx.write("corpus/manifest.tsv", write_trace_manifest(copies));
  return ctx.finish();
}

inline StageRecord stage_score(const PipelineConfig& cfg) {
  detail::StageContext ctx(cfg, "score");
  const auto corpus = detail::load_corpus(ctx);
  const auto table = score_methods(count_methods(corpus));
  const auto filter = filter_methods(table, cfg.threshold);
  ctx.write("method_scores.tsv", format_score_report(table, filter));
  std::string kept;
  for (const auto& m : filter.kept) kept += m.qualified_name() + "\n";
  ctx.write("kept_methods.txt", kept);
  const auto kept_set = filter.kept_set();
  const auto stats = corpus_stats(corpus, &kept_set);
  ctx.write("corpus_stats.tsv", format_corpus_stats(stats));
  return ctx.finish();
}

inline StageRecord stage_matrix(const PipelineConfig& cfg) {
  detail::StageContext ctx(cfg, "matrix");
  if (cfg.facts.empty()) throw Error(ErrorKind::parameter, "no facts file configured (facts)");
  const auto store = parse_facts(ctx.read_external(cfg.facts), cfg.facts.string());
  const auto corpus = detail::load_corpus(ctx);
  const auto kept = detail::load_kept(ctx);
  if (cfg.keywords) ctx.read_external(*cfg.keywords);
  if (cfg.stop_words) ctx.read_external(*cfg.stop_words);
  auto build = build_matrix(corpus, kept, store, cfg.tokenizer(), TermOptions{cfg.class_details});
  ctx.warn_all(build.warnings);
  const auto& mx = build.matrix;
  ctx.write("facts.tsv", serialize_facts(store));
  ctx.write("dictionary.tsv", mx.dictionary.serialize());
  ctx.write("trace_method.tsv", format_trace_method(mx));
  ctx.write("method_terms.tsv", format_method_terms(mx));
  ctx.write("matrix.txt", format_matrix(mx));
  return ctx.finish();
}

inline StageRecord stage_lda(const PipelineConfig& cfg) {
  detail::StageContext ctx(cfg, "lda");
  const auto mx = detail::load_matrix(ctx);
  const auto model = fit(mx, cfg.lda);
  ctx.warn_all(model.warnings);
  ctx.write("theta.tsv", format_theta(model));
  ctx.write("phi.tsv", format_phi(model));
  ctx.write("top_words.tsv", format_top_words(top_words(model, mx.dictionary, std::min(cfg.lda.top_n, mx.vocab_size()))));
  std::string ll = "sweep\tlog_likelihood\n";
  for (const auto& [sweep, v] : model.log_likelihood) ll += fmt::format("{}\t{}\n", sweep, text::number(v));
  ctx.write("likelihood.tsv", ll);
  if (cfg.dump_assignments) ctx.write("assignments.txt", format_assignments(model));
  return ctx.finish();
}

inline StageRecord stage_analyze(const PipelineConfig& cfg) {
  detail::StageContext ctx(cfg, "analyze");
  const auto mx = detail::load_matrix(ctx);
  const auto model = detail::load_model(ctx);
  const auto store = detail::load_facts(ctx);

  std::vector<std::string> topic_labels;
  for (std::size_t k = 0; k < model.topics; ++k) topic_labels.push_back(fmt::format("topic{}", k));
  ctx.write("topic_similarity.tsv", format_labeled_matrix(topic_labels, row_similarity(model.phi), "topic", "topic"));
  ctx.write("categories.tsv", format_categories(group_topics(model.phi, cfg.cosine_threshold)));

  const auto ctm = class_topic_matrix(model, store, mx);
  ctx.warn_all(ctm.warnings);
  if (ctm.classes.empty()) throw Error(ErrorKind::empty_result, "no class has terms; nothing to cluster");
  ctx.write("class_topic.tsv", format_class_topic(ctm));
  const auto closure = maxmin_closure(row_similarity(ctm.weights));
  ctx.write("closure.tsv", fmt::format("# squarings={}\n", closure.squarings) +
                               format_labeled_matrix(ctm.classes, closure.matrix, "class", "c"));
  ctx.write("clusters.tsv", format_clusters(lambda_cut(closure.matrix, ctm.classes, cfg.lambda)));
  ctx.write("heatmap.tsv", format_heatmap(heatmap(ctm, cfg.heatmap_scale)));
  return ctx.finish();
}

inline StageRecord stage_index(const PipelineConfig& cfg) {
  detail::StageContext ctx(cfg, "index");
  const auto mx = detail::load_matrix(ctx);
  const auto model = detail::load_model(ctx);
  const auto store = detail::load_facts(ctx);
  const auto ctm = parse_class_topic(ctx.read("class_topic.tsv"));
  ctx.write("index.json", serialize_index(build_index(model, ctm, store, mx, cfg.lda.top_n)));
  return ctx.finish();
}

inline std::function<StageRecord(const PipelineConfig&)> stage_function(std::string_view name) {
  if (name == "ingest") return stage_ingest;
  if (name == "score") return stage_score;
  if (name == "matrix") return stage_matrix;
  if (name == "lda") return stage_lda;
  if (name == "analyze") return stage_analyze;
  if (name == "index") return stage_index;
  throw Error(ErrorKind::parameter, fmt::format("unknown stage '{}'", name));
}

/// Runs one stage and updates manifest.json. A failure is recorded in the
/// manifest and rethrown as StageError.
inline StageRecord run_stage(const PipelineConfig& cfg, std::string_view name) {
  cfg.validate();
  auto manifest = read_manifest(cfg.out);
  manifest.seed = cfg.lda.seed;
  manifest.tool_version = FEATLOC_VERSION;
  try {
    if (name == "ingest") text::write_file(cfg.out / "config.txt", cfg.serialize());
    auto rec = stage_function(name)(cfg);
    record_stage(manifest, rec);
    write_manifest(cfg.out, manifest);
    return rec;
  } catch (const Error& e) {
    const auto n = stage_number(name);
    std::erase_if(manifest.stages, [&](const StageRecord& s) { return stage_number(s.name) >= n; });
    manifest.status = "failed";
    manifest.failed_stage = std::string(name);
    manifest.error = e.what();
    write_manifest(cfg.out, manifest);
    throw StageError(std::string(name), e);
  } catch (const std::exception& e) {
    const Error wrapped(ErrorKind::io, e.what());
    manifest.status = "failed";
    manifest.failed_stage = std::string(name);
    manifest.error = e.what();
    write_manifest(cfg.out, manifest);
    throw StageError(std::string(name), wrapped);
  }
}

inline RunManifest run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out);
  if (fs::exists(cfg.out / "manifest.json")) fs::remove(cfg.out / "manifest.json");
  for (const auto& s : stage_names()) run_stage(cfg, s);
  return read_manifest(cfg.out);
}

}  // namespace featloc
