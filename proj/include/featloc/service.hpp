#pragma once

// Read-only HTTP service over a completed artifact directory.
//
// ArtifactService answers every endpoint as (status, json) without touching
// the network, so it can be tested directly; make_server binds it to routes.
// Everything is loaded at open() and never written back.

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "featloc/error.hpp"
#include "featloc/feature_query.hpp"
#include "featloc/pipeline.hpp"
#include "featloc/text.hpp"
#include "featloc/topic_analysis.hpp"

namespace featloc {

struct Response {
  int status = 200;
  nlohmann::json body;
};

inline int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter:
    case ErrorKind::parse:
    case ErrorKind::empty_query: return 400;
    case ErrorKind::not_found: return 404;
    default: return 500;
  }
}

inline Response error_response(const Error& e) {
  return {http_status(e.kind()), {{"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}}};
}

class ArtifactService {
 public:
  /// Refuses directories whose manifest is missing, incomplete or stale.
  static std::shared_ptr<const ArtifactService> open(const std::filesystem::path& dir) {
    if (const auto problems = verify_manifest(dir); !problems.empty())
      throw Error(ErrorKind::stale_artifact,
                  fmt::format("refusing to serve {}:\n  {}", dir.string(), text::join(problems, "\n  ")));
    auto s = std::shared_ptr<ArtifactService>(new ArtifactService());
    auto read = [&](const char* rel) { return text::read_file(dir / rel); };
    s->index_ = parse_index(read("index.json"));
    s->ctm_ = parse_class_topic(read("class_topic.tsv"));
    const auto closure = parse_class_topic(read("closure.tsv"));
    if (closure.classes != s->ctm_.classes)
      throw Error(ErrorKind::stale_artifact, "closure.tsv and class_topic.tsv list different classes");
    s->closure_ = closure.weights;
    s->categories_ = parse_categories(read("categories.tsv"));
    s->clusters_default_ = parse_default_lambda(read("clusters.tsv"));
    s->heatmap_ = parse_heatmap(read("heatmap.tsv"));
    s->stats_ = parse_stats(read("corpus_stats.tsv"), s->index_, s->ctm_);
    return s;
  }

  Response topics() const {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t k = 0; k < index_.topics; ++k)
      out.push_back({{"topic", k}, {"top_words", to_json(index_.top_words[k])}});
    return {200, {{"topics", out}}};
  }

  Response query(std::string_view q) const {
    return guard([&] { return Response{200, to_json(featloc::query(index_, q))}; });
  }

  Response topic_detail(std::string_view id) const {
    return guard([&] {
      const auto k = text::parse_int(id, "topic id");
      if (k < 0) throw Error(ErrorKind::not_found, fmt::format("topic {} not found", id));
      return Response{200, to_json(drill_down(index_, static_cast<std::size_t>(k)))};
    });
  }

  Response heatmap(std::optional<std::string_view> scale = std::nullopt) const {
    return guard([&] {
      auto cells = heatmap_;
      if (scale) {
        if (*scale == "global") cells = featloc::heatmap(ctm_, ShadeScale::global);
        else if (*scale == "per_row") cells = featloc::heatmap(ctm_, ShadeScale::per_row);
        else throw Error(ErrorKind::parameter, fmt::format("scale must be global or per_row, got '{}'", *scale));
      }
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& c : cells)
        rows.push_back({{"class", c.class_name}, {"topic", c.topic}, {"weight", c.weight}, {"shade", c.shade}});
      return Response{200, {{"classes", ctm_.classes}, {"topics", index_.topics}, {"cells", rows}}};
    });
  }

  Response categories() const { return {200, categories_}; }

  /// λ defaults to the run's value; only the cut is recomputed.
  Response clusters(std::optional<std::string_view> lambda) const {
    return guard([&] {
      const double l = lambda ? text::parse_double(*lambda, "lambda") : clusters_default_;
      const auto p = lambda_cut(closure_, ctm_.classes, l);
      return Response{200, {{"lambda", p.lambda}, {"clusters", p.clusters}}};
    });
  }

  Response stats() const { return {200, stats_}; }

  const QueryIndex& index() const noexcept { return index_; }

 private:
  ArtifactService() = default;

  template <typename F>
  static Response guard(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      return error_response(e);
    }
  }

  static nlohmann::json parse_categories(std::string_view content) {
    const auto ls = text::lines(content);
    if (ls.size() < 2 || !ls[0].starts_with("# threshold="))
      throw Error(ErrorKind::parse, "categories.tsv: missing header");
    auto ids = [](const std::string& field) {
      std::vector<std::size_t> out;
      for (const auto& t : text::split(field, ','))
        if (!t.empty()) out.push_back(static_cast<std::size_t>(text::parse_int(t, "categories.tsv")));
      return out;
    };
    nlohmann::json cats = nlohmann::json::array();
    std::vector<std::size_t> rest;
    for (std::size_t i = 2; i < ls.size(); ++i) {
      const auto f = text::split(ls[i], '\t');
      if (f.size() != 2) throw Error(ErrorKind::parse, "categories.tsv: expected 2 fields");
      if (f[0] == "rest") rest = ids(f[1]);
      else cats.push_back({{"id", text::parse_int(f[0], "category id")}, {"topics", ids(f[1])}});
    }
    return {{"threshold", text::parse_double(ls[0].substr(12), "categories threshold")},
            {"categories", cats},
            {"rest", rest}};
  }

  static double parse_default_lambda(std::string_view content) {
    const auto ls = text::lines(content);
    if (ls.empty() || !ls[0].starts_with("# lambda=")) throw Error(ErrorKind::parse, "clusters.tsv: missing header");
    return text::parse_double(ls[0].substr(9), "clusters lambda");
  }

  static std::vector<HeatCell> parse_heatmap(std::string_view content) {
    std::vector<HeatCell> cells;
    const auto ls = text::lines(content);
    for (std::size_t i = 1; i < ls.size(); ++i) {
      const auto f = text::split(ls[i], '\t');
      if (f.size() != 4) throw Error(ErrorKind::parse, "heatmap.tsv: expected 4 fields");
      cells.push_back({f[0], static_cast<std::size_t>(text::parse_int(f[1], "heatmap topic")),
                       text::parse_double(f[2], "heatmap weight"), text::parse_double(f[3], "heatmap shade")});
    }
    return cells;
  }

  static nlohmann::json parse_stats(std::string_view content, const QueryIndex& idx, const ClassTopicMatrix& ctm) {
    nlohmann::json rows = nlohmann::json::array();
    const auto ls = text::lines(content);
    for (std::size_t i = 1; i < ls.size(); ++i) {
      const auto f = text::split(ls[i], '\t');
      if (f.size() != 5) throw Error(ErrorKind::parse, "corpus_stats.tsv: expected 5 fields");
      rows.push_back({{"use_case", f[0]},
                      {"scenarios", text::parse_int(f[1], "scenarios")},
                      {"methods", text::parse_int(f[2], "methods")},
                      {"distinct_methods", text::parse_int(f[3], "distinct_methods")},
                      {"methods_after_filtering", text::parse_int(f[4], "methods_after_filtering")}});
    }
    return {{"use_cases", rows},
            {"traces", idx.trace_ids.size()},
            {"kept_methods", idx.method_traces.size()},
            {"classes", ctm.classes.size()},
            {"terms", idx.postings.size()},
            {"topics", idx.topics}};
  }

  QueryIndex index_;
  ClassTopicMatrix ctm_;
  DenseMatrix<double> closure_;
  nlohmann::json categories_;
  double clusters_default_ = 0.0;
  std::vector<HeatCell> heatmap_;
  nlohmann::json stats_;
};

/// Holds the current snapshot; reload() swaps in a freshly opened one.
class ServiceHandle {
 public:
  explicit ServiceHandle(std::filesystem::path dir) : dir_(std::move(dir)), current_(ArtifactService::open(dir_)) {}

  std::shared_ptr<const ArtifactService> get() const { return std::atomic_load(&current_); }

  void reload() { std::atomic_store(&current_, ArtifactService::open(dir_)); }

 private:
  std::filesystem::path dir_;
  std::shared_ptr<const ArtifactService> current_;
};

inline std::unique_ptr<httplib::Server> make_server(std::shared_ptr<ServiceHandle> handle,
                                                    const std::optional<std::filesystem::path>& static_dir = {}) {
  auto svr = std::make_unique<httplib::Server>();
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto param = [](const httplib::Request& req, const char* key) -> std::optional<std::string> {
    if (!req.has_param(key)) return std::nullopt;
    return req.get_param_value(key);
  };

  svr->Get("/v1/topics", [=](const httplib::Request&, httplib::Response& res) { send(res, handle->get()->topics()); });
  svr->Get("/v1/query", [=](const httplib::Request& req, httplib::Response& res) {
    send(res, handle->get()->query(param(req, "q").value_or("")));
  });
  svr->Get(R"(/v1/topics/([^/]+)/detail)", [=](const httplib::Request& req, httplib::Response& res) {
    send(res, handle->get()->topic_detail(req.matches[1].str()));
  });
  svr->Get("/v1/heatmap", [=](const httplib::Request& req, httplib::Response& res) {
    const auto scale = param(req, "scale");
    send(res, scale ? handle->get()->heatmap(*scale) : handle->get()->heatmap());
  });
  svr->Get("/v1/categories", [=](const httplib::Request&, httplib::Response& res) {
    send(res, handle->get()->categories());
  });
  svr->Get("/v1/clusters", [=](const httplib::Request& req, httplib::Response& res) {
    const auto lambda = param(req, "lambda");
    send(res, handle->get()->clusters(lambda ? std::optional<std::string_view>(*lambda) : std::nullopt));
  });
  svr->Get("/v1/stats", [=](const httplib::Request&, httplib::Response& res) { send(res, handle->get()->stats()); });

  if (static_dir) {
    if (!std::filesystem::is_directory(*static_dir))
      throw Error(ErrorKind::io, fmt::format("static directory {} does not exist", static_dir->string()));
    svr->set_mount_point("/", static_dir->string());
  }
  svr->set_error_handler([=](const httplib::Request& req, httplib::Response& res) {
    if (req.path.starts_with("/v1/") && res.body.empty())
      send(res, {res.status, {{"error", {{"kind", "not_found"}, {"message", "no such endpoint: " + req.path}}}}});
  });
  return svr;
}

}  // namespace featloc
