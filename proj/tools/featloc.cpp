// featloc command line: pipeline stages, queries and the artifact server.
//
// Exit codes: 0 success; 2..9 by failure class (see ErrorKind); 10 + stage
// number when a pipeline stage fails (ingest=10 .. index=15); 1 otherwise.

#include <chrono>
#include <csignal>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "featloc/feature_query.hpp"
#include "featloc/pipeline.hpp"
#include "featloc/service.hpp"

namespace {

using namespace featloc;

constexpr int kStageExitBase = 10;

struct Options {
  std::string config;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
};

void add_pipeline_options(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config, "key = value configuration file");
  for (const auto& key : PipelineConfig::keys()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (key == "marked_only" || key == "class_details" || key == "dump_assignments")
      cmd->add_flag(flag, o.flags[key], "override '" + key + "'");
    else
      cmd->add_option(flag, o.values[key], "override '" + key + "'");
  }
}

PipelineConfig resolve(const Options& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config);
  for (const auto& [key, value] : o.values)
    if (!value.empty()) cfg.set(key, value);
  for (const auto& [key, on] : o.flags)
    if (on) cfg.set(key, "true");
  cfg.validate();
  return cfg;
}

void print_record(const StageRecord& r) {
  std::cout << fmt::format("{}: {} outputs\n", r.name, r.outputs.size());
  for (const auto& w : r.warnings) std::cerr << fmt::format("warning: {}: {}\n", r.name, w);
}

int report(const Error& e) {
  std::cerr << fmt::format("error ({}): {}\n", to_string(e.kind()), e.what());
  return static_cast<int>(e.kind());
}

httplib::Server* active_server = nullptr;

void stop_server(int) {
  if (active_server) active_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature location from execution traces and identifier topics"};
  app.set_version_flag("--version", FEATLOC_VERSION);
  app.require_subcommand(1);

  Options opts;
  std::vector<CLI::App*> stage_cmds;
  for (const auto& s : stage_names()) {
    auto* cmd = app.add_subcommand(s, fmt::format("run only the {} stage", s));
    add_pipeline_options(cmd, opts);
    stage_cmds.push_back(cmd);
  }
  auto* run_cmd = app.add_subcommand("run", "run every stage in order");
  add_pipeline_options(run_cmd, opts);

  std::string dir = "featloc-out";
  std::vector<std::string> words;
  bool as_json = false;
  int detail = -1;
  auto* query_cmd = app.add_subcommand("query", "rank topics for a free-text query");
  query_cmd->add_option("-o,--out", dir, "artifact directory")->capture_default_str();
  query_cmd->add_option("text", words, "query words");
  query_cmd->add_option("--detail", detail, "show classes, methods and traces for this topic instead");
  query_cmd->add_flag("--json", as_json, "print the structured record");
  query_cmd->add_option("--keywords", opts.values["keywords"], "keyword list used at matrix time");
  query_cmd->add_option("--stop-words", opts.values["stop_words"], "stop list used at matrix time");

  std::string bind = "127.0.0.1:8080";
  std::string static_dir;
  auto* serve_cmd = app.add_subcommand("serve", "serve a completed run over HTTP");
  serve_cmd->add_option("-o,--out", dir, "artifact directory")->capture_default_str();
  serve_cmd->add_option("-b,--bind", bind, "host:port")->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "directory served at /");

  auto* stats_cmd = app.add_subcommand("stats", "print corpus statistics of a run");
  stats_cmd->add_option("-o,--out", dir, "artifact directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::parameter);
  }

  try {
    for (std::size_t i = 0; i < stage_cmds.size(); ++i)
      if (stage_cmds[i]->parsed()) {
        print_record(run_stage(resolve(opts), stage_names()[i]));
        return 0;
      }

    if (run_cmd->parsed()) {
      const auto cfg = resolve(opts);
      const auto start = std::chrono::steady_clock::now();
      const auto manifest = run_pipeline(cfg);
      for (const auto& r : manifest.stages) print_record(r);
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      std::cout << fmt::format("complete in {:.2f}s: {}\n", took.count(), cfg.out.string());
      return 0;
    }

    if (query_cmd->parsed()) {
      const auto idx = parse_index(text::read_file(fs::path(dir) / "index.json"));
      if (detail >= 0) {
        const auto d = drill_down(idx, static_cast<std::size_t>(detail));
        std::cout << (as_json ? to_json(d).dump(2) + "\n" : format_detail_text(d));
        return 0;
      }
      PipelineConfig cfg;
      for (const auto& key : {"keywords", "stop_words"})
        if (!opts.values[key].empty()) cfg.set(key, opts.values[key]);
      const auto res = query(idx, text::join(words, " "), cfg.tokenizer());
      std::cout << (as_json ? to_json(res).dump(2) + "\n" : format_query_text(res));
      return 0;
    }

    if (serve_cmd->parsed()) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorKind::parameter, "--bind expects host:port");
      const auto host = bind.substr(0, colon);
      const auto port = static_cast<int>(text::parse_int(bind.substr(colon + 1), "port"));
      auto handle = std::make_shared<ServiceHandle>(dir);
      auto svr = make_server(handle, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
      active_server = svr.get();
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cerr << fmt::format("serving {} on http://{}\n", dir, bind);
      if (!svr->listen(host, port)) throw Error(ErrorKind::io, fmt::format("cannot listen on {}", bind));
      return 0;
    }

    if (stats_cmd->parsed()) {
      std::vector<std::vector<std::string>> rows;
      for (const auto& line : text::lines(text::read_file(fs::path(dir) / "corpus_stats.tsv")))
        rows.push_back(text::split(line, '\t'));
      std::cout << format_table(rows);
      return 0;
    }
  } catch (const StageError& e) {
    std::cerr << fmt::format("error ({}): {}\n", to_string(e.kind()), e.what());
    return kStageExitBase + static_cast<int>(stage_number(e.stage));
  } catch (const Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
