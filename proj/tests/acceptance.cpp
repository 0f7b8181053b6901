// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sys/wait.h>

#include <fmt/format.h>

#include "featloc/pipeline.hpp"
#include "fixture_support.hpp"
#include "test_support.hpp"

namespace {

using namespace featloc;
using Clock = std::chrono::steady_clock;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Check tfidf_reference() {
  Check c;
  const auto start = Clock::now();
  const std::vector<Trace> corpus{testing::make_trace("Trace1", {"C.m1()", "C.m2()", "C.m3()", "C.m4()"}),
                                  testing::make_trace("Trace2", {"C.m1()", "C.m2()", "C.m1()", "C.m4()"}),
                                  testing::make_trace("Trace3", {"C.m3()", "C.m4()", "C.m3()", "C.m4()"})};
  const auto table = score_methods(count_methods(corpus));
  auto row = [&](const char* m) { return table.find(MethodKey::parse(m)); };
  const double expected[] = {0.132068443, 0.088045626, 0.132068443, 0.0};
  const char* names[] = {"C.m1()", "C.m2()", "C.m3()", "C.m4()"};
  for (int i = 0; i < 4; ++i)
    c.require(std::abs(row(names[i])->score - expected[i]) <= 1e-8,
              fmt::format("{} score {} vs {}", names[i], row(names[i])->score, expected[i]));
  // Reference cells are single-precision shortest renderings.
  c.require(static_cast<float>(row("C.m1()")->cell(0)) == 0.044022813f, "cell m1/Trace1");
  c.require(static_cast<float>(row("C.m2()")->cell(0)) == 0.044022813f, "cell m2/Trace1");
  c.require(static_cast<float>(row("C.m3()")->cell(0)) == 0.044022813f, "cell m3/Trace1");
  c.require(static_cast<float>(row("C.m1()")->cell(1)) == 0.08804563f, "cell m1/Trace2");
  c.require(static_cast<float>(row("C.m2()")->cell(1)) == 0.044022813f, "cell m2/Trace2");
  c.require(static_cast<float>(row("C.m3()")->cell(2)) == 0.08804563f, "cell m3/Trace3");
  const double t = seconds_since(start);
  c.require(t < 1.0, fmt::format("took {:.3f}s", t));
  if (c.ok) c.detail = fmt::format("scores within 1e-8, cells exact, {:.4f}s", t);
  return c;
}

Check omnipresent_filter() {
  Check c;
  std::mt19937_64 rng(2024);
  const auto util = MethodKey::parse("Util.log()");
  double worst = 0.0;
  std::size_t checked = 0;
  for (int round = 0; round < 200; ++round) {
    auto corpus = testing::random_corpus(rng, 8, 11);
    for (auto& t : corpus) {
      const auto at = rng() % (t.events.size() + 1);
      t.events.insert(t.events.begin() + static_cast<std::ptrdiff_t>(at),
                      TraceEvent{"t1", EventKind::method_entry, util, 0});
    }
    const auto table = score_methods(count_methods(corpus));
    for (const auto& r : table.rows) {
      bool everywhere = true;
      for (const auto& t : corpus) {
        const auto ms = t.methods();
        everywhere = everywhere && std::find(ms.begin(), ms.end(), r.method) != ms.end();
      }
      const double oracle = testing::brute_force_score(corpus, r.method);
      worst = std::max(worst, std::abs(r.score - oracle));
      c.require(std::abs(r.score - oracle) <= 1e-12, fmt::format("round {} {}: {} vs {}", round,
                                                                  r.method.qualified_name(), r.score, oracle));
      if (!everywhere) continue;
      ++checked;
      c.require(r.score == 0.0, fmt::format("round {}: omnipresent {} scored {}", round, r.method.qualified_name(), r.score));
      for (double threshold : {1e-300, 1e-9, 0.01, 0.3}) {
        try {
          const auto kept = filter_methods(table, threshold).kept_set();
          c.require(!kept.contains(r.method), fmt::format("round {}: kept at threshold {}", round, threshold));
        } catch (const Error& e) {
          c.require(e.kind() == ErrorKind::empty_result, e.what());
        }
      }
    }
  }
  if (c.ok) c.detail = fmt::format("{} omnipresent methods, max |score - oracle| = {:g}", checked, worst);
  return c;
}

Check lda_normalization_determinism() {
  Check c;
  const auto a = testing::fixture_run();
  const auto b = testing::fixture_run();
  double worst = 0.0;
  for (const auto* m : {&a.model.theta, &a.model.phi})
    for (std::size_t r = 0; r < m->rows(); ++r) {
      double s = 0.0;
      for (double x : m->row(r)) s += x;
      worst = std::max(worst, std::abs(s - 1.0));
    }
  c.require(worst <= 1e-9, fmt::format("row sum off by {:g}", worst));
  c.require(a.model.theta == b.model.theta && a.model.phi == b.model.phi && a.model.assignments == b.model.assignments,
            "same seed produced different models");

  auto cfg = testing::fixture_lda();
  cfg.topics = 1;
  const auto one = testing::fixture_run(cfg);
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& row : testing::named_rows(one.matrix))
    for (const auto& [term, n] : row) {
      counts[term] += n;
      total += n;
    }
  const double v = static_cast<double>(one.matrix.vocab_size());
  double unigram_err = 0.0;
  for (const auto& [term, n] : counts)
    unigram_err = std::max(unigram_err, std::abs(one.model.phi(0, *one.matrix.dictionary.id(term)) -
                                                 (n + cfg.beta) / (total + v * cfg.beta)));
  c.require(counts.size() == one.matrix.vocab_size(), "unigram oracle vocabulary size");
  c.require(unigram_err <= 1e-12, fmt::format("K=1 phi differs from unigram by {:g}", unigram_err));
  if (c.ok) c.detail = fmt::format("max row-sum error {:g}, bit-identical reruns, K=1 error {:g}", worst, unigram_err);
  return c;
}

Check planted_recovery() {
  Check c;
  const auto start = Clock::now();
  int good = 0;
  std::vector<std::string> per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto corpus = testing::planted_corpus(seed, 40, 2, 10, 50.0, 0.5);
    LdaConfig cfg;
    cfg.topics = 2;
    cfg.iterations = 500;
    cfg.seed = seed;
    const auto model = fit(corpus.rows, corpus.vocab_size, cfg);
    const auto o0 = testing::best_overlap(model.phi.row(0), corpus, 10);
    const auto o1 = testing::best_overlap(model.phi.row(1), corpus, 10);
    if (o0 >= 9 && o1 >= 9) ++good;
    per_seed.push_back(fmt::format("{}/{}", o0, o1));
  }
  const double t = seconds_since(start);
  c.require(good >= 4, fmt::format("{} of 5 seeds recovered ({})", good, text::join(per_seed, " ")));
  c.require(t < 60.0, fmt::format("took {:.1f}s", t));
  if (c.ok) c.detail = fmt::format("{}/5 seeds, overlaps {}, {:.2f}s", good, text::join(per_seed, " "), t);
  return c;
}

Check matrix_linearity() {
  Check c;
  std::mt19937_64 rng(77);
  for (int round = 0; round < 100; ++round) {
    const auto in = testing::random_matrix_instance(rng);
    const auto mx = build_matrix(in.corpus, in.kept, in.store).matrix;
    c.require(testing::named_rows(mx) == testing::oracle_matrix(in), fmt::format("instance {} differs", round));
  }
  if (c.ok) c.detail = "100 instances cell-exact";
  return c;
}

Check lambda_cut_structure() {
  Check c;
  const fs::path data = FEATLOC_TEST_DATA_DIR;
  const auto ctm = parse_class_topic(text::read_file(data / "class_topic_reference.tsv"));
  const auto closure = maxmin_closure(row_similarity(ctm.weights)).matrix;
  c.require(maxmin_compose(closure, closure) == closure, "closure not idempotent");

  std::vector<ClusterPartition> sweep;
  for (int i = 0; i <= 100; ++i) sweep.push_back(lambda_cut(closure, ctm.classes, i / 100.0));
  for (std::size_t i = 1; i < sweep.size(); ++i)
    for (const auto& fine : sweep[i].indices) {
      bool inside = false;
      for (const auto& coarse : sweep[i - 1].indices)
        inside = inside || std::includes(coarse.begin(), coarse.end(), fine.begin(), fine.end());
      c.require(inside, fmt::format("partition at {} not nested in {}", sweep[i].lambda, sweep[i - 1].lambda));
    }
  c.require(sweep.front().clusters.size() == 1 && sweep.back().clusters.size() == ctm.classes.size(),
            "extreme cuts");

  const auto cut = lambda_cut(closure, ctm.classes, 0.912);
  const auto golden = text::read_file(data / "class_topic_reference_lambda_0.912.golden");
  c.require(format_clusters(cut) == golden, "partition at 0.912 differs from golden file");
  if (c.ok) c.detail = fmt::format("idempotent, 101-step sweep nested, {} clusters at 0.912 match golden", cut.clusters.size());
  return c;
}

Check f_measure_values() {
  Check c;
  c.require(f_measure(0.5, 0.5) == 0.5, "f(0.5,0.5)");
  c.require(f_measure(1.0, 0.0) == 0.0, "f(1,0)");
  c.require(f_measure(0.6, 0.4) == 0.48, fmt::format("f(0.6,0.4) = {}", f_measure(0.6, 0.4)));
  if (c.ok) c.detail = "exact";
  return c;
}

int run_cli(const std::string& args) {
  const int status = std::system(fmt::format("'{}' {} >/dev/null 2>&1", FEATLOC_CLI, args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Check end_to_end_determinism() {
  Check c;
  const auto base = fs::temp_directory_path() / "featloc_acceptance";
  fs::remove_all(base);
  const auto cfg = (testing::fixture_dir() / "pipeline.cfg").string();
  const auto start = Clock::now();
  for (auto run : {"a", "b"})
    c.require(run_cli(fmt::format("run -c '{}' --out '{}'", cfg, (base / run).string())) == 0,
              fmt::format("run {} failed", run));
  const double t = seconds_since(start);
  std::size_t files = 0;
  if (c.ok) {
    for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
      if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
      ++files;
      const auto rel = fs::relative(e.path(), base / "a");
      c.require(fs::exists(base / "b" / rel) && text::read_file(e.path()) == text::read_file(base / "b" / rel),
                fmt::format("{} differs", rel.generic_string()));
    }
    c.require(files > 20, fmt::format("only {} artifacts", files));
    c.require(verify_manifest(base / "a").empty() && verify_manifest(base / "b").empty(), "manifest does not verify");
  }
  c.require(t < 10.0, fmt::format("two runs took {:.2f}s", t));
  if (c.ok) c.detail = fmt::format("{} artifacts byte-identical, two runs in {:.2f}s", files, t);
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"tfidf-reference-scores", tfidf_reference},
      {"omnipresent-filter", omnipresent_filter},
      {"lda-normalization-determinism", lda_normalization_determinism},
      {"planted-topic-recovery", planted_recovery},
      {"matrix-build-linearity", matrix_linearity},
      {"lambda-cut-structure", lambda_cut_structure},
      {"f-measure", f_measure_values},
      {"end-to-end-determinism", end_to_end_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c = {false, fmt::format("exception: {}", e.what())};
    }
    std::cout << fmt::format("{} {}: {}\n", c.ok ? "PASS" : "FAIL", name, c.detail) << std::flush;
    failed += c.ok ? 0 : 1;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
