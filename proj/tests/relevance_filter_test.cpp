#include <random>

#include <gtest/gtest.h>

#include "featloc/relevance_filter.hpp"
#include "test_support.hpp"

namespace featloc {
namespace {

// Reconstructed from a reference score table; see tests/oracles/tfidf_reference_oracle.py.
std::vector<Trace> reference_corpus() {
  return {testing::make_trace("Trace1", {"C.m1()", "C.m2()", "C.m3()", "C.m4()"}),
          testing::make_trace("Trace2", {"C.m1()", "C.m2()", "C.m1()", "C.m4()"}),
          testing::make_trace("Trace3", {"C.m3()", "C.m4()", "C.m3()", "C.m4()"})};
}

const MethodKey m1 = MethodKey::parse("C.m1()");
const MethodKey m2 = MethodKey::parse("C.m2()");
const MethodKey m3 = MethodKey::parse("C.m3()");
const MethodKey m4 = MethodKey::parse("C.m4()");

TEST(ScoreMethods, ReproducesReferenceScores) {
  const auto table = score_methods(count_methods(reference_corpus()));
  // The reference cells are shortest single-precision renderings.
  EXPECT_EQ(static_cast<float>(table.find(m1)->cell(0)), 0.044022813f);
  EXPECT_EQ(static_cast<float>(table.find(m2)->cell(0)), 0.044022813f);
  EXPECT_EQ(static_cast<float>(table.find(m3)->cell(0)), 0.044022813f);
  EXPECT_EQ(static_cast<float>(table.find(m1)->cell(1)), 0.08804563f);
  EXPECT_EQ(static_cast<float>(table.find(m2)->cell(1)), 0.044022813f);
  EXPECT_EQ(static_cast<float>(table.find(m3)->cell(2)), 0.08804563f);
  EXPECT_EQ(table.find(m3)->cell(1), 0.0);
  EXPECT_EQ(table.find(m1)->cell(2), 0.0);
  EXPECT_NEAR(table.find(m1)->score, 0.132068443, 1e-8);
  EXPECT_NEAR(table.find(m2)->score, 0.088045626, 1e-8);
  EXPECT_NEAR(table.find(m3)->score, 0.132068443, 1e-8);
  EXPECT_EQ(table.find(m4)->score, 0.0);
  EXPECT_EQ(table.find(m4)->idf, 0.0);
}

TEST(ScoreMethods, TfRowsAreDistributions) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    const auto table = score_methods(count_methods(testing::random_corpus(rng, 5, 8)));
    for (std::size_t i = 0; i < table.trace_ids.size(); ++i) {
      double sum = 0.0;
      for (const auto& r : table.rows) {
        EXPECT_GE(r.tf[i], 0.0);
        EXPECT_LE(r.tf[i], 1.0);
        sum += r.tf[i];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(ScoreMethods, SingleTraceScoresZero) {
  const std::vector<Trace> one{testing::make_trace("T", {"C.a()", "C.b()", "C.a()"})};
  for (const auto& r : score_methods(count_methods(one)).rows) EXPECT_EQ(r.score, 0.0);
}

TEST(ScoreMethods, EmptyTraceRejected) {
  auto corpus = reference_corpus();
  corpus.push_back(Trace{"Empty", "U", {}, false, true});
  EXPECT_THROW(score_methods(count_methods(corpus)), Error);
  EXPECT_THROW(score_methods(TraceMethodCounts{}), Error);
}

TEST(ScoreMethods, MatchesBruteForceOracle) {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 200; ++round) {
    const auto corpus = testing::random_corpus(rng, 5, 8);
    for (const auto& r : score_methods(count_methods(corpus)).rows)
      EXPECT_NEAR(r.score, testing::brute_force_score(corpus, r.method), 1e-12);
  }
}

TEST(ScoreMethods, ScaleInvariant) {
  std::mt19937_64 rng(23);
  for (int round = 0; round < 50; ++round) {
    const auto corpus = testing::random_corpus(rng, 5, 6);
    auto scaled = corpus;
    for (auto& t : scaled) {
      const auto original = t.events;
      for (int rep = 0; rep < 2; ++rep) t.events.insert(t.events.end(), original.begin(), original.end());
    }
    const auto a = score_methods(count_methods(corpus));
    const auto b = score_methods(count_methods(scaled));
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t j = 0; j < a.rows.size(); ++j) {
      EXPECT_NEAR(a.rows[j].score, b.rows[j].score, 1e-15);
      EXPECT_EQ(a.rows[j].idf, b.rows[j].idf);
    }
  }
}

TEST(ScoreMethods, OrderIndependentAndSingleTraceMethodHasMaxIdf) {
  std::mt19937_64 rng(29);
  for (int round = 0; round < 50; ++round) {
    const auto corpus = testing::random_corpus(rng, 6, 8);
    auto shuffled = corpus;
    for (auto& t : shuffled) std::shuffle(t.events.begin(), t.events.end(), rng);
    const auto a = score_methods(count_methods(corpus));
    const auto b = score_methods(count_methods(shuffled));
    const auto counts = count_methods(corpus);
    for (std::size_t j = 0; j < a.rows.size(); ++j) {
      EXPECT_EQ(a.rows[j].score, b.rows[j].score);
      if (counts.doc_freq.at(a.rows[j].method) == 1) {
        EXPECT_DOUBLE_EQ(a.rows[j].idf, std::log10(static_cast<double>(corpus.size())));
      }
    }
  }
}

TEST(FilterMethods, ReferencePartition) {
  const auto table = score_methods(count_methods(reference_corpus()));
  const auto r = filter_methods(table, 0.05);
  EXPECT_EQ(r.kept, (std::vector<MethodKey>{m1, m2, m3}));
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].method, m4);
}

TEST(FilterMethods, PartitionHoldsAcrossThresholdRange) {
  const auto table = score_methods(count_methods(reference_corpus()));
  for (double t = 0.001; t <= 0.088; t += 0.001) EXPECT_EQ(filter_methods(table, t).kept.size(), 3u) << t;
  EXPECT_EQ(filter_methods(table, 0.089).kept.size(), 2u);
}

TEST(FilterMethods, ThresholdEdges) {
  const auto table = score_methods(count_methods(reference_corpus()));
  EXPECT_EQ(filter_methods(table, 0.0).kept.size(), 4u);
  EXPECT_THROW(filter_methods(table, -0.1), Error);
  try {
    filter_methods(table, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_result);
  }
  // Ties at the threshold are kept.
  EXPECT_EQ(filter_methods(table, table.find(m2)->score).kept.size(), 3u);
}

TEST(FilterMethods, KeptSetsNest) {
  std::mt19937_64 rng(31);
  for (int round = 0; round < 50; ++round) {
    const auto table = score_methods(count_methods(testing::random_corpus(rng, 6, 8)));
    std::set<MethodKey> previous;
    bool first = true;
    for (double t = 0.0; t < 1.0; t += 0.05) {
      std::set<MethodKey> kept;
      try {
        kept = filter_methods(table, t).kept_set();
      } catch (const Error&) {
      }
      if (!first) {
        EXPECT_TRUE(std::includes(previous.begin(), previous.end(), kept.begin(), kept.end()));
      }
      previous = kept;
      first = false;
    }
  }
}

TEST(ScoreReport, OrderedByScoreThenName) {
  const auto table = score_methods(count_methods(reference_corpus()));
  const auto report = format_score_report(table, filter_methods(table, 0.05));
  const auto ls = text::lines(report);
  ASSERT_EQ(ls.size(), 5u);
  EXPECT_EQ(ls[0], "method\tTrace1\tTrace2\tTrace3\tscore\tkept");
  EXPECT_TRUE(ls[1].starts_with("C.m1()\t"));
  EXPECT_TRUE(ls[2].starts_with("C.m3()\t"));
  EXPECT_TRUE(ls[3].starts_with("C.m2()\t"));
  EXPECT_TRUE(ls[4].starts_with("C.m4()\t"));
  EXPECT_TRUE(ls[4].ends_with("\t0\t0"));
  EXPECT_EQ(report, format_score_report(table, filter_methods(table, 0.05)));
}

}  // namespace
}  // namespace featloc
