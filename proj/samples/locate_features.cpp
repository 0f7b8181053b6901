// Library walk-through: score and filter trace methods, build the
// trace-identifier matrix, fit topics and ask which topic covers a feature.
//
//   locate_features <trace manifest> <facts file> <query words...>

#include <iostream>

#include "featloc/feature_query.hpp"
#include "featloc/relevance_filter.hpp"
#include "featloc/topic_analysis.hpp"
#include "featloc/topic_engine.hpp"
#include "featloc/trace_corpus.hpp"

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: locate_features <traces.tsv> <facts.tsv> <query...>\n";
    return 2;
  }
  try {
    using namespace featloc;
    const auto sources = read_trace_manifest(argv[1]);
    const auto corpus = ingest_traces(std::span<const TraceSource>(sources), false);

    // Methods present in every trace score 0 and drop out here.
    const auto scores = score_methods(count_methods(corpus));
    const auto filter = filter_methods(scores, 0.01);
    std::cout << filter.kept.size() << " of " << scores.rows.size() << " methods kept\n";

    const auto store = ingest_facts(argv[2]);
    const auto matrix = build_matrix(corpus, filter.kept_set(), store).matrix;

    LdaConfig lda;
    lda.topics = 3;
    lda.alpha = 0.1;
    lda.iterations = 500;
    const auto model = fit(matrix, lda);
    const auto ctm = class_topic_matrix(model, store, matrix);
    const auto index = build_index(model, ctm, store, matrix, 5);

    std::string q;
    for (int i = 3; i < argc; ++i) q += std::string(i > 3 ? " " : "") + argv[i];
    std::cout << format_query_text(query(index, q));
  } catch (const featloc::Error& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(e.kind());
  }
}
