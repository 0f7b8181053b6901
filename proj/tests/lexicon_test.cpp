#include <random>

#include <gtest/gtest.h>

#include "featloc/lexicon.hpp"
#include "test_support.hpp"

namespace featloc {
namespace {

using Terms = std::vector<std::string>;

TEST(PorterStemmer, MatchesReferenceVocabulary) {
  // Frozen from nltk's ORIGINAL_ALGORITHM mode, see tests/oracles/porter_oracle.py.
  const auto content = text::read_file(std::filesystem::path(FEATLOC_TEST_DATA_DIR) / "porter_oracle.tsv");
  std::size_t checked = 0;
  for (const auto& line : text::lines(content)) {
    const auto f = text::split(line, '\t');
    ASSERT_EQ(f.size(), 2u);
    EXPECT_EQ(PorterStemmer::stem(f[0]), f[1]) << f[0];
    ++checked;
  }
  EXPECT_GT(checked, 8000u);
}

TEST(PorterStemmer, ShortWordsUntouched) {
  EXPECT_EQ(PorterStemmer::stem("as"), "as");
  EXPECT_EQ(PorterStemmer::stem("x"), "x");
}

TEST(SplitIdentifier, NamingConventions) {
  EXPECT_EQ(split_identifier("DrawingEditor"), (Terms{"Drawing", "Editor"}));
  EXPECT_EQ(split_identifier("m_figureCount2"), (Terms{"m", "figure", "Count"}));
  EXPECT_EQ(split_identifier("XMLParser"), (Terms{"XML", "Parser"}));
  EXPECT_EQ(split_identifier("Graphics2D"), (Terms{"Graphics", "D"}));
  EXPECT_EQ(split_identifier("draw the ellipse"), (Terms{"draw", "the", "ellipse"}));
  EXPECT_TRUE(split_identifier("").empty());
}

TEST(Tokenize, ReferenceExamples) {
  EXPECT_EQ(tokenize("DrawingEditor"), (Terms{"draw", "editor"}));
  EXPECT_EQ(tokenize("m_figureCount2"), (Terms{"figur", "count"}));
  EXPECT_TRUE(tokenize("if").empty());
  EXPECT_TRUE(tokenize("if the").empty());
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Tokenize, PreservesMultiplicity) {
  EXPECT_EQ(tokenize("figure figureFigure"), (Terms{"figur", "figur", "figur"}));
}

TEST(Tokenize, OutputInvariants) {
  const auto lists = StopLists::defaults();
  for (const auto& t : tokenize("The quick drawingEditor draws RectangleFigure objects; undo changes "
                                "for(int i=0;i<n;i++) the XMLParser reads URLs connectionFigures")) {
    EXPECT_GE(t.size(), 2u);
    for (char c : t) EXPECT_TRUE(std::islower(static_cast<unsigned char>(c))) << t;
    EXPECT_FALSE(lists.keywords.contains(t));
    EXPECT_FALSE(lists.stop_words.contains(t));
    EXPECT_EQ(tokenize(t), Terms{t}) << "stemmed term should be a fixed point: " << t;
  }
}

TEST(Tokenize, CustomStopLists) {
  StopLists lists;
  lists.stop_words = {"figure"};
  const Tokenizer tok(lists);
  EXPECT_EQ(tok("drawFigure if"), (Terms{"draw", "if"}));
}

constexpr std::string_view kFacts =
    "# demo facts\n"
    "C\tAbstractFigure\t\tFigure\t\n"
    "C\tEllipseFigure\tAbstractFigure\tFigure,Serializable\tfDisplayBox,fillColor\n"
    "C\tRectangleFigure\tAbstractFigure\t\t\n"
    "M\tEllipseFigure.draw(Graphics2D)\tGraphics2D\tvoid\t\tdraws the ellipse figure\n"
    "M\tRectangleFigure.drawFigure(Graphics2D)\tGraphics2D\tvoid\t\tdraw the rectangle\n"
    "M\tRectangleFigure.basicDisplayBox(Point,Point)\tPoint origin,Point corner\n";

TEST(Facts, ParseAndLookup) {
  const auto store = parse_facts(kFacts, "facts");
  const auto* m = store.find_method(MethodKey::parse("EllipseFigure.draw(Graphics2D)"));
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(m->comment_terms, (Terms{"draws", "the", "ellipse", "figure"}));
  EXPECT_EQ(m->return_type, "void");
  const auto* c = store.find_class("EllipseFigure");
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->inherits_from, std::optional<std::string>("AbstractFigure"));
  EXPECT_EQ(c->implements_to, (Terms{"Figure", "Serializable"}));
  EXPECT_EQ(c->variables, (Terms{"fDisplayBox", "fillColor"}));
  EXPECT_FALSE(store.find_class("AbstractFigure")->inherits_from.has_value());
  EXPECT_EQ(store.find_method(MethodKey::parse("RectangleFigure.basicDisplayBox(Point,Point)"))->arguments,
            (Terms{"Point origin", "Point corner"}));
}

TEST(Facts, SnapshotRoundTrip) {
  const auto store = parse_facts(kFacts, "facts");
  const auto snap = serialize_facts(store);
  const auto again = parse_facts(snap, "snapshot");
  EXPECT_EQ(serialize_facts(again), snap);
  EXPECT_EQ(again.methods().size(), 3u);
}

TEST(Facts, Errors) {
  EXPECT_THROW(parse_facts("C\tA\nC\tA\n", "f"), Error);
  EXPECT_THROW(parse_facts("C\tA\nM\tA.f()\nM\tA.f()\n", "f"), Error);
  try {
    parse_facts("C\tA\nM\tB.f()\nM\tZ.g()\n", "f");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::structural);
    EXPECT_NE(std::string(e.what()).find("B.f()"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("Z.g()"), std::string::npos);
  }
  EXPECT_THROW(parse_facts("Q\tA\n", "f"), Error);
  EXPECT_TRUE(parse_facts("", "empty").empty());
}

TEST(MethodTermVector, RectangleExample) {
  const auto store = parse_facts(kFacts, "facts");
  const auto* m = store.find_method(MethodKey::parse("RectangleFigure.drawFigure(Graphics2D)"));
  const auto v = method_term_vector(*m, *store.find_class("RectangleFigure"));
  const TermCounts expect{{"draw", 2}, {"figur", 2}, {"rectangl", 2}, {"graphic", 1}};
  EXPECT_EQ(v, expect);
}

TEST(MethodTermVector, NameAndClassOnly) {
  const auto store = parse_facts("C\tUndoManager\nM\tUndoManager.undo()\n", "f");
  const auto v = method_term_vector(store.methods().begin()->second, *store.find_class("UndoManager"));
  EXPECT_EQ(v, (TermCounts{{"manag", 1}, {"undo", 2}}));
}

TEST(MethodTermVector, ClassDetailsBehindFlag) {
  const auto store = parse_facts(kFacts, "facts");
  const auto* m = store.find_method(MethodKey::parse("EllipseFigure.draw(Graphics2D)"));
  const auto* c = store.find_class("EllipseFigure");
  const auto plain = method_term_vector(*m, *c);
  const auto detailed = method_term_vector(*m, *c, Tokenizer{}, TermOptions{true});
  EXPECT_FALSE(plain.contains("serializ"));
  EXPECT_TRUE(detailed.contains("serializ"));
  EXPECT_TRUE(detailed.contains("abstract") == false);  // "abstract" is a keyword
  EXPECT_EQ(detailed.at("color"), 1u);
}

TEST(MethodTermVector, SameClassSharesClassTerms) {
  const auto store = parse_facts(kFacts, "facts");
  const auto* c = store.find_class("RectangleFigure");
  const auto a = method_term_vector(*store.find_method(MethodKey::parse("RectangleFigure.drawFigure(Graphics2D)")), *c);
  const auto b = method_term_vector(
      *store.find_method(MethodKey::parse("RectangleFigure.basicDisplayBox(Point,Point)")), *c);
  EXPECT_GE(a.at("rectangl"), 1u);
  EXPECT_GE(b.at("rectangl"), 1u);
  EXPECT_GE(b.at("figur"), 1u);
}

TEST(TermDictionary, ContiguousIdsAndStableSerialization) {
  const TermDictionary d(std::set<std::string>{"undo", "draw", "figur"});
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(*d.id("draw"), 0u);
  EXPECT_EQ(*d.id("undo"), 2u);
  EXPECT_FALSE(d.id("nope").has_value());
  const auto again = TermDictionary::parse(d.serialize());
  EXPECT_EQ(again, d);
  EXPECT_EQ(again.serialize(), d.serialize());
  EXPECT_EQ(again.fingerprint(), d.fingerprint());
  EXPECT_NE(TermDictionary(std::set<std::string>{"draw"}).fingerprint(), d.fingerprint());
}

FactsStore tiny_store() {
  return parse_facts(
      "C\tShape\n"
      "M\tShape.draw()\t\t\t\tfigure\n"
      "M\tShape.undo()\t\t\t\tchange\n"
      "M\tShape.util()\n",
      "tiny");
}

TEST(BuildMatrix, SingleMethodTrace) {
  const auto store = parse_facts("C\tFigure\nM\tFigure.draw()\n", "f");
  const std::vector<Trace> corpus{testing::make_trace("T1", {"Figure.draw()", "Figure.draw()"})};
  const auto mx = build_matrix(corpus, {MethodKey::parse("Figure.draw()")}, store).matrix;
  ASSERT_EQ(mx.rows.size(), 1u);
  EXPECT_EQ(format_matrix(mx), "1\ndraw:1 figur:1\n");
}

TEST(BuildMatrix, SharedMethodContributesEqually) {
  const auto store = tiny_store();
  const std::vector<Trace> corpus{testing::make_trace("T1", {"Shape.draw()"}),
                                  testing::make_trace("T2", {"Shape.draw()", "Shape.undo()"})};
  const std::set<MethodKey> kept{MethodKey::parse("Shape.draw()"), MethodKey::parse("Shape.undo()")};
  const auto mx = build_matrix(corpus, kept, store).matrix;
  const auto dense = TraceIdentifierMatrix::densify(mx.rows, mx.vocab_size());
  const auto draw = *mx.dictionary.id("draw");
  EXPECT_EQ(dense[0][draw], dense[1][draw]);
  EXPECT_EQ(dense[0][*mx.dictionary.id("undo")], 0u);
  EXPECT_EQ(dense[1][*mx.dictionary.id("undo")], 1u);
}

TEST(BuildMatrix, FilteredAndUnresolvableMethodsSkipped) {
  const auto store = tiny_store();
  const std::vector<Trace> corpus{testing::make_trace("T1", {"Shape.draw()", "Shape.util()", "Ghost.run()"})};
  const std::set<MethodKey> kept{MethodKey::parse("Shape.draw()"), MethodKey::parse("Ghost.run()")};
  const auto built = build_matrix(corpus, kept, store);
  EXPECT_EQ(built.matrix.methods, (std::vector<MethodKey>{MethodKey::parse("Shape.draw()")}));
  ASSERT_EQ(built.warnings.size(), 1u);
  EXPECT_NE(built.warnings[0].find("Ghost.run()"), std::string::npos);
  EXPECT_FALSE(built.matrix.dictionary.id("util").has_value());
}

TEST(BuildMatrix, Errors) {
  const auto store = tiny_store();
  const std::vector<Trace> corpus{testing::make_trace("T1", {"Shape.draw()"}),
                                  testing::make_trace("Lonely", {"Shape.util()"})};
  try {
    build_matrix(corpus, {MethodKey::parse("Shape.draw()")}, store);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("Lonely"), std::string::npos);
  }
  EXPECT_THROW(build_matrix(corpus, {}, store), Error);
  EXPECT_THROW(build_matrix(corpus, {MethodKey::parse("Shape.draw()")}, FactsStore{}), Error);
}

// Brute-force dense product of the two factors.
std::vector<std::vector<std::uint32_t>> dense_product(const TraceIdentifierMatrix& mx) {
  const auto a = mx.dense_trace_method();
  const auto b = TraceIdentifierMatrix::densify(mx.method_terms, mx.vocab_size());
  std::vector<std::vector<std::uint32_t>> c(a.size(), std::vector<std::uint32_t>(mx.vocab_size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < mx.vocab_size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

TEST(BuildMatrix, HandComputedProduct) {
  const auto store = parse_facts(
      "C\tA\nC\tB\n"
      "M\tA.drawShape()\t\t\t\tredraw\n"
      "M\tA.undo()\n"
      "M\tB.moveShape()\n",
      "f");
  const std::vector<Trace> corpus{testing::make_trace("T1", {"A.drawShape()", "A.undo()"}),
                                  testing::make_trace("T2", {"B.moveShape()", "A.drawShape()", "A.drawShape()"}),
                                  testing::make_trace("T3", {"A.undo()", "B.moveShape()"})};
  std::set<MethodKey> kept;
  for (const auto& [k, m] : store.methods()) kept.insert(k);
  const auto mx = build_matrix(corpus, kept, store).matrix;
  // vocabulary: move redraw shape undo (A and B are single letters, dropped)
  EXPECT_EQ(mx.dictionary.terms(), (Terms{"draw", "move", "redraw", "shape", "undo"}));
  const std::vector<std::vector<std::uint32_t>> expect{
      {1, 0, 1, 1, 1},
      {1, 1, 1, 2, 0},
      {0, 1, 0, 1, 1},
  };
  EXPECT_EQ(TraceIdentifierMatrix::densify(mx.rows, mx.vocab_size()), expect);
  EXPECT_EQ(dense_product(mx), expect);
}

TEST(BuildMatrix, RandomInstancesMatchDenseProduct) {
  std::mt19937_64 rng(41);
  for (int round = 0; round < 100; ++round) {
    const auto in = testing::random_matrix_instance(rng);
    const auto mx = build_matrix(in.corpus, in.kept, in.store).matrix;
    EXPECT_EQ(TraceIdentifierMatrix::densify(mx.rows, mx.vocab_size()), dense_product(mx));
    EXPECT_EQ(testing::named_rows(mx), testing::oracle_matrix(in));
    for (const auto& row : mx.dense_trace_method())
      for (auto cell : row) EXPECT_LE(cell, 1u);
  }
}

TEST(BuildMatrix, AddingMethodAddsItsVector) {
  const auto store = tiny_store();
  const std::set<MethodKey> kept{MethodKey::parse("Shape.draw()"), MethodKey::parse("Shape.undo()")};
  const std::vector<Trace> before{testing::make_trace("T1", {"Shape.draw()"}),
                                  testing::make_trace("T2", {"Shape.undo()"})};
  const std::vector<Trace> after{testing::make_trace("T1", {"Shape.draw()", "Shape.undo()"}),
                                 testing::make_trace("T2", {"Shape.undo()"})};
  const auto a = build_matrix(before, kept, store).matrix;
  const auto b = build_matrix(after, kept, store).matrix;
  ASSERT_EQ(a.dictionary, b.dictionary);
  const auto da = TraceIdentifierMatrix::densify(a.rows, a.vocab_size());
  const auto db = TraceIdentifierMatrix::densify(b.rows, b.vocab_size());
  const auto undo_vec = TraceIdentifierMatrix::densify(a.method_terms, a.vocab_size())[1];
  for (std::size_t v = 0; v < a.vocab_size(); ++v) EXPECT_EQ(db[0][v], da[0][v] + undo_vec[v]);
}

TEST(BuildMatrix, RemovingFilteredMethodLeavesOtherColumns) {
  const auto store = tiny_store();
  const std::vector<Trace> corpus{testing::make_trace("T1", {"Shape.draw()", "Shape.undo()", "Shape.util()"})};
  const std::set<MethodKey> all{MethodKey::parse("Shape.draw()"), MethodKey::parse("Shape.undo()"),
                                MethodKey::parse("Shape.util()")};
  const std::set<MethodKey> fewer{MethodKey::parse("Shape.draw()"), MethodKey::parse("Shape.undo()")};
  const auto a = build_matrix(corpus, all, store).matrix;
  const auto b = build_matrix(corpus, fewer, store).matrix;
  for (std::size_t m = 0; m < b.methods.size(); ++m) {
    TermCounts ta, tb;
    for (const auto& tc : a.method_terms[m]) ta[a.dictionary.term(tc.term)] = tc.count;
    for (const auto& tc : b.method_terms[m]) tb[b.dictionary.term(tc.term)] = tc.count;
    EXPECT_EQ(a.methods[m], b.methods[m]);
    EXPECT_EQ(ta, tb);
  }
}

TEST(MatrixExport, ParseReassemblesAndChecksProduct) {
  const auto store = tiny_store();
  const std::vector<Trace> corpus{testing::make_trace("T1", {"Shape.draw()"}),
                                  testing::make_trace("T2", {"Shape.draw()", "Shape.undo()"})};
  const std::set<MethodKey> kept{MethodKey::parse("Shape.draw()"), MethodKey::parse("Shape.undo()")};
  const auto mx = build_matrix(corpus, kept, store).matrix;
  const auto again = parse_matrix(mx.dictionary.serialize(), format_trace_method(mx), format_method_terms(mx),
                                  format_matrix(mx));
  EXPECT_EQ(again.rows, mx.rows);
  EXPECT_EQ(again.trace_ids, mx.trace_ids);
  EXPECT_EQ(again.methods, mx.methods);
  EXPECT_EQ(format_matrix(again), format_matrix(mx));
  EXPECT_EQ(text::lines(format_matrix(mx))[0], "2");

  auto tampered = format_matrix(mx);
  tampered.replace(tampered.find("draw:1"), 6, "draw:5");
  EXPECT_THROW(parse_matrix(mx.dictionary.serialize(), format_trace_method(mx), format_method_terms(mx), tampered),
               Error);
}

}  // namespace
}  // namespace featloc
