#pragma once

// Identifier and comment tokenizer: splits on naming-convention boundaries,
// lowercases, drops keywords / stop words / one-letter tokens, and stems.

#include <cctype>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "featloc/porter_stemmer.hpp"
#include "featloc/text.hpp"

namespace featloc {

struct StopLists {
  std::set<std::string, std::less<>> keywords;
  std::set<std::string, std::less<>> stop_words;

  /// Java keywords and literals.
  static std::set<std::string, std::less<>> java_keywords() {
    return {"abstract", "assert",     "boolean",   "break",     "byte",      "case",
            "catch",    "char",       "class",     "const",     "continue",  "default",
            "do",       "double",     "else",      "enum",      "extends",   "final",
            "finally",  "float",      "for",       "goto",      "if",        "implements",
            "import",   "instanceof", "int",       "interface", "long",      "native",
            "new",      "package",    "private",   "protected", "public",    "return",
            "short",    "static",     "strictfp",  "super",     "switch",    "synchronized",
            "this",     "throw",      "throws",    "transient", "try",       "void",
            "volatile", "while",      "true",      "false",     "null",      "var"};
  }

  static std::set<std::string, std::less<>> english_stop_words() {
    return {"a",       "about",   "above",  "after",   "again",   "against", "all",    "am",
            "an",      "and",     "any",    "are",     "as",      "at",      "be",     "because",
            "been",    "before",  "being",  "below",   "between", "both",    "but",    "by",
            "can",     "could",   "did",    "does",    "doing",   "down",    "during", "each",
            "few",     "from",    "further", "had",    "has",     "have",    "having", "he",
            "her",     "here",    "hers",   "herself", "him",     "himself", "his",    "how",
            "i",       "in",      "into",   "is",      "it",      "its",     "itself", "just",
            "me",      "more",    "most",   "my",      "myself",  "no",      "nor",    "not",
            "now",     "of",      "off",    "on",      "once",    "only",    "or",     "other",
            "ought",   "our",     "ours",   "ourselves", "out",   "over",    "own",    "same",
            "she",     "should",  "so",     "some",    "such",    "than",    "that",   "the",
            "their",   "theirs",  "them",   "themselves", "then", "there",   "these",  "they",
            "those",   "through", "to",     "too",     "under",   "until",   "up",     "very",
            "was",     "we",      "were",   "what",    "when",    "where",   "which",  "who",
            "whom",    "why",     "will",   "with",    "would",   "you",     "your",   "yours",
            "yourself", "yourselves", "also", "may",   "must",    "shall",   "get",    "set",
            "used",    "use",     "uses",   "via",     "etc",     "eg",      "ie"};
  }

  static StopLists defaults() { return {java_keywords(), english_stop_words()}; }

  /// One word per line; '#' starts a comment line.
  static std::set<std::string, std::less<>> load(const std::filesystem::path& path) {
    std::set<std::string, std::less<>> out;
    for (const auto& raw : text::lines(text::read_file(path))) {
      const auto w = text::trim(raw);
      if (w.empty() || w.front() == '#') continue;
      std::string lower(w);
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.insert(std::move(lower));
    }
    return out;
  }
};

/// Splits an identifier or phrase into raw words without filtering:
/// non-alphanumerics and digits separate words, and camel-case humps start
/// new words ("XMLParser" -> "XML", "Parser").
inline std::vector<std::string> split_identifier(std::string_view raw) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  const auto is_upper = [](char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; };
  const auto is_lower = [](char c) { return std::islower(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (!std::isalpha(static_cast<unsigned char>(c))) {
      flush();
      continue;
    }
    if (is_upper(c) && !cur.empty()) {
      const char prev = cur.back();
      const bool next_lower = i + 1 < raw.size() && is_lower(raw[i + 1]);
      if (is_lower(prev) || (is_upper(prev) && next_lower)) flush();
    }
    cur += c;
  }
  flush();
  return words;
}

class Tokenizer {
 public:
  Tokenizer() : lists_(StopLists::defaults()) {}
  explicit Tokenizer(StopLists lists) : lists_(std::move(lists)) {}

  /// Terms in input order, multiplicity preserved.
  std::vector<std::string> operator()(std::string_view raw) const {
    std::vector<std::string> out;
    for (auto& word : split_identifier(raw)) {
      for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (word.size() < 2 || rejected(word)) continue;
      auto term = PorterStemmer::stem(word);
      if (term.size() < 2 || rejected(term)) continue;
      out.push_back(std::move(term));
    }
    return out;
  }

  const StopLists& lists() const noexcept { return lists_; }

 private:
  bool rejected(std::string_view w) const {
    return lists_.keywords.contains(w) || lists_.stop_words.contains(w);
  }

  StopLists lists_;
};

/// Tokenizes with the default stop lists.
inline std::vector<std::string> tokenize(std::string_view raw) {
  static const Tokenizer tokenizer;
  return tokenizer(raw);
}

}  // namespace featloc
