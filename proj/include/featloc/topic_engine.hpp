#pragma once

// LDA fitted by collapsed Gibbs sampling.
//
// Each token's topic is resampled from
//   p(z = k | rest) ∝ (n_dk + alpha) (n_kw + beta) / (n_k + V beta)
// and the point estimates from the final sample are
//   theta_dk = (n_dk + alpha) / (n_d + K alpha)
//   phi_kw   = (n_kw + beta)  / (n_k + V beta).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "featloc/dense_matrix.hpp"
#include "featloc/error.hpp"
#include "featloc/lexicon.hpp"
#include "featloc/random.hpp"
#include "featloc/text.hpp"

namespace featloc {

struct LdaConfig {
  std::size_t topics = 30;
  std::optional<double> alpha;  // defaults to 50 / topics
  double beta = 0.1;
  std::size_t iterations = 1000;
  std::uint64_t seed = 1;
  std::size_t top_n = 5;
  std::size_t likelihood_interval = 50;  // 0 disables tracking

  double resolved_alpha() const { return alpha.value_or(50.0 / static_cast<double>(topics)); }

  void validate() const {
    if (topics < 1) throw Error(ErrorKind::parameter, "lda: topic count must be >= 1");
    if (alpha && !(*alpha > 0.0)) throw Error(ErrorKind::parameter, "lda: alpha must be > 0");
    if (!(beta > 0.0)) throw Error(ErrorKind::parameter, "lda: beta must be > 0");
    if (iterations < 1) throw Error(ErrorKind::parameter, "lda: iterations must be >= 1");
    if (top_n < 1) throw Error(ErrorKind::parameter, "lda: top_n must be >= 1");
  }
};

/// Token-level view of a document-term matrix: each term id repeated
/// `count` times, ascending term id within a document.
inline std::vector<std::vector<std::uint32_t>> materialize_tokens(std::span<const SparseRow> rows) {
  std::vector<std::vector<std::uint32_t>> docs;
  docs.reserve(rows.size());
  for (const auto& row : rows) {
    auto& doc = docs.emplace_back();
    for (const auto& tc : row) doc.insert(doc.end(), tc.count, tc.term);
  }
  return docs;
}

struct TopicModel {
  std::size_t topics = 0;
  std::size_t vocab_size = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::string dictionary_fingerprint;

  DenseMatrix<double> theta;  // D x K
  DenseMatrix<double> phi;    // K x V

  // Sampler state at the final sweep. Empty for models loaded from disk.
  std::vector<std::vector<std::uint32_t>> tokens;
  std::vector<std::vector<std::uint32_t>> assignments;
  std::vector<std::pair<std::size_t, double>> log_likelihood;  // (sweep, value)
  std::vector<std::string> warnings;

  std::size_t num_docs() const noexcept { return theta.rows(); }
};

class GibbsSampler {
 public:
  GibbsSampler(std::span<const SparseRow> rows, std::size_t vocab_size, const LdaConfig& cfg)
      : topics_(cfg.topics),
        vocab_(vocab_size),
        alpha_(cfg.resolved_alpha()),
        beta_(cfg.beta),
        rng_(cfg.seed),
        tokens_(materialize_tokens(rows)),
        n_dk_(tokens_.size(), topics_),
        n_kw_(topics_, vocab_),
        n_k_(topics_, 0),
        weights_(topics_) {
    assignments_.resize(tokens_.size());
    for (std::size_t d = 0; d < tokens_.size(); ++d) {
      assignments_[d].resize(tokens_[d].size());
      for (std::size_t i = 0; i < tokens_[d].size(); ++i) {
        const auto k = static_cast<std::uint32_t>(rng_.below(topics_));
        assignments_[d][i] = k;
        ++n_dk_(d, k);
        ++n_kw_(k, tokens_[d][i]);
        ++n_k_[k];
      }
    }
  }

  /// One full pass over every token in document order.
  void sweep() {
    const double v_beta = static_cast<double>(vocab_) * beta_;
    for (std::size_t d = 0; d < tokens_.size(); ++d) {
      for (std::size_t i = 0; i < tokens_[d].size(); ++i) {
        const auto w = tokens_[d][i];
        auto k = assignments_[d][i];
        --n_dk_(d, k);
        --n_kw_(k, w);
        --n_k_[k];

        double total = 0.0;
        for (std::size_t t = 0; t < topics_; ++t) {
          total += (n_dk_(d, t) + alpha_) * (n_kw_(t, w) + beta_) / (n_k_[t] + v_beta);
          weights_[t] = total;
        }
        const double u = rng_.uniform() * total;
        k = static_cast<std::uint32_t>(
            std::upper_bound(weights_.begin(), weights_.end(), u) - weights_.begin());
        if (k >= topics_) k = static_cast<std::uint32_t>(topics_ - 1);

        assignments_[d][i] = k;
        ++n_dk_(d, k);
        ++n_kw_(k, w);
        ++n_k_[k];
      }
    }
  }

  DenseMatrix<double> theta() const {
    DenseMatrix<double> out(tokens_.size(), topics_);
    const double k_alpha = static_cast<double>(topics_) * alpha_;
    for (std::size_t d = 0; d < tokens_.size(); ++d)
      for (std::size_t k = 0; k < topics_; ++k)
        out(d, k) = (n_dk_(d, k) + alpha_) / (static_cast<double>(tokens_[d].size()) + k_alpha);
    return out;
  }

  DenseMatrix<double> phi() const {
    DenseMatrix<double> out(topics_, vocab_);
    const double v_beta = static_cast<double>(vocab_) * beta_;
    for (std::size_t k = 0; k < topics_; ++k)
      for (std::size_t w = 0; w < vocab_; ++w)
        out(k, w) = (n_kw_(k, w) + beta_) / (n_k_[k] + v_beta);
    return out;
  }

  /// sum_d sum_i log sum_k theta_dk phi_kw under the current estimates.
  double log_likelihood() const {
    const auto th = theta();
    const auto ph = phi();
    double ll = 0.0;
    for (std::size_t d = 0; d < tokens_.size(); ++d)
      for (auto w : tokens_[d]) {
        double p = 0.0;
        for (std::size_t k = 0; k < topics_; ++k) p += th(d, k) * ph(k, w);
        ll += std::log(p);
      }
    return ll;
  }

  const std::vector<std::vector<std::uint32_t>>& tokens() const noexcept { return tokens_; }
  const std::vector<std::vector<std::uint32_t>>& assignments() const noexcept { return assignments_; }
  const DenseMatrix<std::uint32_t>& doc_topic_counts() const noexcept { return n_dk_; }
  const DenseMatrix<std::uint32_t>& topic_word_counts() const noexcept { return n_kw_; }
  const std::vector<std::uint32_t>& topic_totals() const noexcept { return n_k_; }

 private:
  std::size_t topics_;
  std::size_t vocab_;
  double alpha_;
  double beta_;
  Rng rng_;
  std::vector<std::vector<std::uint32_t>> tokens_;
  std::vector<std::vector<std::uint32_t>> assignments_;
  DenseMatrix<std::uint32_t> n_dk_;
  DenseMatrix<std::uint32_t> n_kw_;
  std::vector<std::uint32_t> n_k_;
  std::vector<double> weights_;
};

inline TopicModel fit(std::span<const SparseRow> rows, std::size_t vocab_size, const LdaConfig& cfg) {
  cfg.validate();
  if (rows.empty()) throw Error(ErrorKind::parameter, "lda: corpus has no documents");
  if (vocab_size == 0) throw Error(ErrorKind::parameter, "lda: vocabulary is empty");
  std::uint64_t total = 0;
  for (std::size_t d = 0; d < rows.size(); ++d) {
    if (rows[d].empty()) throw Error(ErrorKind::parameter, fmt::format("lda: document {} is empty", d));
    for (const auto& tc : rows[d]) {
      if (tc.term >= vocab_size) throw Error(ErrorKind::parameter, "lda: term id out of range");
      total += tc.count;
    }
  }

  TopicModel model;
  if (cfg.topics > total)
    model.warnings.push_back(
        fmt::format("topic count {} exceeds token count {}; some topics stay empty", cfg.topics, total));

  GibbsSampler sampler(rows, vocab_size, cfg);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    sampler.sweep();
    if (cfg.likelihood_interval && it % cfg.likelihood_interval == 0)
      model.log_likelihood.emplace_back(it, sampler.log_likelihood());
  }

  model.topics = cfg.topics;
  model.vocab_size = vocab_size;
  model.alpha = cfg.resolved_alpha();
  model.beta = cfg.beta;
  model.seed = cfg.seed;
  model.iterations = cfg.iterations;
  model.theta = sampler.theta();
  model.phi = sampler.phi();
  model.tokens = sampler.tokens();
  model.assignments = sampler.assignments();
  return model;
}

inline TopicModel fit(const TraceIdentifierMatrix& matrix, const LdaConfig& cfg) {
  auto model = fit(matrix.rows, matrix.vocab_size(), cfg);
  model.dictionary_fingerprint = matrix.dictionary.fingerprint();
  return model;
}

struct WeightedTerm {
  std::string term;
  double probability = 0.0;

  friend bool operator==(const WeightedTerm&, const WeightedTerm&) = default;
};

/// Top `n` terms per topic by descending phi, ties broken by term text.
inline std::vector<std::vector<WeightedTerm>> top_words(const TopicModel& model,
                                                        const TermDictionary& dict, std::size_t n) {
  if (n > model.vocab_size)
    throw Error(ErrorKind::parameter, fmt::format("top_words: n={} exceeds vocabulary {}", n, model.vocab_size));
  std::vector<std::vector<WeightedTerm>> out;
  for (std::size_t k = 0; k < model.topics; ++k) {
    std::vector<std::uint32_t> ids(model.vocab_size);
    for (std::uint32_t w = 0; w < ids.size(); ++w) ids[w] = w;
    const auto row = model.phi.row(k);
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                      [&](auto a, auto b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return dict.term(a) < dict.term(b);
                      });
    auto& topic = out.emplace_back();
    for (std::size_t i = 0; i < n; ++i) topic.push_back({dict.term(ids[i]), row[ids[i]]});
  }
  return out;
}

namespace detail {

inline std::string format_dense(const DenseMatrix<double>& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += '\t';
      out += text::number(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline std::string model_header(const TopicModel& m, std::string_view which) {
  return fmt::format("# {} K={} V={} D={} alpha={} beta={} seed={} iterations={} dictionary={}\n",
                     which, m.topics, m.vocab_size, m.num_docs(), text::number(m.alpha),
                     text::number(m.beta), m.seed, m.iterations, m.dictionary_fingerprint);
}

}  // namespace detail

inline std::string format_theta(const TopicModel& m) {
  return detail::model_header(m, "theta") + detail::format_dense(m.theta);
}

inline std::string format_phi(const TopicModel& m) {
  return detail::model_header(m, "phi") + detail::format_dense(m.phi);
}

inline std::string format_top_words(const std::vector<std::vector<WeightedTerm>>& topics) {
  std::string out = "topic\trank\tterm\tprobability\n";
  for (std::size_t k = 0; k < topics.size(); ++k)
    for (std::size_t r = 0; r < topics[k].size(); ++r)
      out += fmt::format("{}\t{}\t{}\t{}\n", k, r + 1, topics[k][r].term,
                         text::number(topics[k][r].probability));
  return out;
}

/// Per document, `term_id:topic` for every token.
inline std::string format_assignments(const TopicModel& m) {
  std::string out;
  for (std::size_t d = 0; d < m.tokens.size(); ++d) {
    for (std::size_t i = 0; i < m.tokens[d].size(); ++i)
      out += fmt::format("{}{}:{}", i ? " " : "", m.tokens[d][i], m.assignments[d][i]);
    out += '\n';
  }
  return out;
}

namespace detail {

struct ParsedDense {
  std::map<std::string, std::string> header;
  DenseMatrix<double> values;
};

inline ParsedDense parse_dense(std::string_view content, std::string_view what) {
  const auto ls = text::lines(content);
  if (ls.empty() || !ls[0].starts_with("# "))
    throw Error(ErrorKind::parse, fmt::format("{}: missing header", what));
  ParsedDense out;
  for (const auto& tok : text::split_ws(ls[0].substr(2))) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) out.header[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    auto& row = rows.emplace_back();
    for (const auto& f : text::split(ls[i], '\t')) row.push_back(text::parse_double(f, what));
    if (row.size() != rows.front().size()) throw Error(ErrorKind::parse, fmt::format("{}: ragged row", what));
  }
  out.values = DenseMatrix<double>(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) out.values(r, c) = rows[r][c];
  return out;
}

inline const std::string& header_field(const ParsedDense& p, const std::string& key, std::string_view what) {
  auto it = p.header.find(key);
  if (it == p.header.end()) throw Error(ErrorKind::parse, fmt::format("{}: header lacks {}", what, key));
  return it->second;
}

}  // namespace detail

/// Reloads theta and phi artifacts; the two headers must agree.
inline TopicModel parse_model(std::string_view theta, std::string_view phi) {
  const auto th = detail::parse_dense(theta, "theta");
  const auto ph = detail::parse_dense(phi, "phi");
  for (const auto* key : {"K", "V", "D", "alpha", "beta", "seed", "iterations", "dictionary"})
    if (detail::header_field(th, key, "theta") != detail::header_field(ph, key, "phi"))
      throw Error(ErrorKind::stale_artifact, fmt::format("theta and phi disagree on {}", key));

  TopicModel m;
  m.topics = static_cast<std::size_t>(text::parse_int(detail::header_field(th, "K", "theta"), "K"));
  m.vocab_size = static_cast<std::size_t>(text::parse_int(detail::header_field(th, "V", "theta"), "V"));
  const auto docs = static_cast<std::size_t>(text::parse_int(detail::header_field(th, "D", "theta"), "D"));
  m.alpha = text::parse_double(detail::header_field(th, "alpha", "theta"), "alpha");
  m.beta = text::parse_double(detail::header_field(th, "beta", "theta"), "beta");
  m.seed = static_cast<std::uint64_t>(std::stoull(detail::header_field(th, "seed", "theta")));
  m.iterations = static_cast<std::size_t>(text::parse_int(detail::header_field(th, "iterations", "theta"), "iterations"));
  m.dictionary_fingerprint = detail::header_field(th, "dictionary", "theta");
  m.theta = th.values;
  m.phi = ph.values;
  if (m.theta.rows() != docs || m.theta.cols() != m.topics || m.phi.rows() != m.topics ||
      m.phi.cols() != m.vocab_size)
    throw Error(ErrorKind::parse, "model: matrix shape disagrees with header");
  return m;
}

}  // namespace featloc
