#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vnjp/errors.hpp"
#include "vnjp/text.hpp"

namespace vnjp {

enum class BleuSmoothing { none, add_one_clipped };

inline std::string_view to_string(BleuSmoothing s) {
  return s == BleuSmoothing::none ? "none" : "add_one_clipped";
}

inline BleuSmoothing bleu_smoothing_from_string(std::string_view s) {
  if (s == "none") return BleuSmoothing::none;
  if (s == "add_one_clipped") return BleuSmoothing::add_one_clipped;
  throw ConfigError("unknown smoothing '" + std::string(s) +
                    "' (expected none or add_one_clipped)");
}

enum class BleuTokenization { word, character };

inline std::string_view to_string(BleuTokenization t) {
  return t == BleuTokenization::word ? "word" : "character";
}

inline BleuTokenization bleu_tokenization_from_string(std::string_view s) {
  if (s == "word") return BleuTokenization::word;
  if (s == "character" || s == "char") return BleuTokenization::character;
  throw ConfigError("unknown BLEU tokenization '" + std::string(s) +
                    "' (expected word or character)");
}

/// Corpus BLEU result. `precisions` are the effective values used for the
/// score (after smoothing), so bleu is always reconstructible from the
/// report: brevity_penalty * exp(mean of ln p_n), or 0 when some p_n is 0.
struct BleuReport {
  double bleu = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::uint64_t hyp_length = 0;
  std::uint64_t ref_length = 0;
  bool smoothed = false;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["bleu"] = bleu;
    j["precisions"] = precisions;
    j["brevity_penalty"] = brevity_penalty;
    j["hyp_length"] = hyp_length;
    j["ref_length"] = ref_length;
    j["smoothed"] = smoothed;
    return j;
  }

  /// One line, scores scaled x100 for display.
  std::string summary() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "BLEU = %.2f (p1/p2/p3/p4 = %.1f/%.1f/%.1f/%.1f, BP = %.3f, "
                  "hyp/ref = %llu/%llu)",
                  bleu * 100.0, precisions[0] * 100.0, precisions[1] * 100.0,
                  precisions[2] * 100.0, precisions[3] * 100.0, brevity_penalty,
                  static_cast<unsigned long long>(hyp_length),
                  static_cast<unsigned long long>(ref_length));
    return buf;
  }
};

/// All contiguous n-grams with multiplicity. Keys join token texts with the
/// US control byte, which cannot occur inside a token.
inline std::unordered_map<std::string, std::uint32_t> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  if (n < 1 || n > 4) throw ConfigError("ngram order must be in [1, 4]");
  std::unordered_map<std::string, std::uint32_t> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < static_cast<std::size_t>(n); ++j) {
      key += '\x1F';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

inline std::unordered_map<std::string, std::uint32_t> ngram_counts(const TokenSeq& tokens,
                                                                   int n) {
  std::vector<std::string> texts;
  texts.reserve(tokens.size());
  for (const Token& t : tokens) texts.push_back(t.text);
  return ngram_counts(texts, n);
}

struct PrecisionCounts {
  std::uint64_t clipped = 0;
  std::uint64_t total = 0;
};

/// Corpus sums of reference-clipped hypothesis n-gram counts (single
/// reference per segment).
inline PrecisionCounts modified_precision(const std::vector<std::vector<std::string>>& hypotheses,
                                          const std::vector<std::vector<std::string>>& references,
                                          int n) {
  if (hypotheses.size() != references.size()) {
    throw IntegrityError("hypothesis/reference count mismatch: " +
                         std::to_string(hypotheses.size()) + " vs " +
                         std::to_string(references.size()));
  }
  if (hypotheses.empty()) throw IntegrityError("no segments to score");
  PrecisionCounts counts;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp_ngrams = ngram_counts(hypotheses[s], n);
    const auto ref_ngrams = ngram_counts(references[s], n);
    for (const auto& [gram, count] : hyp_ngrams) {
      counts.total += count;
      const auto it = ref_ngrams.find(gram);
      if (it != ref_ngrams.end()) {
        counts.clipped += std::min(count, it->second);
      }
    }
  }
  return counts;
}

/// 1 when the hypothesis side is at least as long as the reference side,
/// exp(1 - ref/hyp) when shorter, 0 for an empty hypothesis side.
inline double brevity_penalty(std::uint64_t hyp_length, std::uint64_t ref_length) {
  if (ref_length == 0) throw IntegrityError("reference length must be >= 1");
  if (hyp_length == 0) return 0.0;
  if (hyp_length >= ref_length) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_length) / static_cast<double>(hyp_length));
}

/// Corpus BLEU: geometric mean of clipped n-gram precisions (orders 1-4)
/// times the brevity penalty. Inputs are normalized and tokenized with the
/// language's tokenizer, punct tokens included; `character` mode scores
/// code points instead. An order with no hypothesis n-grams at all (every
/// segment shorter than n) counts as precision 1, which keeps
/// identical-input corpora at exactly 1.0. add_one_clipped replaces a zero
/// clipped count with 1/(total+1) for orders >= 2, for sentence-level use.
inline BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                              const std::vector<std::string>& references, Side language,
                              BleuSmoothing smoothing = BleuSmoothing::none,
                              BleuTokenization tokenization = BleuTokenization::word) {
  if (hypotheses.empty()) throw IntegrityError("no segments to score");
  if (hypotheses.size() != references.size()) {
    throw IntegrityError("hypothesis/reference count mismatch: " +
                         std::to_string(hypotheses.size()) + " vs " +
                         std::to_string(references.size()));
  }
  auto to_tokens = [&](const std::string& text) {
    const std::string norm = normalize_text(text);
    const TokenSeq seq =
        tokenization == BleuTokenization::word ? tokenize(norm, language) : tokenize_chars(norm);
    std::vector<std::string> texts;
    texts.reserve(seq.size());
    for (const Token& t : seq) texts.push_back(t.text);
    return texts;
  };
  std::vector<std::vector<std::string>> hyp_tokens, ref_tokens;
  hyp_tokens.reserve(hypotheses.size());
  ref_tokens.reserve(references.size());
  for (const std::string& h : hypotheses) hyp_tokens.push_back(to_tokens(h));
  for (const std::string& r : references) ref_tokens.push_back(to_tokens(r));

  BleuReport report;
  report.smoothed = smoothing != BleuSmoothing::none;
  for (const auto& t : hyp_tokens) report.hyp_length += t.size();
  for (const auto& t : ref_tokens) report.ref_length += t.size();
  if (report.ref_length == 0) {
    throw IntegrityError("references contain no tokens");
  }

  for (int n = 1; n <= 4; ++n) {
    PrecisionCounts counts = modified_precision(hyp_tokens, ref_tokens, n);
    if (smoothing == BleuSmoothing::add_one_clipped && n >= 2 && counts.clipped == 0) {
      counts.clipped += 1;
      counts.total += 1;
    }
    double p;
    if (counts.total == 0) {
      p = 1.0;  // no n-grams of this order exist to get wrong
    } else {
      p = static_cast<double>(counts.clipped) / static_cast<double>(counts.total);
    }
    report.precisions[static_cast<std::size_t>(n - 1)] = p;
  }

  report.brevity_penalty = brevity_penalty(report.hyp_length, report.ref_length);
  bool any_zero = false;
  double log_sum = 0.0;
  for (const double p : report.precisions) {
    if (p <= 0.0) {
      any_zero = true;
      break;
    }
    log_sum += std::log(p);
  }
  report.bleu = any_zero ? 0.0 : report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

}  // namespace vnjp
