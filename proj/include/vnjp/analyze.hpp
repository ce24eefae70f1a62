#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vnjp/corpus.hpp"
#include "vnjp/text.hpp"

namespace vnjp {

/// Corpus-wide token counts on one language side. Word and digit tokens
/// only; punct tokens never enter the table.
struct FrequencyTable {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t total_tokens = 0;
  Side side = Side::ja;

  std::uint64_t frequency(const std::string& token) const {
    const auto it = counts.find(token);
    return it == counts.end() ? 0 : it->second;
  }
};

/// Counts every word/digit token occurrence on the chosen side (token
/// frequency, not document frequency).
inline FrequencyTable build_frequency_table(
    const ParallelCorpus& corpus, Side side,
    AnalysisTokenizer mode = AnalysisTokenizer::script_words) {
  FrequencyTable table;
  table.side = side;
  for (const SentencePair& p : corpus.pairs) {
    for (std::string& t : analysis_tokens(side_text(p, side), side, mode)) {
      ++table.counts[std::move(t)];
      ++table.total_tokens;
    }
  }
  return table;
}

/// Result of the threshold search, kept in full for the audit trail.
struct ThresholdReport {
  std::uint64_t threshold = 0;
  double flagged_fraction = 0.0;
  double target_fraction = 0.0;
  std::vector<std::pair<std::uint64_t, double>> candidate_fractions;  // ascending T

  json to_json() const {
    json j;
    j["threshold"] = threshold;
    j["flagged_fraction"] = flagged_fraction;
    j["target_fraction"] = target_fraction;
    json cand = json::object();
    for (const auto& [t, f] : candidate_fractions) cand[std::to_string(t)] = f;
    j["candidate_fractions"] = cand;
    return j;
  }
};

/// Picks the frequency threshold whose captured-sentence fraction is closest
/// to the target. A sentence is captured by candidate T when it contains at
/// least one word/digit token with corpus frequency below T. Candidates are
/// 0 plus every distinct frequency value + 1; ties resolve to the smaller T.
inline ThresholdReport select_threshold(
    const FrequencyTable& table, const ParallelCorpus& corpus,
    double target_fraction = 0.15,
    AnalysisTokenizer mode = AnalysisTokenizer::script_words) {
  if (corpus.pairs.empty()) throw IntegrityError("select_threshold: empty corpus");
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw ConfigError("target_fraction must be in (0,1)");
  }

  // Minimum token frequency per sentence; sentences without countable
  // tokens are never captured.
  std::vector<std::uint64_t> min_freq;
  min_freq.reserve(corpus.pairs.size());
  for (const SentencePair& p : corpus.pairs) {
    std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
    for (const std::string& t : analysis_tokens(side_text(p, table.side), table.side, mode)) {
      m = std::min(m, table.frequency(t));
    }
    min_freq.push_back(m);
  }
  std::sort(min_freq.begin(), min_freq.end());

  std::set<std::uint64_t> candidates{0};
  for (const auto& [token, freq] : table.counts) candidates.insert(freq + 1);

  ThresholdReport report;
  report.target_fraction = target_fraction;
  const double n = static_cast<double>(corpus.pairs.size());
  double best_distance = std::numeric_limits<double>::infinity();
  double previous_fraction = -1.0;
  for (const std::uint64_t t : candidates) {
    const auto captured =
        std::lower_bound(min_freq.begin(), min_freq.end(), t) - min_freq.begin();
    const double fraction = static_cast<double>(captured) / n;
    if (fraction < previous_fraction) {
      throw IntegrityError("flagged fraction not monotonic in threshold");
    }
    previous_fraction = fraction;
    report.candidate_fractions.emplace_back(t, fraction);
    const double distance = std::abs(fraction - target_fraction);
    if (distance < best_distance) {
      best_distance = distance;
      report.threshold = t;
      report.flagged_fraction = fraction;
    }
  }
  return report;
}

/// Copy of the corpus with `flagged` set on every pair whose table-side
/// text contains a word/digit token with frequency below the threshold.
/// Nothing else changes.
inline ParallelCorpus flag_sentences(
    const ParallelCorpus& corpus, const FrequencyTable& table, std::uint64_t threshold,
    AnalysisTokenizer mode = AnalysisTokenizer::script_words) {
  ParallelCorpus out = corpus;
  for (SentencePair& p : out.pairs) {
    bool flag = false;
    for (const std::string& t : analysis_tokens(side_text(p, table.side), table.side, mode)) {
      if (table.frequency(t) < threshold) {
        flag = true;
        break;
      }
    }
    p.flagged = flag;
  }
  return out;
}

/// Sentence-length histogram: a sentence with n tokens (all tags counted)
/// lands in bucket floor(n / bucket_width).
struct Histogram {
  std::uint64_t bucket_width = 5;
  std::map<std::uint64_t, std::uint64_t> buckets;  // bucket index -> sentences
  Side side = Side::ja;

  std::string to_csv() const {
    std::string out = "bucket_start,count\n";
    for (const auto& [index, count] : buckets) {
      out += std::to_string(index * bucket_width);
      out += ',';
      out += std::to_string(count);
      out += '\n';
    }
    return out;
  }
};

inline Histogram token_count_histogram(const ParallelCorpus& corpus, Side side,
                                       std::uint64_t bucket_width = 5) {
  if (bucket_width < 1) throw ConfigError("bucket_width must be >= 1");
  Histogram h;
  h.bucket_width = bucket_width;
  h.side = side;
  for (const SentencePair& p : corpus.pairs) {
    const std::uint64_t tokens = tokenize(side_text(p, side), side).size();
    ++h.buckets[tokens / bucket_width];
  }
  return h;
}

}  // namespace vnjp
