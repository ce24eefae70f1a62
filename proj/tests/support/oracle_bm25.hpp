#pragma once

// Brute-force Okapi BM25 oracle. No index: document frequencies come from
// scanning every document per term and scores are recomputed from the
// formula on demand. Takes pre-tokenized documents and queries so it stays
// independent of the tokenizer under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

struct OracleDoc {
  std::uint64_t id = 0;
  std::vector<std::string> tokens;
};

struct OracleHit {
  std::uint64_t id = 0;
  double score = 0.0;
};

inline std::vector<std::string> distinct_in_order(const std::vector<std::string>& terms) {
  std::vector<std::string> distinct;
  for (const std::string& t : terms) {
    if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) {
      distinct.push_back(t);
    }
  }
  return distinct;
}

inline int term_frequency(const OracleDoc& doc, const std::string& term) {
  int tf = 0;
  for (const std::string& t : doc.tokens) {
    if (t == term) ++tf;
  }
  return tf;
}

inline double average_doc_length(const std::vector<OracleDoc>& docs) {
  unsigned long long total = 0;
  for (const OracleDoc& d : docs) total += d.tokens.size();
  return static_cast<double>(total) / static_cast<double>(docs.size());
}

inline double oracle_idf(const std::vector<OracleDoc>& docs, const std::string& term) {
  std::uint64_t df = 0;
  for (const OracleDoc& d : docs) {
    if (term_frequency(d, term) > 0) ++df;
  }
  const double n = static_cast<double>(docs.size());
  return std::log((n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5) +
                  1.0);
}

// Distinct query terms are visited in first-occurrence order and their
// contributions accumulated in that order, mirroring the summation order
// of the implementation under test.
inline double oracle_score(const std::vector<OracleDoc>& docs, const OracleDoc& doc,
                           const std::vector<std::string>& query_terms, double k1,
                           double b) {
  const double avgdl = average_doc_length(docs);
  double score = 0.0;
  for (const std::string& term : distinct_in_order(query_terms)) {
    const int tf = term_frequency(doc, term);
    if (tf == 0) continue;
    const double tfd = static_cast<double>(tf);
    const double len = static_cast<double>(doc.tokens.size());
    const double wtf = (tfd * (k1 + 1.0)) / (tfd + k1 * (1.0 - b + b * len / avgdl));
    score += wtf * oracle_idf(docs, term);
  }
  return score;
}

inline std::vector<OracleHit> oracle_top_k(const std::vector<OracleDoc>& docs,
                                           const std::vector<std::string>& query_terms,
                                           std::size_t k, double k1, double b,
                                           const std::vector<std::uint64_t>& exclude = {}) {
  std::vector<OracleHit> hits;
  for (const OracleDoc& doc : docs) {
    if (std::find(exclude.begin(), exclude.end(), doc.id) != exclude.end()) continue;
    bool shares_term = false;
    for (const std::string& term : query_terms) {
      if (term_frequency(doc, term) > 0) {
        shares_term = true;
        break;
      }
    }
    if (!shares_term) continue;
    hits.push_back({doc.id, oracle_score(docs, doc, query_terms, k1, b)});
  }
  std::stable_sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b2) {
    if (a.score != b2.score) return a.score > b2.score;
    return a.id < b2.id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

}  // namespace oracle
