#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vnjp/corpus.hpp"
#include "vnjp/text.hpp"

namespace vnjp {

/// One few-shot demonstration returned by retrieval.
struct RetrievedExample {
  std::uint64_t doc_id = 0;
  double score = 0.0;
  std::string source_vi;
  std::string target_ja;
};

/// Okapi BM25 index over the Vietnamese sides of a demonstration pool.
/// Terms are the word/digit tokens of tokenize_vi; document length is the
/// count of those tokens. The idf uses log((N - n + 0.5)/(n + 0.5) + 1),
/// which is positive even for terms present in every document, so any
/// document sharing a term with the query scores above zero.
class Bm25Index {
 public:
  static constexpr double default_k1 = 1.2;
  static constexpr double default_b = 0.75;
  static constexpr int snapshot_version = 1;
  static constexpr const char* snapshot_format = "vnjp-bm25";

  static Bm25Index build(const ParallelCorpus& pool, double k1 = default_k1,
                         double b = default_b) {
    if (pool.pairs.empty()) throw IntegrityError("BM25 pool is empty");
    if (!(k1 >= 0.0)) throw ConfigError("k1 must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("b must be in [0,1]");
    Bm25Index index;
    index.k1_ = k1;
    index.b_ = b;
    for (const SentencePair& p : pool.pairs) {
      Doc doc;
      doc.id = p.id;
      doc.source_vi = p.source_vi;
      doc.target_ja = side_text(p, Side::ja);
      for (const Token& t : tokenize_vi(p.source_vi)) {
        if (t.tag == TokenTag::punct) continue;
        ++doc.term_counts[t.text];
        ++doc.length;
      }
      index.docs_.push_back(std::move(doc));
    }
    index.finish_build();
    return index;
  }

  std::size_t doc_count() const { return docs_.size(); }
  double avgdl() const { return avgdl_; }
  double k1() const { return k1_; }
  double b() const { return b_; }

  std::uint32_t df(const std::string& term) const {
    const auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
  }

  std::uint64_t doc_length(std::uint64_t doc_id) const {
    return docs_[doc_index(doc_id)].length;
  }

  double idf(const std::string& term) const {
    const double n = static_cast<double>(df(term));
    const double N = static_cast<double>(docs_.size());
    return std::log((N - n + 0.5) / (n + 0.5) + 1.0);
  }

  /// BM25 score of one document against a query. Duplicate query terms
  /// contribute once; punct tokens are ignored.
  double score(const TokenSeq& query, std::uint64_t doc_id) const {
    return score_terms(distinct_terms(query), doc_id);
  }

  double score_terms(const std::vector<std::string>& distinct_query_terms,
                     std::uint64_t doc_id) const {
    const Doc& doc = docs_[doc_index(doc_id)];
    double total = 0.0;
    for (const std::string& term : distinct_query_terms) {
      const auto it = doc.term_counts.find(term);
      if (it == doc.term_counts.end()) continue;
      total += term_contribution(term, it->second, doc.length);
    }
    return total;
  }

  /// Top-k retrieval for a raw Vietnamese query. Results are sorted by
  /// score descending with ties broken by ascending doc id; documents that
  /// share no term with the query are omitted, as is `exclude`.
  std::vector<RetrievedExample> top_k(std::string_view query_vi, std::size_t k = 3,
                                      std::optional<std::uint64_t> exclude = std::nullopt) const {
    if (k < 1) throw ConfigError("k must be >= 1");
    const TokenSeq query = tokenize_vi(normalize_text(query_vi));
    const std::vector<std::string> terms = distinct_terms(query);

    std::vector<double> scores(docs_.size(), 0.0);
    std::vector<bool> touched(docs_.size(), false);
    for (const std::string& term : terms) {
      const auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      const double w = idf(term);
      for (const auto& [di, tf] : it->second) {
        scores[di] += weighted_tf(tf, docs_[di].length) * w;
        touched[di] = true;
      }
    }

    std::vector<RetrievedExample> results;
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      if (!touched[i]) continue;  // no shared term, score is exactly zero
      if (exclude && docs_[i].id == *exclude) continue;
      results.push_back({docs_[i].id, scores[i], docs_[i].source_vi, docs_[i].target_ja});
    }
    std::sort(results.begin(), results.end(),
              [](const RetrievedExample& a, const RetrievedExample& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.doc_id < b.doc_id;
              });
    if (results.size() > k) results.resize(k);
    return results;
  }

  /// Distinct word/digit query terms in first-occurrence order.
  static std::vector<std::string> distinct_terms(const TokenSeq& query) {
    std::vector<std::string> terms;
    for (const Token& t : query) {
      if (t.tag == TokenTag::punct) continue;
      if (std::find(terms.begin(), terms.end(), t.text) == terms.end()) {
        terms.push_back(t.text);
      }
    }
    return terms;
  }

  /// Versioned JSON snapshot. Loading rebuilds all derived statistics, so a
  /// snapshot retrieves identically to a fresh build over the same pool.
  void save_snapshot(const std::filesystem::path& path) const {
    json j;
    j["format"] = snapshot_format;
    j["version"] = snapshot_version;
    j["k1"] = k1_;
    j["b"] = b_;
    json docs = json::array();
    for (const Doc& doc : docs_) {
      json d;
      d["id"] = doc.id;
      d["src"] = doc.source_vi;
      d["tgt"] = doc.target_ja;
      std::map<std::string, std::uint32_t> sorted(doc.term_counts.begin(),
                                                  doc.term_counts.end());
      d["terms"] = json(sorted);
      docs.push_back(std::move(d));
    }
    j["docs"] = std::move(docs);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
  }

  static Bm25Index load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != snapshot_format) {
      throw ParseError(path.string() + ": not a BM25 snapshot");
    }
    if (j.value("version", 0) != snapshot_version) {
      throw ParseError(path.string() + ": unsupported snapshot version");
    }
    Bm25Index index;
    index.k1_ = j.at("k1").get<double>();
    index.b_ = j.at("b").get<double>();
    for (const json& d : j.at("docs")) {
      Doc doc;
      doc.id = d.at("id").get<std::uint64_t>();
      doc.source_vi = d.at("src").get<std::string>();
      doc.target_ja = d.at("tgt").get<std::string>();
      for (const auto& [term, count] : d.at("terms").items()) {
        doc.term_counts[term] = count.get<std::uint32_t>();
        doc.length += count.get<std::uint32_t>();
      }
      index.docs_.push_back(std::move(doc));
    }
    if (index.docs_.empty()) throw ParseError(path.string() + ": snapshot has no documents");
    index.finish_build();
    return index;
  }

 private:
  struct Doc {
    std::uint64_t id = 0;
    std::string source_vi;
    std::string target_ja;
    std::unordered_map<std::string, std::uint32_t> term_counts;
    std::uint64_t length = 0;
  };

  std::size_t doc_index(std::uint64_t doc_id) const {
    const auto it = index_of_.find(doc_id);
    if (it == index_of_.end()) {
      throw IntegrityError("unknown doc id " + std::to_string(doc_id));
    }
    return it->second;
  }

  double weighted_tf(std::uint32_t tf, std::uint64_t doc_len) const {
    const double f = static_cast<double>(tf);
    const double norm =
        k1_ * (1.0 - b_ + b_ * static_cast<double>(doc_len) / avgdl_);
    return f * (k1_ + 1.0) / (f + norm);
  }

  double term_contribution(const std::string& term, std::uint32_t tf,
                           std::uint64_t doc_len) const {
    return idf(term) * weighted_tf(tf, doc_len);
  }

  void finish_build() {
    std::uint64_t total_len = 0;
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      const Doc& doc = docs_[i];
      if (!index_of_.emplace(doc.id, i).second) {
        throw IntegrityError("duplicate pool doc id " + std::to_string(doc.id));
      }
      total_len += doc.length;
      for (const auto& [term, count] : doc.term_counts) {
        ++df_[term];
        postings_[term].emplace_back(i, count);
      }
    }
    avgdl_ = static_cast<double>(total_len) / static_cast<double>(docs_.size());
    // Posting lists must run in document order for deterministic scoring.
    for (auto& [term, postings] : postings_) {
      std::sort(postings.begin(), postings.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
    }
  }

  std::vector<Doc> docs_;
  std::unordered_map<std::uint64_t, std::size_t> index_of_;
  std::unordered_map<std::string, std::uint32_t> df_;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::uint32_t>>> postings_;
  double k1_ = default_k1;
  double b_ = default_b;
  double avgdl_ = 0.0;
};

}  // namespace vnjp
