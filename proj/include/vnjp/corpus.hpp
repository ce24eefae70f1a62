#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "vnjp/errors.hpp"
#include "vnjp/text.hpp"

namespace vnjp {

using json = nlohmann::ordered_json;

enum class Provenance { baseline, synthetic_t1, synthetic_t2 };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::baseline:
      return "baseline";
    case Provenance::synthetic_t1:
      return "synthetic_t1";
    case Provenance::synthetic_t2:
      return "synthetic_t2";
  }
  return "baseline";
}

inline Provenance provenance_from_string(std::string_view s) {
  if (s == "baseline") return Provenance::baseline;
  if (s == "synthetic_t1") return Provenance::synthetic_t1;
  if (s == "synthetic_t2") return Provenance::synthetic_t2;
  throw ParseError("unknown provenance '" + std::string(s) + "'");
}

/// One aligned sentence pair. The Japanese side may be absent only before
/// baseline translation; synthetic pairs always carry a target.
struct SentencePair {
  std::uint64_t id = 0;
  std::string source_vi;
  std::optional<std::string> target_ja;
  Provenance provenance = Provenance::baseline;
  bool flagged = false;

  bool operator==(const SentencePair&) const = default;
};

/// Ordered, immutable-by-convention collection of pairs. Metadata records
/// where the corpus came from; it is not persisted by the file formats.
struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::map<std::string, std::string> metadata;

  std::uint64_t max_id() const {
    std::uint64_t m = 0;
    for (const SentencePair& p : pairs) m = std::max(m, p.id);
    return m;
  }
};

/// Returns the requested side of a pair; a missing Japanese side is an
/// integrity error naming the pair.
inline const std::string& side_text(const SentencePair& p, Side side) {
  if (side == Side::vi) return p.source_vi;
  if (!p.target_ja) {
    throw IntegrityError("pair " + std::to_string(p.id) + ": missing Japanese side");
  }
  return *p.target_ja;
}

/// Checks the corpus invariants: unique ids, non-empty sources, targets
/// present on synthetic pairs.
inline void validate_corpus(const ParallelCorpus& corpus) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(corpus.pairs.size());
  for (const SentencePair& p : corpus.pairs) {
    if (!seen.insert(p.id).second) {
      throw IntegrityError("duplicate pair id " + std::to_string(p.id));
    }
    if (p.source_vi.empty()) {
      throw IntegrityError("pair " + std::to_string(p.id) + ": empty source text");
    }
    if (p.provenance != Provenance::baseline && !p.target_ja) {
      throw IntegrityError("pair " + std::to_string(p.id) +
                           ": synthetic provenance without target");
    }
  }
}

enum class CorpusFormat { tsv, jsonl };

inline std::string_view to_string(CorpusFormat f) {
  return f == CorpusFormat::tsv ? "tsv" : "jsonl";
}

inline CorpusFormat corpus_format_from_string(std::string_view s) {
  if (s == "tsv") return CorpusFormat::tsv;
  if (s == "jsonl") return CorpusFormat::jsonl;
  throw ConfigError("unknown corpus format '" + std::string(s) + "'");
}

/// Picks the format from the file extension: .tsv is TSV, anything else JSONL.
inline CorpusFormat corpus_format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? CorpusFormat::tsv : CorpusFormat::jsonl;
}

namespace detail {

inline std::string line_prefix(std::size_t line_no) {
  return "line " + std::to_string(line_no) + ": ";
}

inline std::string normalize_field(std::string_view raw, std::size_t line_no) {
  try {
    return normalize_text(raw);
  } catch (const DecodeError& e) {
    throw ParseError(line_prefix(line_no) + e.what());
  }
}

inline SentencePair parse_tsv_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      fields.push_back(std::string_view(line).substr(start, i - start));
      start = i + 1;
    }
  }
  if (fields.size() != 3) {
    throw ParseError(line_prefix(line_no) + "expected 3 tab-separated fields, got " +
                     std::to_string(fields.size()));
  }
  SentencePair p;
  const std::string_view id_field = fields[0];
  const auto [ptr, ec] =
      std::from_chars(id_field.data(), id_field.data() + id_field.size(), p.id);
  if (ec != std::errc() || ptr != id_field.data() + id_field.size() || id_field.empty()) {
    throw ParseError(line_prefix(line_no) + "invalid id '" + std::string(id_field) + "'");
  }
  p.source_vi = normalize_field(fields[1], line_no);
  if (p.source_vi.empty()) {
    throw ParseError(line_prefix(line_no) + "empty source text");
  }
  if (!fields[2].empty()) {
    p.target_ja = normalize_field(fields[2], line_no);
  }
  return p;
}

inline SentencePair parse_jsonl_record(const std::string& line, std::size_t line_no,
                                       std::uint64_t& next_auto_id) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_prefix(line_no) + e.what());
  }
  if (!rec.is_object()) {
    throw ParseError(line_prefix(line_no) + "record is not a JSON object");
  }
  SentencePair p;
  if (rec.contains("id")) {
    if (!rec["id"].is_number_unsigned()) {
      throw ParseError(line_prefix(line_no) + "'id' must be a non-negative integer");
    }
    p.id = rec["id"].get<std::uint64_t>();
  } else {
    p.id = next_auto_id++;
  }
  if (!rec.contains("vi") || !rec["vi"].is_string()) {
    throw ParseError(line_prefix(line_no) + "missing string field 'vi'");
  }
  p.source_vi = normalize_field(rec["vi"].get<std::string>(), line_no);
  if (p.source_vi.empty()) {
    throw ParseError(line_prefix(line_no) + "empty source text");
  }
  if (rec.contains("ja") && !rec["ja"].is_null()) {
    if (!rec["ja"].is_string()) {
      throw ParseError(line_prefix(line_no) + "'ja' must be a string or null");
    }
    p.target_ja = normalize_field(rec["ja"].get<std::string>(), line_no);
  }
  if (rec.contains("provenance")) {
    if (!rec["provenance"].is_string()) {
      throw ParseError(line_prefix(line_no) + "'provenance' must be a string");
    }
    try {
      p.provenance = provenance_from_string(rec["provenance"].get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(line_prefix(line_no) + e.what());
    }
  }
  if (rec.contains("flagged")) {
    if (!rec["flagged"].is_boolean()) {
      throw ParseError(line_prefix(line_no) + "'flagged' must be a boolean");
    }
    p.flagged = rec["flagged"].get<bool>();
  }
  return p;
}

}  // namespace detail

/// Loads a corpus from TSV (`id<TAB>vi<TAB>ja`) or JSONL (objects with keys
/// id, vi, ja, provenance, flagged). Text fields are normalized on the way
/// in. JSONL records without an id get sequential ids starting at 0.
inline ParallelCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  ParallelCorpus corpus;
  corpus.metadata["source_file"] = path.string();
  corpus.metadata["format"] = std::string(to_string(format));
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t next_auto_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (format == CorpusFormat::tsv) {
      corpus.pairs.push_back(detail::parse_tsv_record(line, line_no));
    } else {
      corpus.pairs.push_back(detail::parse_jsonl_record(line, line_no, next_auto_id));
    }
  }
  validate_corpus(corpus);
  return corpus;
}

inline ParallelCorpus load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, corpus_format_for_path(path));
}

/// Writes a corpus deterministically: fixed field order, LF endings, one
/// trailing newline. TSV keeps only id/vi/ja; JSONL keeps all pair fields.
inline void save_corpus(const ParallelCorpus& corpus, const std::filesystem::path& path,
                        CorpusFormat format) {
  validate_corpus(corpus);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const SentencePair& p : corpus.pairs) {
    if (format == CorpusFormat::tsv) {
      out << p.id << '\t' << p.source_vi << '\t' << (p.target_ja ? *p.target_ja : "")
          << '\n';
    } else {
      json rec;
      rec["id"] = p.id;
      rec["vi"] = p.source_vi;
      rec["ja"] = p.target_ja ? json(*p.target_ja) : json(nullptr);
      rec["provenance"] = std::string(to_string(p.provenance));
      rec["flagged"] = p.flagged;
      out << rec.dump() << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline void save_corpus(const ParallelCorpus& corpus, const std::filesystem::path& path) {
  save_corpus(corpus, path, corpus_format_for_path(path));
}

}  // namespace vnjp
