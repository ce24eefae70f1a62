#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vnjp/errors.hpp"
#include "vnjp/unicode.hpp"

namespace vnjp {

enum class Side { vi, ja };

inline std::string_view to_string(Side s) { return s == Side::vi ? "vi" : "ja"; }

inline Side side_from_string(std::string_view s) {
  if (s == "vi") return Side::vi;
  if (s == "ja") return Side::ja;
  throw ConfigError("unknown language side '" + std::string(s) + "' (expected vi or ja)");
}

enum class TokenTag { word, punct, digit };

struct Token {
  std::string text;  // UTF-8, never empty
  TokenTag tag = TokenTag::word;

  bool operator==(const Token&) const = default;
};

using TokenSeq = std::vector<Token>;

/// Canonical text form used by the whole pipeline: NFKC + full case folding,
/// outer whitespace stripped, inner whitespace runs collapsed to one space.
/// Idempotent. Invalid UTF-8 raises DecodeError with the byte offset.
inline std::string normalize_text(std::string_view raw) {
  uni::decode_utf8(raw);  // validates and locates encoding errors
  const std::string folded = uni::nfkc_casefold(raw);
  const std::u32string cps = uni::decode_utf8(folded);
  std::u32string out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (const char32_t c : cps) {
    if (uni::is_space(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return uni::encode_utf8(out);
}

namespace detail {

inline std::string slice_utf8(const std::u32string& cps, std::size_t begin, std::size_t end) {
  return uni::encode_utf8(std::u32string_view(cps).substr(begin, end - begin));
}

}  // namespace detail

/// Vietnamese tokenizer: maximal letter-or-mark runs (word), maximal decimal
/// digit runs (digit), every other non-space character as its own punct
/// token. Total; whitespace only separates.
inline TokenSeq tokenize_vi(std::string_view text) {
  TokenSeq out;
  const std::u32string cps = uni::decode_utf8(text);
  const std::size_t n = cps.size();
  std::size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i];
    if (uni::is_space(c)) {
      ++i;
      continue;
    }
    if (uni::is_digit(c)) {
      std::size_t j = i + 1;
      while (j < n && uni::is_digit(cps[j])) ++j;
      out.push_back({detail::slice_utf8(cps, i, j), TokenTag::digit});
      i = j;
      continue;
    }
    if (uni::is_letter(c) || uni::is_combining(c)) {
      std::size_t j = i + 1;
      while (j < n && (uni::is_letter(cps[j]) || uni::is_combining(cps[j]))) ++j;
      out.push_back({detail::slice_utf8(cps, i, j), TokenTag::word});
      i = j;
      continue;
    }
    out.push_back({detail::slice_utf8(cps, i, i + 1), TokenTag::punct});
    ++i;
  }
  return out;
}

/// Japanese tokenizer: letters segment into maximal runs of one script class
/// (Han, Hiragana, Katakana, Latin or other); digit runs and single punct
/// characters as in tokenize_vi. Combining marks extend the current run.
/// Concatenating all tokens in order reproduces the input minus whitespace.
inline TokenSeq tokenize_ja(std::string_view text) {
  TokenSeq out;
  const std::u32string cps = uni::decode_utf8(text);
  const std::size_t n = cps.size();
  std::size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i];
    if (uni::is_space(c)) {
      ++i;
      continue;
    }
    if (uni::is_digit(c)) {
      std::size_t j = i + 1;
      while (j < n && uni::is_digit(cps[j])) ++j;
      out.push_back({detail::slice_utf8(cps, i, j), TokenTag::digit});
      i = j;
      continue;
    }
    if (uni::is_letter(c) || uni::is_combining(c)) {
      const uni::Script script = uni::script_of(c);
      std::size_t j = i + 1;
      while (j < n) {
        const char32_t d = cps[j];
        if (uni::is_combining(d)) {
          ++j;
          continue;
        }
        if (!uni::is_letter(d) || uni::script_of(d) != script) break;
        ++j;
      }
      out.push_back({detail::slice_utf8(cps, i, j), TokenTag::word});
      i = j;
      continue;
    }
    out.push_back({detail::slice_utf8(cps, i, i + 1), TokenTag::punct});
    ++i;
  }
  return out;
}

inline TokenSeq tokenize(std::string_view text, Side side) {
  return side == Side::vi ? tokenize_vi(text) : tokenize_ja(text);
}

/// Character tokenizer (for character-level BLEU): every non-space code
/// point is one token.
inline TokenSeq tokenize_chars(std::string_view text) {
  TokenSeq out;
  const std::u32string cps = uni::decode_utf8(text);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (uni::is_space(c)) continue;
    TokenTag tag = TokenTag::punct;
    if (uni::is_digit(c)) {
      tag = TokenTag::digit;
    } else if (uni::is_letter(c) || uni::is_combining(c)) {
      tag = TokenTag::word;
    }
    out.push_back({detail::slice_utf8(cps, i, i + 1), tag});
  }
  return out;
}

/// Token stream variants for frequency analysis and retrieval.
enum class AnalysisTokenizer { script_words, char_bigram };

inline std::string_view to_string(AnalysisTokenizer m) {
  return m == AnalysisTokenizer::script_words ? "script" : "char_bigram";
}

inline AnalysisTokenizer analysis_tokenizer_from_string(std::string_view s) {
  if (s == "script" || s == "words" || s == "word") return AnalysisTokenizer::script_words;
  if (s == "char_bigram") return AnalysisTokenizer::char_bigram;
  throw ConfigError("unknown tokenizer mode '" + std::string(s) +
                    "' (expected script or char_bigram)");
}

/// Word and digit tokens of one sentence as used for counting and indexing.
/// Punct tokens are always excluded. In char_bigram mode each token is
/// replaced by its code point bigrams (single-character tokens kept whole).
inline std::vector<std::string> analysis_tokens(
    std::string_view text, Side side,
    AnalysisTokenizer mode = AnalysisTokenizer::script_words) {
  std::vector<std::string> out;
  for (const Token& t : tokenize(text, side)) {
    if (t.tag == TokenTag::punct) continue;
    if (mode == AnalysisTokenizer::script_words) {
      out.push_back(t.text);
      continue;
    }
    const std::u32string cps = uni::decode_utf8(t.text);
    if (cps.size() < 2) {
      out.push_back(t.text);
      continue;
    }
    for (std::size_t i = 0; i + 1 < cps.size(); ++i) {
      out.push_back(uni::encode_utf8(std::u32string_view(cps).substr(i, 2)));
    }
  }
  return out;
}

}  // namespace vnjp
