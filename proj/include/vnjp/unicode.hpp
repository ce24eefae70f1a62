#pragma once

#include <string>
#include <string_view>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/uscript.h>

#include "vnjp/errors.hpp"

namespace vnjp::uni {

/// Strict UTF-8 decoder. Rejects truncated sequences, overlong encodings,
/// surrogates and code points above U+10FFFF.
inline std::u32string decode_utf8(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const unsigned char b0 = static_cast<unsigned char>(bytes[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw DecodeError(i);
    }
    if (i + len > bytes.size()) throw DecodeError(i);
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char bk = static_cast<unsigned char>(bytes[i + k]);
      if ((bk & 0xC0) != 0x80) throw DecodeError(i + k);
      cp = (cp << 6) | (bk & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw DecodeError(i);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size() * 3);
  for (const char32_t cp : cps) append_utf8(out, cp);
  return out;
}

inline bool is_space(char32_t c) {
  return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0;
}

inline bool is_combining(char32_t c) {
  const int8_t t = u_charType(static_cast<UChar32>(c));
  return t == U_NON_SPACING_MARK || t == U_COMBINING_SPACING_MARK ||
         t == U_ENCLOSING_MARK;
}

/// Letters in the tokenizer sense: general category L* plus letter numbers
/// (Nl covers ideographs such as U+3007).
inline bool is_letter(char32_t c) {
  const int8_t t = u_charType(static_cast<UChar32>(c));
  return (U_MASK(t) & U_GC_L_MASK) != 0 || t == U_LETTER_NUMBER;
}

inline bool is_digit(char32_t c) {
  return u_charType(static_cast<UChar32>(c)) == U_DECIMAL_DIGIT_NUMBER;
}

/// Script classes used for Japanese run segmentation. Everything outside the
/// four named scripts falls into `other` and still forms word runs.
enum class Script { han, hiragana, katakana, latin, other };

inline Script script_of(char32_t c) {
  // Marks whose Unicode script is Common but that belong to exactly one of
  // the Japanese scripts by script extension.
  switch (c) {
    case 0x30FC:  // prolonged sound mark
    case 0x30FD:  // katakana iteration marks
    case 0x30FE:
      return Script::katakana;
    case 0x309D:  // hiragana iteration marks
    case 0x309E:
      return Script::hiragana;
    case 0x3005:  // ideographic iteration mark
    case 0x3007:  // ideographic zero
    case 0x303B:  // vertical ideographic iteration mark
      return Script::han;
    default:
      break;
  }
  UErrorCode ec = U_ZERO_ERROR;
  switch (uscript_getScript(static_cast<UChar32>(c), &ec)) {
    case USCRIPT_HAN:
      return Script::han;
    case USCRIPT_HIRAGANA:
      return Script::hiragana;
    case USCRIPT_KATAKANA:
      return Script::katakana;
    case USCRIPT_LATIN:
      return Script::latin;
    default:
      return Script::other;
  }
}

/// NFKC normalization combined with full Unicode case folding (the NFKC
/// Casefold transform). Idempotent. Input must be valid UTF-8.
inline std::string nfkc_casefold(std::string_view utf8) {
  UErrorCode ec = U_ZERO_ERROR;
  const icu::Normalizer2* nf = icu::Normalizer2::getNFKCCasefoldInstance(ec);
  if (U_FAILURE(ec) || nf == nullptr) {
    throw Error("ICU NFKC_Casefold normalizer unavailable");
  }
  const icu::UnicodeString src =
      icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  const icu::UnicodeString dst = nf->normalize(src, ec);
  if (U_FAILURE(ec)) throw Error("Unicode normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

}  // namespace vnjp::uni
