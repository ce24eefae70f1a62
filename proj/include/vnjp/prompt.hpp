#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vnjp/bm25.hpp"
#include "vnjp/errors.hpp"

namespace vnjp {

inline constexpr std::string_view final_marker = "FINAL:";

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

/// Single left-to-right pass: placeholders in the template are substituted,
/// placeholder-like text inside substituted values is left alone.
inline std::string render_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string_view, std::string_view>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    bool matched = false;
    for (const auto& [key, value] : values) {
      if (tmpl.substr(open, key.size()) == key) {
        out.append(value);
        pos = open + key.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.append("{{");
      pos = open + 2;
    }
  }
  return out;
}

}  // namespace detail

/// Prompt pieces: a system message, a body with {{demonstrations}} and
/// {{query}} placeholders ending in the FINAL: instruction, and a
/// per-demonstration block with {{src}} and {{tgt}}.
struct PromptTemplate {
  std::string system_text;
  std::string body;
  std::string demo_block;

  /// Default instruction set asking for step-by-step reasoning before the
  /// final translation.
  static PromptTemplate cot_default() {
    PromptTemplate t;
    t.system_text = "You are a careful Vietnamese-to-Japanese translator.";
    t.body =
        "Translate the Vietnamese sentence below into natural Japanese.\n"
        "Work step by step: identify rare or difficult words, decide how to "
        "render each of them, then compose the full sentence.\n"
        "Write out your reasoning. The last line of your reply must be exactly:\n"
        "FINAL: <your Japanese translation>\n\n"
        "{{demonstrations}}"
        "Vietnamese: {{query}}\n";
    t.demo_block = "Vietnamese: {{src}}\nJapanese: {{tgt}}\n\n";
    return t;
  }

  /// Minimal template for cheap baseline translation (no reasoning).
  static PromptTemplate baseline_default() {
    PromptTemplate t;
    t.system_text = "You are a Vietnamese-to-Japanese translator.";
    t.body =
        "Translate the Vietnamese sentence below into Japanese. Reply with a "
        "single line of the form:\n"
        "FINAL: <your Japanese translation>\n\n"
        "{{demonstrations}}"
        "Vietnamese: {{query}}\n";
    t.demo_block = "Vietnamese: {{src}}\nJapanese: {{tgt}}\n\n";
    return t;
  }

  /// Loads the body (and optionally the demonstration block) from UTF-8
  /// files, keeping the built-in defaults for anything not overridden.
  static PromptTemplate load(const std::filesystem::path& body_path,
                             const std::filesystem::path& demo_path = {}) {
    PromptTemplate t = cot_default();
    t.body = detail::read_text_file(body_path);
    if (!demo_path.empty()) t.demo_block = detail::read_text_file(demo_path);
    t.validate();
    return t;
  }

  void validate() const {
    require_exactly_one(body, "{{demonstrations}}");
    require_exactly_one(body, "{{query}}");
    if (detail::count_occurrences(body, final_marker) != 1) {
      throw TemplateError("prompt template must contain exactly one FINAL: instruction");
    }
    if (demo_block.find("{{src}}") == std::string::npos) {
      throw TemplateError("demonstration template missing placeholder {{src}}");
    }
    if (demo_block.find("{{tgt}}") == std::string::npos) {
      throw TemplateError("demonstration template missing placeholder {{tgt}}");
    }
  }

 private:
  static void require_exactly_one(std::string_view text, std::string_view placeholder) {
    const std::size_t n = detail::count_occurrences(text, placeholder);
    if (n == 0) {
      throw TemplateError("prompt template missing placeholder " + std::string(placeholder));
    }
    if (n > 1) {
      throw TemplateError("prompt template must contain exactly one " +
                          std::string(placeholder));
    }
  }
};

/// Fully assembled prompt. `render()` is a pure function of the fields and
/// contains exactly one query block and one FINAL: instruction.
struct PromptBundle {
  std::string system_text;
  std::vector<std::pair<std::string, std::string>> demonstrations;  // rank order
  std::string query_vi;
  std::string user_text;

  std::string render() const {
    if (system_text.empty()) return user_text;
    return system_text + "\n\n" + user_text;
  }
};

/// Builds the prompt for one query with up to three retrieved
/// demonstrations, in the given rank order.
inline PromptBundle assemble_prompt(std::string_view query_vi,
                                    const std::vector<RetrievedExample>& examples,
                                    const PromptTemplate& tmpl) {
  if (examples.size() > 3) {
    throw IntegrityError("at most 3 demonstrations per prompt");
  }
  tmpl.validate();
  PromptBundle bundle;
  bundle.system_text = tmpl.system_text;
  bundle.query_vi = std::string(query_vi);
  std::string demos;
  for (const RetrievedExample& e : examples) {
    bundle.demonstrations.emplace_back(e.source_vi, e.target_ja);
    demos += detail::render_template(tmpl.demo_block,
                                     {{"{{src}}", e.source_vi}, {"{{tgt}}", e.target_ja}});
  }
  bundle.user_text = detail::render_template(
      tmpl.body, {{"{{demonstrations}}", demos}, {"{{query}}", bundle.query_vi}});
  return bundle;
}

/// Text after the last FINAL: marker, trimmed, with multi-line tails joined
/// by single spaces. Raises ExtractionError (carrying the raw output) when
/// the marker is absent or the tail is empty.
inline std::string extract_final_translation(std::string_view raw_output) {
  const std::size_t pos = raw_output.rfind(final_marker);
  if (pos == std::string_view::npos) {
    throw ExtractionError("no FINAL: marker in backend output", std::string(raw_output));
  }
  std::string_view tail = raw_output.substr(pos + final_marker.size());
  std::string joined;
  std::size_t start = 0;
  while (start <= tail.size()) {
    std::size_t end = tail.find('\n', start);
    if (end == std::string_view::npos) end = tail.size();
    std::string_view line = tail.substr(start, end - start);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) {
      line.remove_prefix(1);
    }
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
      line.remove_suffix(1);
    }
    if (!line.empty()) {
      if (!joined.empty()) joined += ' ';
      joined.append(line);
    }
    if (end == tail.size()) break;
    start = end + 1;
  }
  if (joined.empty()) {
    throw ExtractionError("empty translation after FINAL: marker", std::string(raw_output));
  }
  return joined;
}

}  // namespace vnjp
