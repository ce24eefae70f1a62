#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vnjp/assemble.hpp"
#include "vnjp/bleu.hpp"
#include "vnjp/errors.hpp"
#include "vnjp/text.hpp"

namespace vnjp {

/// One config file drives every subcommand; defaults here are the
/// module-level defaults. CLI flags override loaded values, and the
/// effective config is echoed into each run manifest.
struct PipelineConfig {
  struct Paths {
    std::string corpus;
    std::string output_dir = "out";
    std::string template_body;   // empty: built-in CoT template
    std::string demo_template;   // empty: built-in demonstration block
    std::string clean_pool;      // empty: pool = non-flagged pairs
    std::string failures = "failures.jsonl";  // relative to output_dir

    bool operator==(const Paths&) const = default;
  } paths;

  struct Analyze {
    double target_fraction = 0.15;
    AnalysisTokenizer tokenizer = AnalysisTokenizer::script_words;
    std::uint64_t histogram_bucket_width = 5;

    bool operator==(const Analyze&) const = default;
  } analyze;

  struct Bm25 {
    double k1 = 1.2;
    double b = 0.75;
    std::uint64_t k = 3;

    bool operator==(const Bm25&) const = default;
  } bm25;

  struct Backend {
    std::string base_url;
    std::string model;
    std::string response_path = "choices.0.message.content";
    std::int64_t max_in_flight = 4;
    std::int64_t retries = 3;
    std::int64_t timeout_ms = 30000;
    std::int64_t max_new_tokens = 1024;

    bool operator==(const Backend&) const = default;
  } backend;

  SplitSpec split;

  struct Bleu {
    Side language = Side::ja;
    BleuSmoothing smoothing = BleuSmoothing::none;
    BleuTokenization tokenization = BleuTokenization::word;

    bool operator==(const Bleu&) const = default;
  } bleu;

  struct Merge {
    bool keep_flagged_baseline = false;

    bool operator==(const Merge&) const = default;
  } merge;

  struct Export {
    std::string instruction = default_export_instruction;

    bool operator==(const Export&) const = default;
  } exp;

  bool operator==(const PipelineConfig&) const = default;

  void validate() const {
    if (!(analyze.target_fraction > 0.0 && analyze.target_fraction < 1.0)) {
      throw ConfigError("analyze.target_fraction must be in (0, 1)");
    }
    if (analyze.histogram_bucket_width < 1) {
      throw ConfigError("analyze.histogram_bucket_width must be >= 1");
    }
    if (!(bm25.k1 >= 0.0)) throw ConfigError("bm25.k1 must be >= 0");
    if (!(bm25.b >= 0.0 && bm25.b <= 1.0)) throw ConfigError("bm25.b must be in [0,1]");
    if (bm25.k < 1) throw ConfigError("bm25.k must be >= 1");
    if (backend.max_in_flight < 1) throw ConfigError("backend.max_in_flight must be >= 1");
    if (backend.retries < 0) throw ConfigError("backend.retries must be >= 0");
    if (backend.timeout_ms < 1) throw ConfigError("backend.timeout_ms must be >= 1");
    if (backend.max_new_tokens < 1) throw ConfigError("backend.max_new_tokens must be >= 1");
    split.validate();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["paths"] = {{"corpus", paths.corpus},
                  {"output_dir", paths.output_dir},
                  {"template", paths.template_body},
                  {"demo_template", paths.demo_template},
                  {"clean_pool", paths.clean_pool},
                  {"failures", paths.failures}};
    j["analyze"] = {{"target_fraction", analyze.target_fraction},
                    {"tokenizer", std::string(to_string(analyze.tokenizer))},
                    {"histogram_bucket_width", analyze.histogram_bucket_width}};
    j["bm25"] = {{"k1", bm25.k1}, {"b", bm25.b}, {"k", bm25.k}};
    j["backend"] = {{"base_url", backend.base_url},
                    {"model", backend.model},
                    {"response_path", backend.response_path},
                    {"max_in_flight", backend.max_in_flight},
                    {"retries", backend.retries},
                    {"timeout_ms", backend.timeout_ms},
                    {"max_new_tokens", backend.max_new_tokens}};
    j["split"] = {
        {"train", split.train}, {"val", split.val}, {"test", split.test}, {"seed", split.seed}};
    j["bleu"] = {{"language", std::string(to_string(bleu.language))},
                 {"smoothing", std::string(to_string(bleu.smoothing))},
                 {"tokenization", std::string(to_string(bleu.tokenization))}};
    j["merge"] = {{"keep_flagged_baseline", merge.keep_flagged_baseline}};
    j["export"] = {{"instruction", exp.instruction}};
    return j;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

struct ConfigValue {
  std::string raw;      // unquoted string contents or the literal text
  bool quoted = false;  // distinguishes "5" from 5
  std::string where;    // "section.key" for error messages

  std::string as_string() const {
    if (!quoted) throw ConfigError(where + ": expected a quoted string");
    return raw;
  }

  bool as_bool() const {
    if (!quoted && raw == "true") return true;
    if (!quoted && raw == "false") return false;
    throw ConfigError(where + ": expected true or false");
  }

  double as_double() const {
    if (quoted) throw ConfigError(where + ": expected a number");
    const char* begin = raw.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + raw.size() || raw.empty()) {
      throw ConfigError(where + ": expected a number");
    }
    return v;
  }

  std::int64_t as_int() const {
    if (quoted) throw ConfigError(where + ": expected an integer");
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
      throw ConfigError(where + ": expected an integer");
    }
    return v;
  }

  std::uint64_t as_uint() const {
    if (quoted) throw ConfigError(where + ": expected a non-negative integer");
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
      throw ConfigError(where + ": expected a non-negative integer");
    }
    return v;
  }
};

inline ConfigValue parse_config_value(std::string_view text, const std::string& where,
                                      std::size_t line_no) {
  ConfigValue value;
  value.where = where;
  text = trim(text);
  if (text.empty()) {
    throw ConfigError("line " + std::to_string(line_no) + ": missing value for " + where);
  }
  if (text.front() == '"') {
    value.quoted = true;
    std::size_t i = 1;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '"') break;
      if (c != '\\') {
        value.raw += c;
        continue;
      }
      if (++i >= text.size()) {
        throw ConfigError("line " + std::to_string(line_no) + ": dangling escape");
      }
      switch (text[i]) {
        case '"': value.raw += '"'; break;
        case '\\': value.raw += '\\'; break;
        case 'n': value.raw += '\n'; break;
        case 't': value.raw += '\t'; break;
        case 'r': value.raw += '\r'; break;
        default:
          throw ConfigError("line " + std::to_string(line_no) + ": unsupported escape \\" +
                            std::string(1, text[i]));
      }
    }
    if (i >= text.size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    }
    std::string_view rest = trim(text.substr(i + 1));
    if (!rest.empty() && rest.front() != '#') {
      throw ConfigError("line " + std::to_string(line_no) + ": trailing text after string");
    }
    return value;
  }
  // Strip a trailing comment from unquoted values.
  const std::size_t hash = text.find('#');
  if (hash != std::string_view::npos) text = trim(text.substr(0, hash));
  value.raw = std::string(text);
  return value;
}

inline void apply_config_entry(PipelineConfig& c, const std::string& section,
                               const std::string& key, const ConfigValue& v) {
  const std::string where = section + "." + key;
  if (section == "paths") {
    if (key == "corpus") c.paths.corpus = v.as_string();
    else if (key == "output_dir") c.paths.output_dir = v.as_string();
    else if (key == "template") c.paths.template_body = v.as_string();
    else if (key == "demo_template") c.paths.demo_template = v.as_string();
    else if (key == "clean_pool") c.paths.clean_pool = v.as_string();
    else if (key == "failures") c.paths.failures = v.as_string();
    else throw ConfigError("unknown config key " + where);
  } else if (section == "analyze") {
    if (key == "target_fraction") c.analyze.target_fraction = v.as_double();
    else if (key == "tokenizer") c.analyze.tokenizer = analysis_tokenizer_from_string(v.as_string());
    else if (key == "histogram_bucket_width") c.analyze.histogram_bucket_width = v.as_uint();
    else throw ConfigError("unknown config key " + where);
  } else if (section == "bm25") {
    if (key == "k1") c.bm25.k1 = v.as_double();
    else if (key == "b") c.bm25.b = v.as_double();
    else if (key == "k") c.bm25.k = v.as_uint();
    else throw ConfigError("unknown config key " + where);
  } else if (section == "backend") {
    if (key == "base_url") c.backend.base_url = v.as_string();
    else if (key == "model") c.backend.model = v.as_string();
    else if (key == "response_path") c.backend.response_path = v.as_string();
    else if (key == "max_in_flight") c.backend.max_in_flight = v.as_int();
    else if (key == "retries") c.backend.retries = v.as_int();
    else if (key == "timeout_ms") c.backend.timeout_ms = v.as_int();
    else if (key == "max_new_tokens") c.backend.max_new_tokens = v.as_int();
    else throw ConfigError("unknown config key " + where);
  } else if (section == "split") {
    if (key == "train") c.split.train = v.as_double();
    else if (key == "val") c.split.val = v.as_double();
    else if (key == "test") c.split.test = v.as_double();
    else if (key == "seed") c.split.seed = v.as_uint();
    else throw ConfigError("unknown config key " + where);
  } else if (section == "bleu") {
    if (key == "language") c.bleu.language = side_from_string(v.as_string());
    else if (key == "smoothing") c.bleu.smoothing = bleu_smoothing_from_string(v.as_string());
    else if (key == "tokenization") {
      c.bleu.tokenization = bleu_tokenization_from_string(v.as_string());
    } else throw ConfigError("unknown config key " + where);
  } else if (section == "merge") {
    if (key == "keep_flagged_baseline") c.merge.keep_flagged_baseline = v.as_bool();
    else throw ConfigError("unknown config key " + where);
  } else if (section == "export") {
    if (key == "instruction") c.exp.instruction = v.as_string();
    else throw ConfigError("unknown config key " + where);
  } else {
    throw ConfigError("unknown config section [" + section + "]");
  }
}

inline std::string quote_toml(std::string_view s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

/// Shortest decimal form that parses back to the same double.
inline std::string toml_number(double v) { return nlohmann::json(v).dump(); }

}  // namespace detail

/// Parses the TOML-subset config format: [section] headers, key = value
/// lines, quoted strings with \" \\ \n \t \r escapes, integers, floats,
/// booleans and # comments. Unknown sections or keys are errors.
inline PipelineConfig parse_config_text(std::string_view text) {
  PipelineConfig config;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = detail::trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      }
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key outside any [section]");
    }
    const detail::ConfigValue value =
        detail::parse_config_value(line.substr(eq + 1), section + "." + key, line_no);
    detail::apply_config_entry(config, section, key, value);
  }
  return config;
}

/// Missing or unreadable config files are usage errors, not data errors.
inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Emits the full config; parse_config_text(to_toml(c)) == c for every c
/// (doubles use shortest round-trip formatting).
inline std::string to_toml(const PipelineConfig& c) {
  std::ostringstream out;
  out << "[paths]\n";
  out << "corpus = " << detail::quote_toml(c.paths.corpus) << "\n";
  out << "output_dir = " << detail::quote_toml(c.paths.output_dir) << "\n";
  out << "template = " << detail::quote_toml(c.paths.template_body) << "\n";
  out << "demo_template = " << detail::quote_toml(c.paths.demo_template) << "\n";
  out << "clean_pool = " << detail::quote_toml(c.paths.clean_pool) << "\n";
  out << "failures = " << detail::quote_toml(c.paths.failures) << "\n";
  out << "\n[analyze]\n";
  out << "target_fraction = " << detail::toml_number(c.analyze.target_fraction) << "\n";
  out << "tokenizer = " << detail::quote_toml(to_string(c.analyze.tokenizer)) << "\n";
  out << "histogram_bucket_width = " << c.analyze.histogram_bucket_width << "\n";
  out << "\n[bm25]\n";
  out << "k1 = " << detail::toml_number(c.bm25.k1) << "\n";
  out << "b = " << detail::toml_number(c.bm25.b) << "\n";
  out << "k = " << c.bm25.k << "\n";
  out << "\n[backend]\n";
  out << "base_url = " << detail::quote_toml(c.backend.base_url) << "\n";
  out << "model = " << detail::quote_toml(c.backend.model) << "\n";
  out << "response_path = " << detail::quote_toml(c.backend.response_path) << "\n";
  out << "max_in_flight = " << c.backend.max_in_flight << "\n";
  out << "retries = " << c.backend.retries << "\n";
  out << "timeout_ms = " << c.backend.timeout_ms << "\n";
  out << "max_new_tokens = " << c.backend.max_new_tokens << "\n";
  out << "\n[split]\n";
  out << "train = " << detail::toml_number(c.split.train) << "\n";
  out << "val = " << detail::toml_number(c.split.val) << "\n";
  out << "test = " << detail::toml_number(c.split.test) << "\n";
  out << "seed = " << c.split.seed << "\n";
  out << "\n[bleu]\n";
  out << "language = " << detail::quote_toml(to_string(c.bleu.language)) << "\n";
  out << "smoothing = " << detail::quote_toml(to_string(c.bleu.smoothing)) << "\n";
  out << "tokenization = " << detail::quote_toml(to_string(c.bleu.tokenization)) << "\n";
  out << "\n[merge]\n";
  out << "keep_flagged_baseline = " << (c.merge.keep_flagged_baseline ? "true" : "false")
      << "\n";
  out << "\n[export]\n";
  out << "instruction = " << detail::quote_toml(c.exp.instruction) << "\n";
  return out.str();
}

}  // namespace vnjp
