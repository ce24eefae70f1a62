// vnjp: batch toolkit for building a rare-word-refined Vietnamese-Japanese
// parallel corpus. Subcommands map 1:1 to pipeline stages; `pipeline` runs
// the whole chain. Every run writes a JSON manifest with input and output
// content hashes beside its outputs.

#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vnjp/backend.hpp"
#include "vnjp/config.hpp"
#include "vnjp/errors.hpp"
#include "vnjp/manifest.hpp"
#include "vnjp/pipeline.hpp"
#include "vnjp/version.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_backend = 3;

struct CliOverrides {
  std::optional<std::string> output_dir;
  std::optional<double> target_fraction;
  std::optional<double> k1;
  std::optional<double> b;
  std::optional<std::uint64_t> k;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> base_url;
  std::optional<std::string> model;
  std::optional<std::string> language;
  std::optional<std::string> smoothing;
  std::optional<std::string> tokenization;
  bool keep_flagged_baseline = false;
};

void apply_overrides(vnjp::PipelineConfig& cfg, const CliOverrides& o) {
  if (o.output_dir) cfg.paths.output_dir = *o.output_dir;
  if (o.target_fraction) cfg.analyze.target_fraction = *o.target_fraction;
  if (o.k1) cfg.bm25.k1 = *o.k1;
  if (o.b) cfg.bm25.b = *o.b;
  if (o.k) cfg.bm25.k = *o.k;
  if (o.seed) cfg.split.seed = *o.seed;
  if (o.base_url) cfg.backend.base_url = *o.base_url;
  if (o.model) cfg.backend.model = *o.model;
  if (o.language) cfg.bleu.language = vnjp::side_from_string(*o.language);
  if (o.smoothing) cfg.bleu.smoothing = vnjp::bleu_smoothing_from_string(*o.smoothing);
  if (o.tokenization) {
    cfg.bleu.tokenization = vnjp::bleu_tokenization_from_string(*o.tokenization);
  }
  if (o.keep_flagged_baseline) cfg.merge.keep_flagged_baseline = true;
}

std::unique_ptr<vnjp::GenerationBackend> make_backend(const vnjp::PipelineConfig& cfg,
                                                      bool mock) {
  if (mock) return std::make_unique<vnjp::MockBackend>();
  vnjp::HttpBackendConfig hc;
  hc.base_url = cfg.backend.base_url;
  hc.model = cfg.backend.model;
  hc.response_path = cfg.backend.response_path;
  hc.timeout_ms = static_cast<int>(cfg.backend.timeout_ms);
  return std::make_unique<vnjp::HttpBackend>(hc);
}

void write_manifest(const std::string& subcommand, const vnjp::PipelineConfig& cfg,
                    const vnjp::StageIo& io, const fs::path& out_dir) {
  vnjp::RunManifest manifest;
  manifest.subcommand = subcommand;
  manifest.config = cfg.to_json();
  for (const fs::path& p : io.inputs) manifest.add_input(p);
  for (const fs::path& p : io.outputs) manifest.add_output(p);
  manifest.save(out_dir / ("manifest_" + subcommand + ".json"));
}

void report_io(const vnjp::StageIo& io) {
  for (const std::string& w : io.warnings) std::cerr << "warning: " << w << "\n";
  for (const fs::path& p : io.outputs) std::cerr << "wrote " << p.string() << "\n";
}

fs::path require_corpus_input(const std::string& input_flag,
                              const vnjp::PipelineConfig& cfg) {
  if (!input_flag.empty()) return input_flag;
  if (!cfg.paths.corpus.empty()) return cfg.paths.corpus;
  throw vnjp::ConfigError("no input corpus: set paths.corpus in the config or pass --input");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vietnamese-Japanese corpus refinement toolkit"};
  app.set_version_flag("--version", std::string("vnjp ") + vnjp::version_string);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "TOML config file");
  bool mock = false;
  app.add_flag("--mock-backend", mock, "use the offline deterministic backend");

  CliOverrides over;
  app.add_option("--output-dir", over.output_dir, "output directory");
  app.add_option("--target-fraction", over.target_fraction,
                 "rare-word capture target in (0,1)");
  app.add_option("--k1", over.k1, "BM25 k1");
  app.add_option("--b", over.b, "BM25 b");
  app.add_option("--k", over.k, "demonstrations per prompt");
  app.add_option("--seed", over.seed, "split shuffle seed");
  app.add_option("--base-url", over.base_url, "backend base URL");
  app.add_option("--model", over.model, "backend model name");
  app.add_option("--language", over.language, "BLEU language side (vi or ja)");
  app.add_option("--smoothing", over.smoothing, "BLEU smoothing (none or add_one_clipped)");
  app.add_option("--tokenization", over.tokenization, "BLEU tokenization (word or character)");
  app.add_flag("--keep-flagged-baseline", over.keep_flagged_baseline,
               "keep flagged baseline pairs next to their synthetic replacements");

  std::string input;
  std::string synthetic_flag;
  std::string hyp_flag, ref_flag, tsv_flag;
  bool save_index = false;

  CLI::App* cmd_analyze = app.add_subcommand("analyze", "frequency table and threshold report");
  cmd_analyze->add_option("--input", input, "corpus file (TSV or JSONL)");
  CLI::App* cmd_flag = app.add_subcommand("flag", "mark rare-word sentences");
  cmd_flag->add_option("--input", input, "corpus file (TSV or JSONL)");
  CLI::App* cmd_stats = app.add_subcommand("stats", "sentence-length histograms");
  cmd_stats->add_option("--input", input, "corpus file (TSV or JSONL)");
  CLI::App* cmd_retrieve = app.add_subcommand("retrieve", "top-k demonstrations per flagged sentence");
  cmd_retrieve->add_option("--input", input, "flagged corpus (default: <output-dir>/flagged.jsonl)");
  cmd_retrieve->add_flag("--save-index", save_index, "also write a BM25 index snapshot");
  CLI::App* cmd_generate = app.add_subcommand("generate", "synthesize refined translations");
  cmd_generate->add_option("--input", input, "flagged corpus (default: <output-dir>/flagged.jsonl)");
  CLI::App* cmd_merge = app.add_subcommand("merge", "merge baseline and synthetic pairs");
  cmd_merge->add_option("--input", input, "flagged corpus (default: <output-dir>/flagged.jsonl)");
  cmd_merge->add_option("--synthetic", synthetic_flag,
                        "synthetic pairs (default: <output-dir>/synthetic.jsonl)");
  CLI::App* cmd_split = app.add_subcommand("split", "train/val/test split");
  cmd_split->add_option("--input", input, "corpus file (default: <output-dir>/merged.jsonl)");
  CLI::App* cmd_export = app.add_subcommand("export", "fine-tuning chat JSONL");
  cmd_export->add_option("--input", input, "corpus file (default: <output-dir>/merged.jsonl)");
  CLI::App* cmd_bleu = app.add_subcommand("bleu", "corpus BLEU of hypotheses against references");
  cmd_bleu->add_option("--hyp", hyp_flag, "hypothesis file, one sentence per line");
  cmd_bleu->add_option("--ref", ref_flag, "reference file, one sentence per line");
  cmd_bleu->add_option("--tsv", tsv_flag, "id<TAB>hyp<TAB>ref file (instead of --hyp/--ref)");
  CLI::App* cmd_pipeline = app.add_subcommand("pipeline", "full chain: flag, generate, merge, split, export");
  cmd_pipeline->add_option("--input", input, "corpus file (TSV or JSONL)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    vnjp::PipelineConfig cfg;
    if (!config_path.empty()) cfg = vnjp::load_config(config_path);
    apply_overrides(cfg, over);
    cfg.validate();
    const fs::path out_dir = cfg.paths.output_dir;

    vnjp::StageIo io;
    std::string name;
    if (cmd_analyze->parsed()) {
      name = "analyze";
      io = vnjp::run_analyze(cfg, require_corpus_input(input, cfg), out_dir);
    } else if (cmd_flag->parsed()) {
      name = "flag";
      io = vnjp::run_flag(cfg, require_corpus_input(input, cfg), out_dir);
    } else if (cmd_stats->parsed()) {
      name = "stats";
      io = vnjp::run_stats(cfg, require_corpus_input(input, cfg), out_dir);
    } else if (cmd_retrieve->parsed()) {
      name = "retrieve";
      const fs::path in = input.empty() ? out_dir / vnjp::stage_file::flagged : fs::path(input);
      io = vnjp::run_retrieve(cfg, in, out_dir, save_index);
    } else if (cmd_generate->parsed()) {
      name = "generate";
      const fs::path in = input.empty() ? out_dir / vnjp::stage_file::flagged : fs::path(input);
      const auto backend = make_backend(cfg, mock);
      io = vnjp::run_generate(cfg, in, out_dir, *backend);
    } else if (cmd_merge->parsed()) {
      name = "merge";
      const fs::path in = input.empty() ? out_dir / vnjp::stage_file::flagged : fs::path(input);
      const fs::path syn =
          synthetic_flag.empty() ? out_dir / vnjp::stage_file::synthetic : fs::path(synthetic_flag);
      io = vnjp::run_merge(cfg, in, syn, out_dir);
    } else if (cmd_split->parsed()) {
      name = "split";
      const fs::path in = input.empty() ? out_dir / vnjp::stage_file::merged : fs::path(input);
      io = vnjp::run_split(cfg, in, out_dir);
    } else if (cmd_export->parsed()) {
      name = "export";
      const fs::path in = input.empty() ? out_dir / vnjp::stage_file::merged : fs::path(input);
      io = vnjp::run_export(cfg, in, out_dir);
    } else if (cmd_bleu->parsed()) {
      name = "bleu";
      if (tsv_flag.empty() && (hyp_flag.empty() || ref_flag.empty())) {
        throw vnjp::ConfigError("bleu needs --tsv, or both --hyp and --ref");
      }
      if (!tsv_flag.empty() && (!hyp_flag.empty() || !ref_flag.empty())) {
        throw vnjp::ConfigError("--tsv excludes --hyp/--ref");
      }
      vnjp::BleuReport report;
      io = vnjp::run_bleu(cfg, hyp_flag, ref_flag, tsv_flag, out_dir, report);
      std::cout << report.summary() << "\n";
    } else if (cmd_pipeline->parsed()) {
      name = "pipeline";
      const auto backend = make_backend(cfg, mock);
      io = vnjp::run_pipeline(cfg, require_corpus_input(input, cfg), out_dir, *backend);
    }

    write_manifest(name, cfg, io, out_dir);
    report_io(io);
    return exit_ok;
  } catch (const vnjp::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const vnjp::TemplateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const vnjp::TransportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_backend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_data;
  }
}
