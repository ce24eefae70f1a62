#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vnjp/analyze.hpp"
#include "vnjp/assemble.hpp"
#include "vnjp/backend.hpp"
#include "vnjp/bleu.hpp"
#include "vnjp/bm25.hpp"
#include "vnjp/config.hpp"
#include "vnjp/corpus.hpp"
#include "vnjp/generate.hpp"
#include "vnjp/prompt.hpp"

namespace vnjp {

/// Paths touched by one stage plus any warnings, for manifests and logs.
struct StageIo {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> warnings;

  void absorb(StageIo other) {
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    outputs.insert(outputs.end(), other.outputs.begin(), other.outputs.end());
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  }
};

namespace stage_file {
inline constexpr const char* threshold_report = "threshold_report.json";
inline constexpr const char* flagged = "flagged.jsonl";
inline constexpr const char* retrievals = "retrievals.jsonl";
inline constexpr const char* index_snapshot = "bm25_index.json";
inline constexpr const char* synthetic = "synthetic.jsonl";
inline constexpr const char* merged = "merged.jsonl";
inline constexpr const char* train = "train.jsonl";
inline constexpr const char* val = "val.jsonl";
inline constexpr const char* test = "test.jsonl";
inline constexpr const char* training_export = "training.jsonl";
inline constexpr const char* bleu_report = "bleu_report.json";
inline constexpr const char* histogram_vi = "histogram_vi.csv";
inline constexpr const char* histogram_ja = "histogram_ja.csv";
}  // namespace stage_file

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::filesystem::path ensure_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

}  // namespace detail

/// Failures path from config: relative names land inside the output dir.
inline std::filesystem::path resolve_failures_path(const PipelineConfig& cfg,
                                                   const std::filesystem::path& out_dir) {
  const std::filesystem::path p = cfg.paths.failures.empty()
                                      ? std::filesystem::path("failures.jsonl")
                                      : std::filesystem::path(cfg.paths.failures);
  return p.is_absolute() ? p : out_dir / p;
}

inline PromptTemplate load_template(const PipelineConfig& cfg) {
  PromptTemplate t = PromptTemplate::cot_default();
  if (!cfg.paths.template_body.empty()) {
    t.body = detail::read_text_file(cfg.paths.template_body);
  }
  if (!cfg.paths.demo_template.empty()) {
    t.demo_block = detail::read_text_file(cfg.paths.demo_template);
  }
  t.validate();
  return t;
}

/// Retrieval pool: the configured clean set, or the non-flagged subset of
/// the working corpus.
inline ParallelCorpus retrieval_pool(const PipelineConfig& cfg, const ParallelCorpus& corpus,
                                     StageIo& io) {
  if (!cfg.paths.clean_pool.empty()) {
    io.inputs.emplace_back(cfg.paths.clean_pool);
    return load_corpus(cfg.paths.clean_pool);
  }
  ParallelCorpus pool;
  pool.metadata = corpus.metadata;
  for (const SentencePair& p : corpus.pairs) {
    if (!p.flagged) pool.pairs.push_back(p);
  }
  return pool;
}

/// analyze: frequency table + threshold search, report written for audit.
inline StageIo run_analyze(const PipelineConfig& cfg, const std::filesystem::path& corpus_path,
                           const std::filesystem::path& out_dir) {
  StageIo io;
  io.inputs.push_back(corpus_path);
  const ParallelCorpus corpus = load_corpus(corpus_path);
  const FrequencyTable table =
      build_frequency_table(corpus, Side::ja, cfg.analyze.tokenizer);
  const ThresholdReport report =
      select_threshold(table, corpus, cfg.analyze.target_fraction, cfg.analyze.tokenizer);
  detail::ensure_output_dir(out_dir);
  const auto report_path = out_dir / stage_file::threshold_report;
  detail::write_text_file(report_path, report.to_json().dump(2) + "\n");
  io.outputs.push_back(report_path);
  return io;
}

/// flag: analyze plus the flagged corpus itself.
inline StageIo run_flag(const PipelineConfig& cfg, const std::filesystem::path& corpus_path,
                        const std::filesystem::path& out_dir) {
  StageIo io;
  io.inputs.push_back(corpus_path);
  const ParallelCorpus corpus = load_corpus(corpus_path);
  const FrequencyTable table =
      build_frequency_table(corpus, Side::ja, cfg.analyze.tokenizer);
  const ThresholdReport report =
      select_threshold(table, corpus, cfg.analyze.target_fraction, cfg.analyze.tokenizer);
  const ParallelCorpus flagged =
      flag_sentences(corpus, table, report.threshold, cfg.analyze.tokenizer);
  detail::ensure_output_dir(out_dir);
  const auto report_path = out_dir / stage_file::threshold_report;
  detail::write_text_file(report_path, report.to_json().dump(2) + "\n");
  io.outputs.push_back(report_path);
  const auto flagged_path = out_dir / stage_file::flagged;
  save_corpus(flagged, flagged_path);
  io.outputs.push_back(flagged_path);
  return io;
}

/// stats: sentence-length histograms for both sides.
inline StageIo run_stats(const PipelineConfig& cfg, const std::filesystem::path& corpus_path,
                         const std::filesystem::path& out_dir) {
  StageIo io;
  io.inputs.push_back(corpus_path);
  const ParallelCorpus corpus = load_corpus(corpus_path);
  detail::ensure_output_dir(out_dir);
  const Histogram vi =
      token_count_histogram(corpus, Side::vi, cfg.analyze.histogram_bucket_width);
  const Histogram ja =
      token_count_histogram(corpus, Side::ja, cfg.analyze.histogram_bucket_width);
  const auto vi_path = out_dir / stage_file::histogram_vi;
  const auto ja_path = out_dir / stage_file::histogram_ja;
  detail::write_text_file(vi_path, vi.to_csv());
  detail::write_text_file(ja_path, ja.to_csv());
  io.outputs.push_back(vi_path);
  io.outputs.push_back(ja_path);
  return io;
}

/// retrieve: top-k demonstrations for every flagged sentence, optionally
/// also an index snapshot.
inline StageIo run_retrieve(const PipelineConfig& cfg, const std::filesystem::path& flagged_path,
                            const std::filesystem::path& out_dir, bool save_index = false) {
  StageIo io;
  io.inputs.push_back(flagged_path);
  const ParallelCorpus corpus = load_corpus(flagged_path);
  const ParallelCorpus pool = retrieval_pool(cfg, corpus, io);
  const Bm25Index index = Bm25Index::build(pool, cfg.bm25.k1, cfg.bm25.b);
  detail::ensure_output_dir(out_dir);

  std::ostringstream lines;
  for (const SentencePair& p : corpus.pairs) {
    if (!p.flagged) continue;
    json rec;
    rec["id"] = p.id;
    rec["query"] = p.source_vi;
    json examples = json::array();
    for (const RetrievedExample& e : index.top_k(p.source_vi, cfg.bm25.k, p.id)) {
      examples.push_back(json{{"doc_id", e.doc_id},
                              {"score", e.score},
                              {"source_vi", e.source_vi},
                              {"target_ja", e.target_ja}});
    }
    rec["examples"] = std::move(examples);
    lines << rec.dump() << '\n';
  }
  const auto retrievals_path = out_dir / stage_file::retrievals;
  detail::write_text_file(retrievals_path, lines.str());
  io.outputs.push_back(retrievals_path);
  if (save_index) {
    const auto index_path = out_dir / stage_file::index_snapshot;
    index.save_snapshot(index_path);
    io.outputs.push_back(index_path);
  }
  return io;
}

inline RefineOptions refine_options(const PipelineConfig& cfg, const PromptTemplate& tmpl) {
  RefineOptions opts;
  opts.tmpl = tmpl;
  opts.k = static_cast<std::size_t>(cfg.bm25.k);
  opts.generation.max_new_tokens = static_cast<int>(cfg.backend.max_new_tokens);
  opts.generation.retry.max_retries = static_cast<int>(cfg.backend.retries);
  opts.max_in_flight = static_cast<int>(cfg.backend.max_in_flight);
  return opts;
}

/// generate: two synthetic translations per flagged sentence; failures file
/// is always written, even when empty.
inline StageIo run_generate(const PipelineConfig& cfg, const std::filesystem::path& flagged_path,
                            const std::filesystem::path& out_dir, GenerationBackend& backend) {
  StageIo io;
  io.inputs.push_back(flagged_path);
  const ParallelCorpus corpus = load_corpus(flagged_path);
  const ParallelCorpus pool = retrieval_pool(cfg, corpus, io);
  const Bm25Index index = Bm25Index::build(pool, cfg.bm25.k1, cfg.bm25.b);
  const PromptTemplate tmpl = load_template(cfg);
  if (!cfg.paths.template_body.empty()) io.inputs.emplace_back(cfg.paths.template_body);
  if (!cfg.paths.demo_template.empty()) io.inputs.emplace_back(cfg.paths.demo_template);

  const RefineOutcome outcome = refine_flagged(corpus, index, backend, refine_options(cfg, tmpl));

  detail::ensure_output_dir(out_dir);
  ParallelCorpus synthetic;
  synthetic.pairs = outcome.synthetic;
  const auto synthetic_path = out_dir / stage_file::synthetic;
  save_corpus(synthetic, synthetic_path);
  io.outputs.push_back(synthetic_path);
  const auto failures_path = resolve_failures_path(cfg, out_dir);
  save_failures(outcome.failures, failures_path);
  io.outputs.push_back(failures_path);
  for (const FailureRecord& f : outcome.failures) {
    io.warnings.push_back("pair " + std::to_string(f.id) + " skipped (" + f.error_kind +
                          "): " + f.message);
  }
  return io;
}

/// merge: flagged baseline pairs replaced by their synthetic couples.
inline StageIo run_merge(const PipelineConfig& cfg, const std::filesystem::path& flagged_path,
                         const std::filesystem::path& synthetic_path,
                         const std::filesystem::path& out_dir) {
  StageIo io;
  io.inputs.push_back(flagged_path);
  io.inputs.push_back(synthetic_path);
  const ParallelCorpus corpus = load_corpus(flagged_path);
  const ParallelCorpus synthetic = load_corpus(synthetic_path);
  std::vector<std::uint64_t> dropped;
  const ParallelCorpus merged =
      merge(corpus, synthetic.pairs, cfg.merge.keep_flagged_baseline, &dropped);
  for (const std::uint64_t id : dropped) {
    io.warnings.push_back("flagged pair " + std::to_string(id) +
                          " dropped without synthetic replacement");
  }
  detail::ensure_output_dir(out_dir);
  const auto merged_path = out_dir / stage_file::merged;
  save_corpus(merged, merged_path);
  io.outputs.push_back(merged_path);
  return io;
}

/// split: deterministic source-grouped train/val/test files.
inline StageIo run_split(const PipelineConfig& cfg, const std::filesystem::path& corpus_path,
                         const std::filesystem::path& out_dir) {
  StageIo io;
  io.inputs.push_back(corpus_path);
  const ParallelCorpus corpus = load_corpus(corpus_path);
  const SplitResult parts = split(corpus, cfg.split);
  detail::ensure_output_dir(out_dir);
  const auto train_path = out_dir / stage_file::train;
  const auto val_path = out_dir / stage_file::val;
  const auto test_path = out_dir / stage_file::test;
  save_corpus(parts.train, train_path);
  save_corpus(parts.val, val_path);
  save_corpus(parts.test, test_path);
  io.outputs.push_back(train_path);
  io.outputs.push_back(val_path);
  io.outputs.push_back(test_path);
  return io;
}

/// export: chat-format fine-tuning JSONL.
inline StageIo run_export(const PipelineConfig& cfg, const std::filesystem::path& corpus_path,
                          const std::filesystem::path& out_dir) {
  StageIo io;
  io.inputs.push_back(corpus_path);
  const ParallelCorpus corpus = load_corpus(corpus_path);
  detail::ensure_output_dir(out_dir);
  const auto export_path = out_dir / stage_file::training_export;
  export_training(corpus, export_path, cfg.exp.instruction);
  io.outputs.push_back(export_path);
  return io;
}

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

/// bleu over two line-aligned files, or one TSV of id<TAB>hyp<TAB>ref.
inline StageIo run_bleu(const PipelineConfig& cfg, const std::filesystem::path& hyp_path,
                        const std::filesystem::path& ref_path,
                        const std::filesystem::path& tsv_path,
                        const std::filesystem::path& out_dir, BleuReport& report) {
  StageIo io;
  std::vector<std::string> hyps, refs;
  if (!tsv_path.empty()) {
    io.inputs.push_back(tsv_path);
    std::size_t line_no = 0;
    for (const std::string& line : detail::read_lines(tsv_path)) {
      ++line_no;
      const std::size_t first = line.find('\t');
      const std::size_t second = first == std::string::npos ? std::string::npos
                                                            : line.find('\t', first + 1);
      if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected id<TAB>hyp<TAB>ref");
      }
      hyps.push_back(line.substr(first + 1, second - first - 1));
      refs.push_back(line.substr(second + 1));
    }
  } else {
    io.inputs.push_back(hyp_path);
    io.inputs.push_back(ref_path);
    hyps = detail::read_lines(hyp_path);
    refs = detail::read_lines(ref_path);
  }
  report = corpus_bleu(hyps, refs, cfg.bleu.language, cfg.bleu.smoothing, cfg.bleu.tokenization);
  detail::ensure_output_dir(out_dir);
  const auto report_path = out_dir / stage_file::bleu_report;
  detail::write_text_file(report_path, report.to_json().dump(2) + "\n");
  io.outputs.push_back(report_path);
  return io;
}

/// The full chain: flag, refine, merge, split, export, all in memory, with
/// every intermediate written to the output dir. Pairs with no Japanese
/// side get a baseline translation first (temperature 0, plain template).
inline StageIo run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& corpus_path,
                            const std::filesystem::path& out_dir, GenerationBackend& backend) {
  StageIo io;
  io.inputs.push_back(corpus_path);
  ParallelCorpus corpus = load_corpus(corpus_path);
  detail::ensure_output_dir(out_dir);

  std::vector<FailureRecord> failures;
  bool needs_baseline = false;
  for (const SentencePair& p : corpus.pairs) {
    if (!p.target_ja) {
      needs_baseline = true;
      break;
    }
  }
  if (needs_baseline) {
    corpus = translate_missing_targets(corpus, backend, PromptTemplate::baseline_default(),
                                       failures);
  }

  const FrequencyTable table =
      build_frequency_table(corpus, Side::ja, cfg.analyze.tokenizer);
  const ThresholdReport report =
      select_threshold(table, corpus, cfg.analyze.target_fraction, cfg.analyze.tokenizer);
  const ParallelCorpus flagged =
      flag_sentences(corpus, table, report.threshold, cfg.analyze.tokenizer);
  const auto report_path = out_dir / stage_file::threshold_report;
  detail::write_text_file(report_path, report.to_json().dump(2) + "\n");
  io.outputs.push_back(report_path);
  const auto flagged_path = out_dir / stage_file::flagged;
  save_corpus(flagged, flagged_path);
  io.outputs.push_back(flagged_path);

  const ParallelCorpus pool = retrieval_pool(cfg, flagged, io);
  const Bm25Index index = Bm25Index::build(pool, cfg.bm25.k1, cfg.bm25.b);
  const PromptTemplate tmpl = load_template(cfg);
  if (!cfg.paths.template_body.empty()) io.inputs.emplace_back(cfg.paths.template_body);
  if (!cfg.paths.demo_template.empty()) io.inputs.emplace_back(cfg.paths.demo_template);

  RefineOutcome outcome = refine_flagged(flagged, index, backend, refine_options(cfg, tmpl));
  failures.insert(failures.end(), outcome.failures.begin(), outcome.failures.end());

  ParallelCorpus synthetic;
  synthetic.pairs = outcome.synthetic;
  const auto synthetic_path = out_dir / stage_file::synthetic;
  save_corpus(synthetic, synthetic_path);
  io.outputs.push_back(synthetic_path);
  const auto failures_path = resolve_failures_path(cfg, out_dir);
  save_failures(failures, failures_path);
  io.outputs.push_back(failures_path);
  for (const FailureRecord& f : failures) {
    io.warnings.push_back("pair " + std::to_string(f.id) + " skipped (" + f.error_kind +
                          "): " + f.message);
  }

  std::vector<std::uint64_t> dropped;
  const ParallelCorpus merged =
      merge(flagged, outcome.synthetic, cfg.merge.keep_flagged_baseline, &dropped);
  for (const std::uint64_t id : dropped) {
    io.warnings.push_back("flagged pair " + std::to_string(id) +
                          " dropped without synthetic replacement");
  }
  const auto merged_path = out_dir / stage_file::merged;
  save_corpus(merged, merged_path);
  io.outputs.push_back(merged_path);

  const SplitResult parts = split(merged, cfg.split);
  const auto train_path = out_dir / stage_file::train;
  const auto val_path = out_dir / stage_file::val;
  const auto test_path = out_dir / stage_file::test;
  save_corpus(parts.train, train_path);
  save_corpus(parts.val, val_path);
  save_corpus(parts.test, test_path);
  io.outputs.push_back(train_path);
  io.outputs.push_back(val_path);
  io.outputs.push_back(test_path);

  const auto export_path = out_dir / stage_file::training_export;
  export_training(parts.train, export_path, cfg.exp.instruction);
  io.outputs.push_back(export_path);
  return io;
}

}  // namespace vnjp
