#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vnjp/backend.hpp"
#include "vnjp/bm25.hpp"
#include "vnjp/corpus.hpp"
#include "vnjp/errors.hpp"
#include "vnjp/prompt.hpp"

namespace vnjp {

/// Per-sentence failure, written to the failures JSONL so skipped sentences
/// are never silently dropped.
struct FailureRecord {
  std::uint64_t id = 0;
  std::string error_kind;  // "transport" or "extraction"
  std::string message;
};

inline void save_failures(const std::vector<FailureRecord>& failures,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const FailureRecord& f : failures) {
    json j;
    j["id"] = f.id;
    j["error_kind"] = f.error_kind;
    j["message"] = f.message;
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

struct GenerationOptions {
  int max_new_tokens = 1024;
  std::optional<std::uint64_t> seed;
  RetryPolicy retry;
  SleepFn sleep_fn = default_sleep;
};

/// One backend call with retries; the result carries the extracted
/// translation and wall-clock latency. Temperature 0.0 is allowed for the
/// deterministic baseline-translation path.
inline GenerationResult generate_translation(GenerationBackend& backend,
                                             const PromptBundle& prompt, double temperature,
                                             const GenerationOptions& opts = {}) {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw ConfigError("temperature must be in [0, 2]");
  }
  if (opts.max_new_tokens <= 0) throw ConfigError("max_new_tokens must be positive");
  GenerationRequest request{prompt, temperature, opts.max_new_tokens, opts.seed};
  const auto start = std::chrono::steady_clock::now();
  const std::string raw = complete_with_retry(backend, request, opts.retry, opts.sleep_fn);
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  GenerationResult result;
  result.raw_output = raw;
  result.final_translation = extract_final_translation(raw);
  result.temperature = temperature;
  result.backend_id = backend.id();
  result.latency_ms = static_cast<std::uint64_t>(elapsed.count());
  return result;
}

struct RefineOptions {
  PromptTemplate tmpl = PromptTemplate::cot_default();
  std::size_t k = 3;
  double temperature_1 = 0.7;
  double temperature_2 = 0.85;
  GenerationOptions generation;
  int max_in_flight = 4;
};

struct RefineOutcome {
  std::vector<SentencePair> synthetic;  // t1 before t2 per source, flagged order
  std::vector<FailureRecord> failures;  // flagged order
};

/// For each flagged pair: top-k retrieval (self excluded), one shared
/// prompt, two samples at the two temperatures. Up to max_in_flight
/// sentences are processed concurrently, but results commit in flagged
/// order, so the output is deterministic for a deterministic backend.
/// Synthetic ids are preallocated per flagged position above the corpus
/// max id, so they do not depend on which sentences fail.
inline RefineOutcome refine_flagged(const ParallelCorpus& corpus, const Bm25Index& index,
                                    GenerationBackend& backend, const RefineOptions& opts = {}) {
  opts.tmpl.validate();
  if (opts.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");

  std::vector<const SentencePair*> flagged;
  for (const SentencePair& p : corpus.pairs) {
    if (p.flagged) flagged.push_back(&p);
  }
  RefineOutcome outcome;
  if (flagged.empty()) return outcome;

  const std::uint64_t id_base = corpus.max_id() + 1;
  struct Slot {
    std::optional<SentencePair> t1, t2;
    std::optional<FailureRecord> failure;
  };
  std::vector<Slot> slots(flagged.size());
  std::atomic<std::size_t> cursor{0};

  auto process = [&](std::size_t i) {
    const SentencePair& p = *flagged[i];
    try {
      const std::vector<RetrievedExample> examples = index.top_k(p.source_vi, opts.k, p.id);
      const PromptBundle prompt = assemble_prompt(p.source_vi, examples, opts.tmpl);
      const GenerationResult r1 =
          generate_translation(backend, prompt, opts.temperature_1, opts.generation);
      const GenerationResult r2 =
          generate_translation(backend, prompt, opts.temperature_2, opts.generation);
      slots[i].t1 = SentencePair{id_base + 2 * i, p.source_vi, r1.final_translation,
                                 Provenance::synthetic_t1, false};
      slots[i].t2 = SentencePair{id_base + 2 * i + 1, p.source_vi, r2.final_translation,
                                 Provenance::synthetic_t2, false};
    } catch (const TransportError& e) {
      slots[i].failure = FailureRecord{p.id, "transport", e.what()};
    } catch (const ExtractionError& e) {
      slots[i].failure = FailureRecord{p.id, "extraction", e.what()};
    }
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= slots.size()) return;
      process(i);
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(opts.max_in_flight), slots.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  bool all_transport = true;
  for (Slot& slot : slots) {
    if (slot.failure) {
      if (slot.failure->error_kind != "transport") all_transport = false;
      outcome.failures.push_back(std::move(*slot.failure));
    } else {
      outcome.synthetic.push_back(std::move(*slot.t1));
      outcome.synthetic.push_back(std::move(*slot.t2));
    }
  }
  // Per-sentence failures are recoverable; a backend that failed every
  // single sentence is not.
  if (outcome.synthetic.empty() && all_transport) {
    throw TransportError("backend failed for all " + std::to_string(flagged.size()) +
                             " flagged sentences: " + outcome.failures.front().message,
                         /*retryable=*/false);
  }
  return outcome;
}

/// Baseline translation for pairs with no Japanese side, at temperature 0
/// with a plain template. Failed pairs are dropped from the returned corpus
/// and logged. This is the cheap bootstrap pass; refinement happens later.
inline ParallelCorpus translate_missing_targets(const ParallelCorpus& corpus,
                                                GenerationBackend& backend,
                                                const PromptTemplate& tmpl,
                                                std::vector<FailureRecord>& failures,
                                                const GenerationOptions& opts = {}) {
  tmpl.validate();
  ParallelCorpus out;
  out.metadata = corpus.metadata;
  for (const SentencePair& p : corpus.pairs) {
    if (p.target_ja) {
      out.pairs.push_back(p);
      continue;
    }
    try {
      const PromptBundle prompt = assemble_prompt(p.source_vi, {}, tmpl);
      const GenerationResult r = generate_translation(backend, prompt, 0.0, opts);
      SentencePair filled = p;
      filled.target_ja = r.final_translation;
      out.pairs.push_back(std::move(filled));
    } catch (const TransportError& e) {
      failures.push_back(FailureRecord{p.id, "transport", e.what()});
    } catch (const ExtractionError& e) {
      failures.push_back(FailureRecord{p.id, "extraction", e.what()});
    }
  }
  return out;
}

}  // namespace vnjp
