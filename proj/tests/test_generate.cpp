#include <atomic>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "support/generators.hpp"
#include "support/temp_dir.hpp"
#include "vnjp/generate.hpp"

using vnjp::Bm25Index;
using vnjp::FailureRecord;
using vnjp::GenerationOptions;
using vnjp::MockBackend;
using vnjp::ParallelCorpus;
using vnjp::PromptBundle;
using vnjp::PromptTemplate;
using vnjp::Provenance;
using vnjp::RefineOptions;
using vnjp::RefineOutcome;
using vnjp::SentencePair;

namespace {

// Wraps the mock backend with a thread-safe call counter and an optional
// per-query sabotage rule.
class CountingBackend : public vnjp::GenerationBackend {
 public:
  std::string complete(const vnjp::GenerationRequest& request) override {
    calls.fetch_add(1);
    if (!break_token_.empty() &&
        request.prompt.query_vi.find(break_token_) != std::string::npos) {
      return "rambling with no marker\n";
    }
    return inner_.complete(request);
  }

  std::string id() const override { return inner_.id(); }

  void break_queries_containing(std::string token) { break_token_ = std::move(token); }

  std::atomic<int> calls{0};

 private:
  MockBackend inner_;
  std::string break_token_;
};

class AlwaysDownBackend : public vnjp::GenerationBackend {
 public:
  std::string complete(const vnjp::GenerationRequest&) override {
    calls.fetch_add(1);
    throw vnjp::TransportError("connection refused", true);
  }
  std::string id() const override { return "down"; }
  std::atomic<int> calls{0};
};

// Distinct single-occurrence sources so retrieval behavior is predictable.
ParallelCorpus small_corpus(std::size_t n, std::size_t n_flagged) {
  const auto& pool = testsupport::vietnamese_pool();
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    SentencePair p;
    p.id = static_cast<std::uint64_t>(i);
    p.source_vi = pool[i % pool.size()] + " " + pool[(i * 7 + 3) % pool.size()] + " " +
                  std::to_string(i);
    p.target_ja = "訳文" + std::to_string(i);
    p.flagged = i < n_flagged;
    corpus.pairs.push_back(std::move(p));
  }
  return corpus;
}

GenerationOptions no_sleep_options() {
  GenerationOptions opts;
  opts.retry.max_retries = 0;
  opts.sleep_fn = [](std::chrono::milliseconds) {};
  return opts;
}

PromptBundle plain_prompt(const std::string& query) {
  return vnjp::assemble_prompt(query, {}, PromptTemplate::cot_default());
}

}  // namespace

TEST_CASE("generate_translation fills every result field") {
  MockBackend backend;
  const auto result = vnjp::generate_translation(backend, plain_prompt("xin chào"), 0.7);
  CHECK(result.final_translation == "oàhc nix (t=0.70)");
  CHECK(result.raw_output.find("FINAL:") != std::string::npos);
  CHECK(result.temperature == 0.7);
  CHECK(result.backend_id == "mock");
}

TEST_CASE("generate_translation validates temperature and token budget") {
  MockBackend backend;
  const PromptBundle prompt = plain_prompt("a");
  CHECK_THROWS_AS(vnjp::generate_translation(backend, prompt, -0.1), vnjp::ConfigError);
  CHECK_THROWS_AS(vnjp::generate_translation(backend, prompt, 2.5), vnjp::ConfigError);
  CHECK_NOTHROW(vnjp::generate_translation(backend, prompt, 0.0));

  GenerationOptions opts;
  opts.max_new_tokens = 0;
  CHECK_THROWS_AS(vnjp::generate_translation(backend, prompt, 0.7, opts),
                  vnjp::ConfigError);
}

TEST_CASE("generate_translation retries transport failures") {
  AlwaysDownBackend backend;
  GenerationOptions opts;
  opts.retry.max_retries = 2;
  opts.sleep_fn = [](std::chrono::milliseconds) {};
  CHECK_THROWS_AS(vnjp::generate_translation(backend, plain_prompt("a"), 0.7, opts),
                  vnjp::TransportError);
  CHECK(backend.calls.load() == 3);
}

TEST_CASE("save_failures writes one JSON object per line") {
  testsupport::TempDir dir;
  const auto path = dir / "failures.jsonl";
  vnjp::save_failures({{4, "transport", "timeout"}, {9, "extraction", "no marker"}}, path);
  const std::string content = testsupport::read_file(path);
  CHECK(content ==
        "{\"id\":4,\"error_kind\":\"transport\",\"message\":\"timeout\"}\n"
        "{\"id\":9,\"error_kind\":\"extraction\",\"message\":\"no marker\"}\n");
}

TEST_CASE("refine with no flagged sentences makes no backend calls") {
  const ParallelCorpus corpus = small_corpus(10, 0);
  const Bm25Index index = Bm25Index::build(corpus);
  CountingBackend backend;
  const RefineOutcome outcome = vnjp::refine_flagged(corpus, index, backend);
  CHECK(outcome.synthetic.empty());
  CHECK(outcome.failures.empty());
  CHECK(backend.calls.load() == 0);
}

TEST_CASE("fifteen flagged sentences produce thirty pairs from thirty calls") {
  const ParallelCorpus corpus = small_corpus(40, 15);
  const Bm25Index index = Bm25Index::build(corpus);
  CountingBackend backend;
  const RefineOutcome outcome = vnjp::refine_flagged(corpus, index, backend);

  CHECK(backend.calls.load() == 30);
  REQUIRE(outcome.synthetic.size() == 30);
  CHECK(outcome.failures.empty());

  const std::uint64_t id_base = corpus.max_id() + 1;
  for (std::size_t i = 0; i < 15; ++i) {
    const SentencePair& t1 = outcome.synthetic[2 * i];
    const SentencePair& t2 = outcome.synthetic[2 * i + 1];
    const SentencePair& src = corpus.pairs[i];  // flagged pairs come first here

    CHECK(t1.id == id_base + 2 * i);
    CHECK(t2.id == id_base + 2 * i + 1);
    CHECK(t1.source_vi == src.source_vi);
    CHECK(t2.source_vi == src.source_vi);
    CHECK(t1.provenance == Provenance::synthetic_t1);
    CHECK(t2.provenance == Provenance::synthetic_t2);
    CHECK_FALSE(t1.flagged);
    CHECK_FALSE(t2.flagged);
    CHECK(t1.target_ja == MockBackend::mock_translation(src.source_vi, 0.7));
    CHECK(t2.target_ja == MockBackend::mock_translation(src.source_vi, 0.85));
  }
}

TEST_CASE("custom temperatures reach the backend") {
  const ParallelCorpus corpus = small_corpus(6, 1);
  const Bm25Index index = Bm25Index::build(corpus);
  MockBackend backend;
  RefineOptions opts;
  opts.temperature_1 = 0.5;
  opts.temperature_2 = 1.0;
  const RefineOutcome outcome = vnjp::refine_flagged(corpus, index, backend, opts);
  REQUIRE(outcome.synthetic.size() == 2);
  CHECK(outcome.synthetic[0].target_ja->find("(t=0.50)") != std::string::npos);
  CHECK(outcome.synthetic[1].target_ja->find("(t=1.00)") != std::string::npos);
}

TEST_CASE("refine excludes the flagged sentence from its own demonstrations") {
  // All sources share words, so without exclusion the sentence itself would
  // be its own best match. Its text must appear exactly once: as the query.
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < 5; ++i) {
    corpus.pairs.push_back({static_cast<std::uint64_t>(i),
                            "chung từ riêng" + std::to_string(i), "訳",
                            Provenance::baseline, false});
  }
  corpus.pairs[2].flagged = true;
  const Bm25Index index = Bm25Index::build(corpus);

  struct RecordingBackend : vnjp::GenerationBackend {
    std::string complete(const vnjp::GenerationRequest& request) override {
      prompts.push_back(request.prompt.user_text);
      return MockBackend{}.complete(request);
    }
    std::string id() const override { return "mock"; }
    std::vector<std::string> prompts;
  } backend;

  RefineOptions opts;
  opts.max_in_flight = 1;
  vnjp::refine_flagged(corpus, index, backend, opts);
  REQUIRE_FALSE(backend.prompts.empty());
  CHECK(vnjp::detail::count_occurrences(backend.prompts[0], corpus.pairs[2].source_vi) ==
        1);
}

TEST_CASE("refine output does not depend on concurrency") {
  const ParallelCorpus corpus = small_corpus(60, 20);
  const Bm25Index index = Bm25Index::build(corpus);
  MockBackend backend;

  RefineOptions serial;
  serial.max_in_flight = 1;
  RefineOptions wide;
  wide.max_in_flight = 8;

  const RefineOutcome a = vnjp::refine_flagged(corpus, index, backend, serial);
  const RefineOutcome b = vnjp::refine_flagged(corpus, index, backend, wide);
  REQUIRE(a.synthetic.size() == b.synthetic.size());
  for (std::size_t i = 0; i < a.synthetic.size(); ++i) {
    CHECK(a.synthetic[i] == b.synthetic[i]);
  }
}

TEST_CASE("a failing sentence is recorded and skipped without shifting ids") {
  ParallelCorpus corpus = small_corpus(10, 3);
  corpus.pairs[1].source_vi = "câu hỏng nặng";  // sabotaged below
  const Bm25Index index = Bm25Index::build(corpus);
  CountingBackend backend;
  backend.break_queries_containing("hỏng");

  const RefineOutcome outcome = vnjp::refine_flagged(corpus, index, backend);
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].id == 1);
  CHECK(outcome.failures[0].error_kind == "extraction");
  REQUIRE(outcome.synthetic.size() == 4);

  // Slot ids are preallocated per flagged position: position 1 failed, so
  // its two ids are simply absent.
  const std::uint64_t id_base = corpus.max_id() + 1;
  CHECK(outcome.synthetic[0].id == id_base + 0);
  CHECK(outcome.synthetic[1].id == id_base + 1);
  CHECK(outcome.synthetic[2].id == id_base + 4);
  CHECK(outcome.synthetic[3].id == id_base + 5);
}

TEST_CASE("a backend that fails every sentence is a systemic failure") {
  const ParallelCorpus corpus = small_corpus(8, 3);
  const Bm25Index index = Bm25Index::build(corpus);
  AlwaysDownBackend backend;
  RefineOptions opts;
  opts.generation = no_sleep_options();
  CHECK_THROWS_AS(vnjp::refine_flagged(corpus, index, backend, opts),
                  vnjp::TransportError);
}

TEST_CASE("extraction failures on every sentence are not systemic") {
  ParallelCorpus corpus = small_corpus(6, 2);
  corpus.pairs[0].source_vi = "hỏng một";
  corpus.pairs[1].source_vi = "hỏng hai";
  const Bm25Index index = Bm25Index::build(corpus);
  CountingBackend backend;
  backend.break_queries_containing("hỏng");
  const RefineOutcome outcome = vnjp::refine_flagged(corpus, index, backend);
  CHECK(outcome.synthetic.empty());
  CHECK(outcome.failures.size() == 2);
}

TEST_CASE("refine validates its options") {
  const ParallelCorpus corpus = small_corpus(4, 1);
  const Bm25Index index = Bm25Index::build(corpus);
  MockBackend backend;
  RefineOptions opts;
  opts.max_in_flight = 0;
  CHECK_THROWS_AS(vnjp::refine_flagged(corpus, index, backend, opts), vnjp::ConfigError);
}

TEST_CASE("translate_missing_targets fills only the gaps") {
  ParallelCorpus corpus = small_corpus(5, 0);
  corpus.pairs[1].target_ja.reset();
  corpus.pairs[3].target_ja.reset();

  MockBackend backend;
  std::vector<FailureRecord> failures;
  const ParallelCorpus filled = vnjp::translate_missing_targets(
      corpus, backend, PromptTemplate::baseline_default(), failures);

  REQUIRE(filled.pairs.size() == 5);
  CHECK(failures.empty());
  CHECK(filled.pairs[0].target_ja == corpus.pairs[0].target_ja);
  CHECK(filled.pairs[1].target_ja ==
        MockBackend::mock_translation(corpus.pairs[1].source_vi, 0.0));
  CHECK(filled.pairs[3].target_ja ==
        MockBackend::mock_translation(corpus.pairs[3].source_vi, 0.0));
}

TEST_CASE("translate_missing_targets drops failing pairs and records them") {
  ParallelCorpus corpus = small_corpus(4, 0);
  corpus.pairs[2].target_ja.reset();

  AlwaysDownBackend backend;
  std::vector<FailureRecord> failures;
  vnjp::GenerationOptions opts = no_sleep_options();
  const ParallelCorpus filled = vnjp::translate_missing_targets(
      corpus, backend, PromptTemplate::baseline_default(), failures, opts);

  CHECK(filled.pairs.size() == 3);
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].id == 2);
  CHECK(failures[0].error_kind == "transport");
  for (const SentencePair& p : filled.pairs) CHECK(p.id != 2);
}
