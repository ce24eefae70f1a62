// Release gate for the toolkit. Each criterion below runs as one check and
// prints a single [PASS]/[FAIL] line with its runtime; the process exits
// nonzero if any check fails. Tolerances and time budgets are pinned here,
// in code, so a green run means the numbers themselves were met.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vnjp/analyze.hpp"
#include "vnjp/assemble.hpp"
#include "vnjp/bleu.hpp"
#include "vnjp/bm25.hpp"
#include "vnjp/corpus.hpp"
#include "support/generators.hpp"
#include "support/oracle_bleu.hpp"
#include "support/oracle_bm25.hpp"
#include "support/run_cli.hpp"
#include "support/temp_dir.hpp"

namespace {

namespace fs = std::filesystem;

constexpr double kBleuTolerance = 1e-9;
constexpr double kBm25Tolerance = 1e-12;

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure(message);
}

void require_close(double got, double want, double tolerance, const std::string& what) {
  if (!(std::fabs(got - want) <= tolerance)) {
    throw CheckFailure(what + ": got " + std::to_string(got) + ", want " +
                       std::to_string(want));
  }
}

// --- corpus BLEU against a brute-force oracle --------------------------------

void check_bleu_oracle() {
  testsupport::TestRng rng(1101);
  for (int round = 0; round < 500; ++round) {
    const testsupport::BleuCase c = testsupport::random_bleu_case(rng);
    for (const bool smoothed : {false, true}) {
      const vnjp::BleuReport got = vnjp::corpus_bleu(
          c.hyp_lines, c.ref_lines, vnjp::Side::vi,
          smoothed ? vnjp::BleuSmoothing::add_one_clipped : vnjp::BleuSmoothing::none);
      const oracle::OracleBleu want = oracle::bleu_of_lines(c.hyp_lines, c.ref_lines, smoothed);
      const std::string tag = "round " + std::to_string(round) +
                              (smoothed ? " smoothed" : " unsmoothed");
      require_close(got.bleu, want.bleu, kBleuTolerance, tag + " bleu");
      for (int n = 0; n < 4; ++n) {
        require_close(got.precisions[static_cast<std::size_t>(n)],
                      want.precisions[static_cast<std::size_t>(n)], kBleuTolerance,
                      tag + " p" + std::to_string(n + 1));
      }
      require_close(got.brevity_penalty, want.brevity_penalty, kBleuTolerance, tag + " BP");
      require(got.hyp_length == want.hyp_length, tag + ": hypothesis length mismatch");
      require(got.ref_length == want.ref_length, tag + ": reference length mismatch");
    }
  }

  // Clipped-count anchor: seven "the" against a reference holding two.
  const vnjp::BleuReport clip = vnjp::corpus_bleu(
      {"the the the the the the the"}, {"the cat is on the mat"}, vnjp::Side::vi);
  require(clip.precisions[0] == 2.0 / 7.0, "clipped unigram precision is not exactly 2/7");

  // Brevity anchor: 5 hypothesis tokens against 10 reference tokens.
  const vnjp::BleuReport brevity = vnjp::corpus_bleu(
      {"một hai ba bốn năm"}, {"một hai ba bốn năm sáu bảy tám chín mười"}, vnjp::Side::vi);
  require(brevity.brevity_penalty == std::exp(-1.0),
          "half-length brevity penalty is not exactly exp(-1)");
}

// --- BM25 ranking against exhaustive scoring ---------------------------------

void check_bm25_oracle() {
  testsupport::TestRng rng(2202);
  for (int round = 0; round < 120; ++round) {
    const testsupport::RetrievalCase c = testsupport::random_retrieval_case(rng);

    vnjp::ParallelCorpus pool;
    std::vector<oracle::OracleDoc> docs;
    for (std::size_t d = 0; d < c.doc_tokens.size(); ++d) {
      pool.pairs.push_back({c.doc_ids[d], testsupport::join_words(c.doc_tokens[d]),
                            "訳", vnjp::Provenance::baseline, false});
      docs.push_back({c.doc_ids[d], c.doc_tokens[d]});
    }
    const vnjp::Bm25Index index = vnjp::Bm25Index::build(pool);

    std::optional<std::uint64_t> exclude;
    std::vector<std::uint64_t> oracle_exclude;
    if (rng.chance(0.5)) {
      exclude = c.doc_ids[rng.below(c.doc_ids.size())];
      oracle_exclude.push_back(*exclude);
    }

    const auto hits = index.top_k(testsupport::join_words(c.query_tokens), 3, exclude);
    const auto expected =
        oracle::oracle_top_k(docs, c.query_tokens, 3, 1.2, 0.75, oracle_exclude);

    const std::string tag = "round " + std::to_string(round);
    require(hits.size() == expected.size(),
            tag + ": got " + std::to_string(hits.size()) + " hits, want " +
                std::to_string(expected.size()));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      require(hits[i].doc_id == expected[i].id,
              tag + " rank " + std::to_string(i) + ": doc order differs");
      require_close(hits[i].score, expected[i].score, kBm25Tolerance,
                    tag + " rank " + std::to_string(i) + " score");
    }
  }
}

// --- threshold search against an exhaustive integer sweep --------------------

void check_threshold_targeting() {
  const vnjp::ParallelCorpus corpus = testsupport::make_zipf_corpus(10000);
  const vnjp::FrequencyTable table =
      vnjp::build_frequency_table(corpus, vnjp::Side::ja, vnjp::AnalysisTokenizer::script_words);
  const vnjp::ThresholdReport report =
      vnjp::select_threshold(table, corpus, 0.15, vnjp::AnalysisTokenizer::script_words);

  // Per-sentence minimum token frequency; no countable tokens means the
  // sentence can never be captured.
  std::vector<std::uint64_t> min_freq;
  for (const vnjp::SentencePair& p : corpus.pairs) {
    std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
    for (const std::string& t : vnjp::analysis_tokens(
             vnjp::side_text(p, vnjp::Side::ja), vnjp::Side::ja,
             vnjp::AnalysisTokenizer::script_words)) {
      m = std::min(m, table.frequency(t));
    }
    min_freq.push_back(m);
  }
  std::sort(min_freq.begin(), min_freq.end());

  std::uint64_t max_freq = 0;
  for (const auto& [token, freq] : table.counts) max_freq = std::max(max_freq, freq);

  const double n = static_cast<double>(corpus.pairs.size());
  std::uint64_t best_t = 0;
  double best_fraction = 0.0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::uint64_t t = 0; t <= max_freq + 1; ++t) {
    const auto captured =
        std::lower_bound(min_freq.begin(), min_freq.end(), t) - min_freq.begin();
    const double fraction = static_cast<double>(captured) / n;
    const double distance = std::fabs(fraction - 0.15);
    if (distance < best_distance) {
      best_distance = distance;
      best_t = t;
      best_fraction = fraction;
    }
  }

  require(report.threshold == best_t,
          "threshold " + std::to_string(report.threshold) + " differs from sweep winner " +
              std::to_string(best_t));
  require(report.flagged_fraction == best_fraction,
          "flagged fraction differs from the exhaustive sweep");

  // The chosen fraction beats every other candidate, and fractions grow
  // monotonically with the threshold.
  double previous = -1.0;
  for (const auto& [t, fraction] : report.candidate_fractions) {
    require(std::fabs(report.flagged_fraction - 0.15) <= std::fabs(fraction - 0.15) + 1e-15,
            "candidate T=" + std::to_string(t) + " lies closer to the target");
    require(fraction >= previous, "captured fraction shrank at T=" + std::to_string(t));
    previous = fraction;
  }
}

// --- merge size law over randomized corpora ----------------------------------

void check_merge_law() {
  testsupport::TestRng rng(3303);
  for (int round = 0; round < 1000; ++round) {
    const vnjp::ParallelCorpus corpus = testsupport::random_flagged_corpus(rng);

    std::vector<std::string> sources;
    std::unordered_map<std::string, std::size_t> flagged_per_source;
    std::size_t n_nonflagged = 0;
    for (const vnjp::SentencePair& p : corpus.pairs) {
      if (!p.flagged) {
        ++n_nonflagged;
        continue;
      }
      if (flagged_per_source.find(p.source_vi) == flagged_per_source.end()) {
        sources.push_back(p.source_vi);
      }
      ++flagged_per_source[p.source_vi];
    }

    // Synthetic couples per source: usually one per flagged pair, sometimes
    // fewer, sometimes none at all (a source whose refinement failed).
    std::vector<vnjp::SentencePair> synthetic;
    std::uint64_t next_id = corpus.pairs.empty() ? 0 : corpus.max_id() + 1;
    std::size_t n_refined = 0;
    for (const std::string& src : sources) {
      std::size_t couples = flagged_per_source[src];
      if (rng.chance(0.15)) {
        couples = 0;
      } else if (couples > 1 && rng.chance(0.2)) {
        couples = rng.between(1, couples);
      }
      for (std::size_t i = 0; i < couples; ++i) {
        synthetic.push_back({next_id++, src, "合成一", vnjp::Provenance::synthetic_t1, false});
        synthetic.push_back({next_id++, src, "合成二", vnjp::Provenance::synthetic_t2, false});
      }
      n_refined += couples;
    }

    std::vector<std::uint64_t> dropped;
    const vnjp::ParallelCorpus merged = vnjp::merge(corpus, synthetic, false, &dropped);

    const std::string tag = "round " + std::to_string(round);
    require(merged.pairs.size() == n_nonflagged + 2 * n_refined,
            tag + ": " + std::to_string(merged.pairs.size()) + " merged pairs, want " +
                std::to_string(n_nonflagged) + " + 2*" + std::to_string(n_refined));
    for (const vnjp::SentencePair& p : merged.pairs) {
      require(!(p.flagged && p.provenance == vnjp::Provenance::baseline),
              tag + ": flagged baseline pair " + std::to_string(p.id) + " survived");
    }
  }
}

// --- end-to-end determinism through the CLI ----------------------------------

void check_pipeline_determinism() {
  testsupport::TempDir work("vnjp_accept_e2e");
  const fs::path corpus_path = work / "corpus.tsv";
  vnjp::save_corpus(testsupport::make_fixture_corpus(1000), corpus_path);
  const fs::path out_dir = work / "out";
  const fs::path first = work / "first_run";

  const std::vector<std::string> args = {"pipeline", "--mock-backend", "--input",
                                         corpus_path.string(), "--output-dir",
                                         out_dir.string()};
  const testsupport::CliRun run1 = testsupport::run_cli(args);
  require(run1.exit_code == 0, "first pipeline run failed: " + run1.err);
  fs::create_directories(first);
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    fs::copy_file(entry.path(), first / entry.path().filename());
  }

  const testsupport::CliRun run2 = testsupport::run_cli(args);
  require(run2.exit_code == 0, "second pipeline run failed: " + run2.err);

  for (const char* name :
       {"threshold_report.json", "flagged.jsonl", "synthetic.jsonl", "failures.jsonl",
        "merged.jsonl", "train.jsonl", "val.jsonl", "test.jsonl", "training.jsonl"}) {
    require(testsupport::read_file(first / name) == testsupport::read_file(out_dir / name),
            std::string(name) + " differs between identical runs");
  }
  // The comparison must not be vacuous: the fixture has to flag sentences
  // and produce synthetic pairs.
  require(testsupport::read_file(out_dir / "flagged.jsonl").find("\"flagged\":true") !=
              std::string::npos,
          "fixture corpus flagged no sentences");
  require(!testsupport::read_file(out_dir / "synthetic.jsonl").empty(),
          "pipeline produced no synthetic pairs");

  auto manifest_a =
      nlohmann::ordered_json::parse(testsupport::read_file(first / "manifest_pipeline.json"));
  auto manifest_b =
      nlohmann::ordered_json::parse(testsupport::read_file(out_dir / "manifest_pipeline.json"));
  manifest_a.erase("timestamp");
  manifest_b.erase("timestamp");
  require(manifest_a == manifest_b, "manifests differ beyond the timestamp");
}

// --- split partition law over random corpora and seeds -----------------------

void check_split_partition() {
  testsupport::TestRng rng(4404);
  const auto& pool = testsupport::vietnamese_pool();
  for (int round = 0; round < 200; ++round) {
    vnjp::ParallelCorpus corpus;
    const std::size_t n = rng.between(3, 80);
    for (std::size_t i = 0; i < n; ++i) {
      vnjp::SentencePair pair;
      pair.id = static_cast<std::uint64_t>(i);
      if (i > 0 && rng.chance(0.25)) {
        pair.source_vi = corpus.pairs[rng.below(i)].source_vi;
      } else {
        pair.source_vi = rng.pick(pool) + " " + std::to_string(i);
      }
      pair.target_ja = "対訳" + std::to_string(i);
      corpus.pairs.push_back(std::move(pair));
    }

    vnjp::SplitSpec spec;
    spec.train = 0.8;
    spec.val = 0.1;
    spec.test = 0.1;
    spec.seed = rng.next_u64();

    const vnjp::SplitResult a = vnjp::split(corpus, spec);
    const vnjp::SplitResult b = vnjp::split(corpus, spec);
    const std::string tag = "round " + std::to_string(round);

    const auto ids_of = [](const vnjp::ParallelCorpus& part) {
      std::vector<std::uint64_t> ids;
      for (const auto& p : part.pairs) ids.push_back(p.id);
      return ids;
    };
    require(ids_of(a.train) == ids_of(b.train) && ids_of(a.val) == ids_of(b.val) &&
                ids_of(a.test) == ids_of(b.test),
            tag + ": same seed produced different splits");

    std::unordered_map<std::uint64_t, int> seen;
    std::unordered_map<std::string, int> part_of_source;
    const vnjp::ParallelCorpus* parts[] = {&a.train, &a.val, &a.test};
    for (int part = 0; part < 3; ++part) {
      for (const vnjp::SentencePair& p : parts[part]->pairs) {
        require(++seen[p.id] == 1, tag + ": pair " + std::to_string(p.id) + " in two parts");
        const auto [it, inserted] = part_of_source.emplace(p.source_vi, part);
        require(it->second == part,
                tag + ": source \"" + p.source_vi + "\" leaked across parts");
      }
    }
    require(seen.size() == n, tag + ": split lost pairs");
  }
}

// --- histogram conservation on the fixture corpus ----------------------------

void check_histogram_conservation() {
  const vnjp::ParallelCorpus corpus = testsupport::make_fixture_corpus(1000);
  for (const vnjp::Side side : {vnjp::Side::vi, vnjp::Side::ja}) {
    const vnjp::Histogram h = vnjp::token_count_histogram(corpus, side, 5);
    std::uint64_t total = 0;
    for (const auto& [bucket, count] : h.buckets) total += count;
    require(total == corpus.pairs.size(), "histogram loses or invents sentences");

    const std::string csv = h.to_csv();
    require(csv.rfind("bucket_start,count\n", 0) == 0, "CSV header missing");
    std::int64_t previous_start = -1;
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
      const std::size_t comma = csv.find(',', pos);
      const std::size_t eol = csv.find('\n', pos);
      require(comma != std::string::npos && eol != std::string::npos && comma < eol,
              "CSV row is not start,count");
      const long long start = std::stoll(csv.substr(pos, comma - pos));
      const long long count = std::stoll(csv.substr(comma + 1, eol - comma - 1));
      require(start % 5 == 0, "bucket start not aligned to the bucket width");
      require(start > previous_start, "bucket starts not ascending");
      require(count > 0, "empty bucket serialized");
      previous_start = start;
      pos = eol + 1;
    }
  }
}

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<void()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"corpus BLEU matches the brute-force oracle on 500 random corpora (tol 1e-9, "
       "exact 2/7 and exp(-1) anchors)",
       30.0, check_bleu_oracle},
      {"BM25 top-3 matches exhaustive scoring on 120 random corpora (tol 1e-12)", 30.0,
       check_bm25_oracle},
      {"threshold search matches an exhaustive sweep on a 10,000-sentence corpus", 10.0,
       check_threshold_targeting},
      {"merged corpus size law holds over 1000 randomized corpora", 30.0, check_merge_law},
      {"pipeline rerun with the mock backend is byte-identical on a 1000-pair corpus", 10.0,
       check_pipeline_determinism},
      {"splits are disjoint, complete and source-grouped over 200 corpora and seeds", 30.0,
       check_split_partition},
      {"token histograms conserve sentence counts and emit parseable CSV", 10.0,
       check_histogram_conservation},
  };

  bool all_ok = true;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.fn();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && elapsed > c.budget_seconds) {
      error = "runtime " + std::to_string(elapsed) + " s exceeds the " +
              std::to_string(c.budget_seconds) + " s budget";
    }
    if (error.empty()) {
      std::printf("[PASS] %s (%.2f s)\n", c.name, elapsed);
    } else {
      std::printf("[FAIL] %s (%.2f s): %s\n", c.name, elapsed, error.c_str());
      all_ok = false;
    }
  }
  return all_ok ? 0 : 1;
}
