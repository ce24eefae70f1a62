#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vnjp/corpus.hpp"
#include "vnjp/errors.hpp"

namespace vnjp {

/// Replaces flagged baseline pairs with their synthetic refinements.
/// Output order: baseline pairs in corpus order, then synthetic couples
/// (t1, t2) grouped per source in flagged first-occurrence order.
/// `keep_flagged_baseline` preserves the replaced pairs for ablations.
/// Flagged pairs with no synthetic counterpart (failed refinement) are
/// reported through `dropped_unrefined` so callers can warn about them.
inline ParallelCorpus merge(const ParallelCorpus& corpus,
                            const std::vector<SentencePair>& synthetic,
                            bool keep_flagged_baseline = false,
                            std::vector<std::uint64_t>* dropped_unrefined = nullptr) {
  // Flagged sources in first-occurrence order define the synthetic layout.
  std::unordered_map<std::string, std::size_t> source_rank;
  std::vector<const std::string*> ranked_sources;
  for (const SentencePair& p : corpus.pairs) {
    if (!p.flagged) continue;
    if (source_rank.emplace(p.source_vi, ranked_sources.size()).second) {
      ranked_sources.push_back(&p.source_vi);
    }
  }

  struct Group {
    std::vector<const SentencePair*> t1, t2;
  };
  std::vector<Group> groups(ranked_sources.size());
  for (const SentencePair& s : synthetic) {
    if (s.provenance == Provenance::baseline) {
      throw IntegrityError("synthetic pair " + std::to_string(s.id) +
                           " has baseline provenance");
    }
    const auto it = source_rank.find(s.source_vi);
    if (it == source_rank.end()) {
      throw IntegrityError("synthetic pair " + std::to_string(s.id) +
                           " source matches no flagged pair");
    }
    Group& g = groups[it->second];
    (s.provenance == Provenance::synthetic_t1 ? g.t1 : g.t2).push_back(&s);
  }

  ParallelCorpus out;
  out.metadata = corpus.metadata;
  for (const SentencePair& p : corpus.pairs) {
    if (p.flagged && !keep_flagged_baseline) continue;
    out.pairs.push_back(p);
  }
  for (std::size_t rank = 0; rank < groups.size(); ++rank) {
    const Group& g = groups[rank];
    if (g.t1.size() != g.t2.size()) {
      throw IntegrityError("source \"" + *ranked_sources[rank] + "\" has " +
                           std::to_string(g.t1.size()) + " t1 but " +
                           std::to_string(g.t2.size()) + " t2 synthetic pairs");
    }
    if (g.t1.empty() && dropped_unrefined) {
      for (const SentencePair& p : corpus.pairs) {
        if (p.flagged && p.source_vi == *ranked_sources[rank]) {
          dropped_unrefined->push_back(p.id);
        }
      }
    }
    for (std::size_t i = 0; i < g.t1.size(); ++i) {
      out.pairs.push_back(*g.t1[i]);
      out.pairs.push_back(*g.t2[i]);
    }
  }
  validate_corpus(out);
  return out;
}

/// Split ratios plus the shuffle seed. Ratios must sum to 1.
struct SplitSpec {
  double train = 0.9;
  double val = 0.05;
  double test = 0.05;
  std::uint64_t seed = 42;

  bool operator==(const SplitSpec&) const = default;

  void validate() const {
    if (train < 0.0 || val < 0.0 || test < 0.0) {
      throw ConfigError("split ratios must be non-negative");
    }
    if (std::fabs(train + val + test - 1.0) > 1e-9) {
      throw ConfigError("split ratios must sum to 1");
    }
  }
};

struct SplitResult {
  ParallelCorpus train, val, test;
};

namespace detail {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic source-grouped split. Pairs sharing a source_vi always
/// land in one part, so dual-temperature duplicates cannot leak across
/// splits. Groups are shuffled by a splitmix64-driven Fisher-Yates; target
/// sizes use floor allocation with the remainder going to train. A
/// multi-pair group fills its part past the target, shrinking later parts.
inline SplitResult split(const ParallelCorpus& corpus, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = corpus.pairs.size();
  if (n < 3 && spec.train > 0.0 && spec.val > 0.0 && spec.test > 0.0) {
    throw IntegrityError("corpus of " + std::to_string(n) +
                         " pairs cannot populate three non-empty splits");
  }

  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [it, inserted] = group_of.emplace(corpus.pairs[i].source_vi, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::uint64_t state = spec.seed;
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(detail::splitmix64_next(state) % i);
    std::swap(order[i - 1], order[j]);
  }

  const std::size_t n_train = static_cast<std::size_t>(std::floor(spec.train * n));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(spec.val * n));
  const std::size_t n_test = static_cast<std::size_t>(std::floor(spec.test * n));
  const std::size_t target_train = n_train + (n - n_train - n_val - n_test);

  SplitResult result;
  result.train.metadata = corpus.metadata;
  result.val.metadata = corpus.metadata;
  result.test.metadata = corpus.metadata;
  std::size_t in_train = 0, in_val = 0;
  for (const std::size_t gi : order) {
    ParallelCorpus* part;
    if (in_train < target_train) {
      part = &result.train;
      in_train += groups[gi].size();
    } else if (in_val < n_val) {
      part = &result.val;
      in_val += groups[gi].size();
    } else {
      part = &result.test;
    }
    for (const std::size_t pi : groups[gi]) part->pairs.push_back(corpus.pairs[pi]);
  }
  return result;
}

inline constexpr const char* default_export_instruction =
    "Translate the following Vietnamese sentence into Japanese.";

/// Chat-format fine-tuning export: one JSON object per pair with a user
/// turn (instruction + source) and an assistant turn (target).
inline void export_training(const ParallelCorpus& corpus, const std::filesystem::path& path,
                            std::string_view instruction = default_export_instruction) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const SentencePair& p : corpus.pairs) {
    const std::string& target = side_text(p, Side::ja);
    std::string user_content;
    if (!instruction.empty()) {
      user_content = std::string(instruction) + "\n" + p.source_vi;
    } else {
      user_content = p.source_vi;
    }
    json j;
    j["messages"] = json::array({json{{"role", "user"}, {"content", user_content}},
                                 json{{"role", "assistant"}, {"content", target}}});
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vnjp
