#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "spellgcn/confusion.hpp"
#include "spellgcn/corpus.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/rng.hpp"
#include "spellgcn/vocab.hpp"

namespace spellgcn {

// Five-way replacement split for selected positions. Defaults follow the
// best-performing split: heavy masking, a sliver each of random vocabulary,
// identity, and similar-confusion replacement.
struct MaskPolicy {
  double p_mask = 0.800;
  double p_random_vocab = 0.066;
  double p_unchanged = 0.067;
  double p_confusion_similar = 0.067;
  double p_confusion_random = 0.000;
  double selection_rate = 0.15;

  std::array<double, 5> probs() const {
    return {p_mask, p_random_vocab, p_unchanged, p_confusion_similar, p_confusion_random};
  }

  // `allow_zero_rate` admits selection_rate = 0 (useful for no-op runs);
  // the CLI and pair generation require a strictly positive rate.
  void validate(bool allow_zero_rate = false) const {
    double sum = 0;
    for (double p : probs()) {
      if (p < 0) throw ConfigError("mask policy probabilities must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("mask policy probabilities must sum to 1");
    }
    const double lo_ok = allow_zero_rate ? (selection_rate >= 0) : (selection_rate > 0);
    if (!lo_ok || selection_rate > 1) {
      throw ConfigError(allow_zero_rate ? "selection_rate must be in [0, 1]"
                                        : "selection_rate must be in (0, 1]");
    }
  }
};

enum class CorruptAction {
  mask = 0,
  random_vocab = 1,
  unchanged = 2,
  confusion_similar = 3,
  confusion_random = 4,
};

struct CorruptionRecord {
  std::u32string original;
  std::u32string corrupted;
  std::vector<std::size_t> selected;    // positions, ascending
  std::vector<CorruptAction> actions;   // drawn action per selected position
  std::size_t similar_fallbacks = 0;    // action-4 draws on tokens without candidates
};

namespace detail {

inline CorruptAction draw_action(Rng& rng, const std::array<double, 5>& p) {
  const double u = rng.next_real();
  double acc = 0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return static_cast<CorruptAction>(k);
  }
  return CorruptAction::confusion_random;
}

inline CorruptionRecord corrupt_with_rng(const std::u32string& tokens, const MaskPolicy& policy,
                                         const ConfusionSet& cs, Rng& rng,
                                         const std::vector<char32_t>& vocab_pool) {
  if (tokens.empty()) throw DataError("corrupt: empty token sequence");
  if (policy.p_confusion_similar + policy.p_confusion_random > 0 && cs.chars().empty()) {
    throw ConfigError("confusion-set actions requested but the confusion set is empty");
  }
  if (policy.p_random_vocab > 0 && vocab_pool.empty()) {
    throw ConfigError("random-vocabulary action requested but the draw pool is empty");
  }

  CorruptionRecord rec;
  rec.original = tokens;
  rec.corrupted = tokens;
  const auto probs = policy.probs();
  const auto& universe = cs.chars();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (rng.next_real() >= policy.selection_rate) continue;
    rec.selected.push_back(i);
    const CorruptAction a = draw_action(rng, probs);
    rec.actions.push_back(a);
    switch (a) {
      case CorruptAction::mask:
        rec.corrupted[i] = kMaskChar;
        break;
      case CorruptAction::random_vocab:
        rec.corrupted[i] = vocab_pool[rng.next_index(vocab_pool.size())];
        break;
      case CorruptAction::unchanged:
        break;
      case CorruptAction::confusion_similar: {
        const auto& cands = cs.candidates_of(tokens[i]);
        if (cands.empty()) {
          ++rec.similar_fallbacks;
          rec.corrupted[i] = universe[rng.next_index(universe.size())];
        } else {
          rec.corrupted[i] = cands[rng.next_index(cands.size())];
        }
        break;
      }
      case CorruptAction::confusion_random:
        rec.corrupted[i] = universe[rng.next_index(universe.size())];
        break;
    }
  }
  return rec;
}

}  // namespace detail

// Each position is selected independently; selected positions draw one of
// the five actions. Deterministic given (tokens, policy, seed, pool).
inline CorruptionRecord corrupt(const std::u32string& tokens, const MaskPolicy& policy,
                                const ConfusionSet& cs, std::uint64_t seed,
                                const std::vector<char32_t>& vocab_pool = {}) {
  policy.validate(/*allow_zero_rate=*/true);
  Rng rng(seed);
  return detail::corrupt_with_rng(tokens, policy, cs, rng, vocab_pool);
}

// Synthetic aligned pairs: source = corrupted, target = clean. Only
// same-length real-character actions are allowed, so the pair invariant
// holds by construction. Sentences are corrupted on independent per-index
// streams; order does not couple their draws.
inline std::vector<Sample> make_csc_pairs(const std::vector<std::u32string>& clean,
                                          const MaskPolicy& policy, const ConfusionSet& cs,
                                          std::uint64_t seed) {
  policy.validate();
  if (policy.p_mask != 0 || policy.p_random_vocab != 0) {
    throw ConfigError("csc pairs need p_mask = p_random_vocab = 0 to stay real-character");
  }
  std::vector<Sample> out;
  out.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i].empty()) throw DataError("csc pairs: empty sentence at index " + std::to_string(i));
    Rng rng = Rng::indexed(seed, i);
    auto rec = detail::corrupt_with_rng(clean[i], policy, cs, rng, {});
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "synthetic-%06zu", i + 1);
    out.push_back({idbuf, std::move(rec.corrupted), std::move(rec.original)});
  }
  return out;
}

}  // namespace spellgcn
