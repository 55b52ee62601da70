#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "spellgcn/confusion.hpp"
#include "spellgcn/error.hpp"

namespace spellgcn {

// Reserved tokens are single codepoints so substitution corpora keep
// |source| == |target| even when a position is masked.
inline constexpr char32_t kPadChar = char32_t{0};
inline constexpr char32_t kUnkChar = U'\uFFFD';
inline constexpr char32_t kMaskChar = U'\uFFFC';

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kMaskId = 2;

// Character vocabulary. Ids 0..2 are always PAD, UNK, MASK.
class Vocab {
 public:
  Vocab() { for (char32_t c : {kPadChar, kUnkChar, kMaskChar}) intern(c); }

  explicit Vocab(const std::vector<char32_t>& chars) : Vocab() {
    for (char32_t c : chars) intern(c);
  }

  // Reserved tokens, then confusion-set characters in node-index order, then
  // any extra characters (e.g. from a corpus) in first-appearance order.
  static Vocab build(const ConfusionSet& cs,
                     const std::vector<std::u32string>& texts = {}) {
    Vocab v;
    for (char32_t c : cs.chars()) v.intern(c);
    for (const auto& t : texts) {
      for (char32_t c : t) v.intern(c);
    }
    return v;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<char32_t>& tokens() const noexcept { return tokens_; }
  char32_t token(std::size_t id) const { return tokens_[id]; }

  bool contains(char32_t c) const { return index_.count(c) > 0; }

  // Unknown characters map to UNK.
  std::size_t id_of(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnkId : it->second;
  }

  std::vector<std::size_t> encode(const std::u32string& text) const {
    std::vector<std::size_t> ids;
    ids.reserve(text.size());
    for (char32_t c : text) ids.push_back(id_of(c));
    return ids;
  }

  void intern(char32_t c) {
    if (index_.emplace(c, tokens_.size()).second) tokens_.push_back(c);
  }

 private:
  std::vector<char32_t> tokens_;
  std::unordered_map<char32_t, std::size_t> index_;
};

}  // namespace spellgcn
