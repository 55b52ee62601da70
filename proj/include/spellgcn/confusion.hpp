#pragma once

#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spellgcn/error.hpp"
#include "spellgcn/utf8.hpp"

namespace spellgcn {

struct ConfusionEntry {
  char32_t ch;
  int category;  // 1 = similar shape, 2..5 = pronunciation similarity grades
  char32_t candidate;

  friend bool operator==(const ConfusionEntry&, const ConfusionEntry&) = default;
};

// Categorized similar-character pairs plus a dense node index over every
// character that appears on either side of any pair.
class ConfusionSet {
 public:
  ConfusionSet() = default;

  explicit ConfusionSet(const std::vector<ConfusionEntry>& raw_entries) {
    std::set<std::tuple<char32_t, int, char32_t>> seen;
    for (const auto& e : raw_entries) {
      if (e.category < 1 || e.category > 5) {
        throw DataError("confusion category must be in 1..5");
      }
      if (!seen.insert({e.ch, e.category, e.candidate}).second) continue;
      entries_.push_back(e);
      intern(e.ch);
      intern(e.candidate);
    }
    candidates_.resize(chars_.size());
    for (const auto& e : entries_) {
      candidates_[char_index_.at(e.ch)].push_back(e.candidate);
    }
  }

  const std::vector<ConfusionEntry>& entries() const noexcept { return entries_; }
  std::size_t n_nodes() const noexcept { return chars_.size(); }
  const std::vector<char32_t>& chars() const noexcept { return chars_; }

  bool contains(char32_t c) const { return char_index_.count(c) > 0; }

  std::size_t node_id(char32_t c) const {
    auto it = char_index_.find(c);
    if (it == char_index_.end()) throw DataError("character not in confusion set");
    return it->second;
  }

  // Confusion candidates listed for `c` (the right-hand sides of its entries,
  // duplicates across categories preserved in entry order). Empty if `c`
  // never appears on the left-hand side.
  const std::vector<char32_t>& candidates_of(char32_t c) const {
    static const std::vector<char32_t> kEmpty;
    auto it = char_index_.find(c);
    if (it == char_index_.end()) return kEmpty;
    return candidates_[it->second];
  }

 private:
  void intern(char32_t c) {
    if (char_index_.emplace(c, chars_.size()).second) chars_.push_back(c);
  }

  std::vector<ConfusionEntry> entries_;
  std::vector<char32_t> chars_;  // node id -> character, first-appearance order
  std::unordered_map<char32_t, std::size_t> char_index_;
  std::vector<std::vector<char32_t>> candidates_;
};

namespace detail {

inline char32_t single_codepoint_field(const std::string& field, std::size_t line_no,
                                       const char* what) {
  std::u32string decoded;
  try {
    decoded = utf8_decode(field);
  } catch (const Error& e) {
    throw ParseError(line_no, std::string(what) + ": " + e.what());
  }
  if (decoded.size() != 1) {
    throw ParseError(line_no, std::string(what) + " must be exactly one codepoint, got \"" +
                                  field + "\"");
  }
  return decoded[0];
}

}  // namespace detail

// Canonical confusion-set format: TSV lines `char <TAB> category <TAB>
// candidate`, UTF-8. Blank lines and lines starting with '#' are skipped.
inline ConfusionSet parse_confusion_set(std::istream& in) {
  std::vector<ConfusionEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }

    const char32_t ch = detail::single_codepoint_field(fields[0], line_no, "char field");
    int category = 0;
    try {
      std::size_t used = 0;
      category = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(line_no, "category is not an integer: \"" + fields[1] + "\"");
    }
    if (category < 1 || category > 5) {
      throw ParseError(line_no, "category must be in 1..5, got " + std::to_string(category));
    }
    const char32_t cand = detail::single_codepoint_field(fields[2], line_no, "candidate field");
    entries.push_back({ch, category, cand});
  }
  return ConfusionSet(entries);
}

inline ConfusionSet parse_confusion_set(const std::string& text) {
  std::istringstream in(text);
  return parse_confusion_set(in);
}

}  // namespace spellgcn
