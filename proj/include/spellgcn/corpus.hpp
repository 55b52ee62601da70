#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "spellgcn/error.hpp"
#include "spellgcn/utf8.hpp"

namespace spellgcn {

// One aligned pair. The task is substitution-only, so source and target
// always have the same length.
struct Sample {
  std::string id;
  std::u32string source;
  std::u32string target;
};

// TSV lines `id <TAB> source <TAB> target`, UTF-8. Blank lines are skipped.
inline std::vector<Sample> load_parallel_corpus(std::istream& in) {
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError(line_no, "expected exactly 3 tab-separated fields");
    }
    Sample s;
    s.id = line.substr(0, t1);
    try {
      s.source = utf8_decode(line.substr(t1 + 1, t2 - t1 - 1));
      s.target = utf8_decode(line.substr(t2 + 1));
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
    if (s.source.size() != s.target.size()) {
      throw DataError("sample '" + s.id + "': source length " +
                      std::to_string(s.source.size()) + " != target length " +
                      std::to_string(s.target.size()));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sample> load_parallel_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  return load_parallel_corpus(in);
}

}  // namespace spellgcn
