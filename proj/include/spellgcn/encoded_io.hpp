#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "spellgcn/error.hpp"
#include "spellgcn/matrix.hpp"

namespace spellgcn {

// Pre-encoded representation exchange format: header `n: u32, d: u32`, then
// n*d little-endian 32-bit floats, row-major. Lets vectors computed by an
// external backbone flow into the classifier without training here.
static_assert(std::endian::native == std::endian::little,
              "encoded io assumes a little-endian host");

template <class Real>
void write_encoded(std::ostream& out, const Matrix<Real>& m) {
  const auto n = static_cast<std::uint32_t>(m.rows());
  const auto d = static_cast<std::uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  for (Real v : m.values()) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  if (!out) throw DataError("encoded io: write failed");
}

template <class Real>
Matrix<Real> read_encoded(std::istream& in) {
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  if (!in) throw DataError("encoded io: truncated header");
  Matrix<Real> m(n, d);
  for (Real& v : m.values()) {
    float f = 0;
    in.read(reinterpret_cast<char*>(&f), sizeof f);
    if (!in) throw DataError("encoded io: truncated data");
    v = static_cast<Real>(f);
  }
  return m;
}

template <class Real>
void write_encoded(const std::string& path, const Matrix<Real>& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open encoded file for writing: " + path);
  write_encoded(out, m);
}

template <class Real>
Matrix<Real> read_encoded_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open encoded file: " + path);
  return read_encoded<Real>(in);
}

}  // namespace spellgcn
