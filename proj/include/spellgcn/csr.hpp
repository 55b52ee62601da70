#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "spellgcn/error.hpp"
#include "spellgcn/matrix.hpp"

namespace spellgcn {

// Compressed sparse row matrix with sorted column indices per row.
template <class Real>
struct Csr {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr;  // size n_rows + 1
  std::vector<std::size_t> col;      // size nnz
  std::vector<Real> val;             // size nnz

  std::size_t nnz() const noexcept { return col.size(); }

  Real at(std::size_t i, std::size_t j) const {
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      if (col[p] == j) return val[p];
    }
    return Real(0);
  }

  std::size_t row_nnz(std::size_t i) const { return row_ptr[i + 1] - row_ptr[i]; }

  Matrix<Real> to_dense() const {
    Matrix<Real> out(n_rows, n_cols);
    for (std::size_t i = 0; i < n_rows; ++i) {
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) out(i, col[p]) = val[p];
    }
    return out;
  }

  static Csr from_entries(std::size_t n_rows, std::size_t n_cols,
                          const std::map<std::pair<std::size_t, std::size_t>, Real>& entries) {
    Csr out;
    out.n_rows = n_rows;
    out.n_cols = n_cols;
    out.row_ptr.assign(n_rows + 1, 0);
    out.col.reserve(entries.size());
    out.val.reserve(entries.size());
    for (const auto& [ij, v] : entries) out.row_ptr[ij.first + 1]++;
    for (std::size_t i = 0; i < n_rows; ++i) out.row_ptr[i + 1] += out.row_ptr[i];
    // std::map iterates (row, col) in lexicographic order, so columns land sorted.
    for (const auto& [ij, v] : entries) {
      out.col.push_back(ij.second);
      out.val.push_back(v);
    }
    return out;
  }

  bool is_symmetric() const {
    for (std::size_t i = 0; i < n_rows; ++i) {
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
        if (at(col[p], i) != val[p]) return false;
      }
    }
    return true;
  }
};

// out = A * H, deterministic row-major accumulation.
template <class Real>
Matrix<Real> spmm(const Csr<Real>& a, const Matrix<Real>& h) {
  if (a.n_cols != h.rows()) throw DimensionError("spmm dimension mismatch");
  Matrix<Real> out(a.n_rows, h.cols());
  const std::size_t d = h.cols();
  for (std::size_t i = 0; i < a.n_rows; ++i) {
    Real* orow = out.row(i);
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const Real w = a.val[p];
      const Real* hrow = h.row(a.col[p]);
      for (std::size_t j = 0; j < d; ++j) orow[j] += w * hrow[j];
    }
  }
  return out;
}

template <class Real>
void spmm_accumulate(Matrix<Real>& out, const Csr<Real>& a, const Matrix<Real>& h) {
  if (a.n_cols != h.rows() || out.rows() != a.n_rows || out.cols() != h.cols()) {
    throw DimensionError("spmm accumulate dimension mismatch");
  }
  const std::size_t d = h.cols();
  for (std::size_t i = 0; i < a.n_rows; ++i) {
    Real* orow = out.row(i);
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const Real w = a.val[p];
      const Real* hrow = h.row(a.col[p]);
      for (std::size_t j = 0; j < d; ++j) orow[j] += w * hrow[j];
    }
  }
}

}  // namespace spellgcn
