#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "spellgcn/error.hpp"

namespace spellgcn {

// Dense row-major matrix. Sized for desk-scale models (N up to a few
// thousand, D up to a few hundred); all loops are single-threaded and
// deterministic in summation order.
template <class Real>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Real(0)) {}

  Matrix(std::initializer_list<std::initializer_list<Real>> init) {
    rows_ = init.size();
    cols_ = rows_ == 0 ? 0 : init.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw DimensionError("ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  Real& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }
  std::vector<Real>& values() noexcept { return data_; }
  const std::vector<Real>& values() const noexcept { return data_; }

  Real* row(std::size_t i) noexcept { return data_.data() + i * cols_; }
  const Real* row(std::size_t i) const noexcept { return data_.data() + i * cols_; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(Real(0)); }

  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    for (Real v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <class Other>
  Matrix<Other> cast() const {
    Matrix<Other> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out.values()[i] = static_cast<Other>(data_[i]);
    }
    return out;
  }

  static Matrix identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = Real(1);
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

namespace detail {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

// C += or = op(A) * op(B). Plain ikj loops; plenty at this scale.
template <class Real>
void matmul_into(Matrix<Real>& out, const Matrix<Real>& a, const Matrix<Real>& b,
                 bool trans_a, bool trans_b, bool accumulate) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != kb) {
    throw DimensionError("matmul inner dimension mismatch: " +
                         detail::shape_str(a.rows(), a.cols()) + " vs " +
                         detail::shape_str(b.rows(), b.cols()));
  }
  if (out.rows() != m || out.cols() != n) {
    if (accumulate) throw DimensionError("matmul accumulate shape mismatch");
    out = Matrix<Real>(m, n);
  } else if (!accumulate) {
    out.set_zero();
  }
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const Real* arow = a.row(i);
      Real* orow = out.row(i);
      for (std::size_t p = 0; p < k; ++p) {
        const Real av = arow[p];
        if (av == Real(0)) continue;
        const Real* brow = b.row(p);
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const Real* arow = a.row(i);
      Real* orow = out.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        const Real* brow = b.row(j);
        Real acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        orow[j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real* arow = a.row(p);
      const Real* brow = b.row(p);
      for (std::size_t i = 0; i < m; ++i) {
        const Real av = arow[i];
        if (av == Real(0)) continue;
        Real* orow = out.row(i);
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      Real* orow = out.row(i);
      for (std::size_t p = 0; p < k; ++p) {
        const Real av = a(p, i);
        if (av == Real(0)) continue;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * b(j, p);
      }
    }
  }
}

template <class Real>
Matrix<Real> matmul(const Matrix<Real>& a, const Matrix<Real>& b,
                    bool trans_a = false, bool trans_b = false) {
  Matrix<Real> out;
  matmul_into(out, a, b, trans_a, trans_b, /*accumulate=*/false);
  return out;
}

template <class Real>
Matrix<Real> add(const Matrix<Real>& a, const Matrix<Real>& b) {
  if (!a.same_shape(b)) throw DimensionError("add shape mismatch");
  Matrix<Real> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

template <class Real>
void add_inplace(Matrix<Real>& a, const Matrix<Real>& b, Real scale = Real(1)) {
  if (!a.same_shape(b)) throw DimensionError("add shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] += scale * b.values()[i];
}

template <class Real>
Matrix<Real> scaled(const Matrix<Real>& a, Real c) {
  Matrix<Real> out = a;
  for (Real& v : out.values()) v *= c;
  return out;
}

template <class Real>
double max_abs_diff(const Matrix<Real>& a, const Matrix<Real>& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff shape mismatch");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.values()[i]) -
                             static_cast<double>(b.values()[i])));
  }
  return m;
}

template <class Real>
bool bit_equal(const Matrix<Real>& a, const Matrix<Real>& b) {
  return a.same_shape(b) && a.values() == b.values();
}

}  // namespace spellgcn
