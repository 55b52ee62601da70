#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "spellgcn/error.hpp"
#include "spellgcn/matrix.hpp"
#include "spellgcn/param.hpp"
#include "spellgcn/vocab.hpp"

namespace spellgcn {

template <class Real>
struct AdamWConfig {
  Real learning_rate = Real(5e-5);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
  Real weight_decay = Real(0.01);
};

// Decoupled weight decay: theta = theta*(1 - lr*wd) - lr*mhat/(sqrt(vhat)+eps).
// Decay never enters the moments, so lr = 0 leaves parameters bit-identical
// and a zero-gradient step is exactly the decay factor.
template <class Real>
class AdamW {
 public:
  AdamW(std::vector<ParamRef<Real>> params, const AdamWConfig<Real>& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor->rows(), p.tensor->cols());
      v_.emplace_back(p.tensor->rows(), p.tensor->cols());
    }
  }

  std::size_t step_count() const noexcept { return t_; }
  const std::vector<ParamRef<Real>>& params() const noexcept { return params_; }

  // `grads` parallel to the parameter list, same shapes.
  void step(const std::vector<Matrix<Real>>& grads) {
    if (grads.size() != params_.size()) throw DimensionError("adamw: gradient count mismatch");
    ++t_;
    const Real bc1 = Real(1) - std::pow(cfg_.beta1, static_cast<Real>(t_));
    const Real bc2 = Real(1) - std::pow(cfg_.beta2, static_cast<Real>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Matrix<Real>& theta = *params_[i].tensor;
      if (!grads[i].same_shape(theta)) throw DimensionError("adamw: gradient shape mismatch");
      const Real decay_factor =
          params_[i].decay ? Real(1) - cfg_.learning_rate * cfg_.weight_decay : Real(1);
      const std::size_t cols = theta.cols();
      Matrix<Real>& m = m_[i];
      Matrix<Real>& v = v_[i];
      for (std::size_t r = 0; r < theta.rows(); ++r) {
        const bool frozen = params_[i].freeze_pad_row && r == kPadId;
        for (std::size_t c = 0; c < cols; ++c) {
          const Real g = frozen ? Real(0) : grads[i](r, c);
          m(r, c) = cfg_.beta1 * m(r, c) + (Real(1) - cfg_.beta1) * g;
          v(r, c) = cfg_.beta2 * v(r, c) + (Real(1) - cfg_.beta2) * g * g;
          const Real mhat = m(r, c) / bc1;
          const Real vhat = v(r, c) / bc2;
          Real x = theta(r, c) * decay_factor;
          x -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
          theta(r, c) = frozen ? theta(r, c) : x;
        }
      }
    }
  }

 private:
  std::vector<ParamRef<Real>> params_;
  AdamWConfig<Real> cfg_;
  std::vector<Matrix<Real>> m_;
  std::vector<Matrix<Real>> v_;
  std::size_t t_ = 0;
};

}  // namespace spellgcn
