#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "spellgcn/csr.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/matrix.hpp"

namespace spellgcn {

// Reverse-mode autodiff over dense matrices. A tape is built per forward
// pass; backward() runs the recorded closures in reverse. Gradients of
// shared nodes accumulate, so parameters may feed any number of ops.
//
// Node ids index into an internal vector; closures capture ids, never
// references, because the vector reallocates as the tape grows.
template <class Real>
class Tape {
 public:
  using Id = std::size_t;

  Id leaf(Matrix<Real> value, bool needs_grad = false) {
    return push(std::move(value), needs_grad, {});
  }

  Id constant(Matrix<Real> value) { return leaf(std::move(value), false); }

  const Matrix<Real>& value(Id id) const { return nodes_[id].value; }
  const Matrix<Real>& grad(Id id) const { return nodes_[id].grad; }
  bool needs_grad(Id id) const { return nodes_[id].needs_grad; }

  // Seeds d(root)/d(root) = 1 and propagates. `root` must be 1x1.
  void backward(Id root) {
    if (value(root).rows() != 1 || value(root).cols() != 1) {
      throw DimensionError("backward root must be a 1x1 scalar");
    }
    for (auto& n : nodes_) {
      n.grad = Matrix<Real>(n.value.rows(), n.value.cols());
    }
    nodes_[root].grad(0, 0) = Real(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].backward && nodes_[i].needs_grad) nodes_[i].backward();
    }
  }

  // ---- primitives ----

  Id add(Id a, Id b) {
    if (!value(a).same_shape(value(b))) throw DimensionError("tape add shape mismatch");
    Matrix<Real> out = spellgcn::add(value(a), value(b));
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](Id self) {
      if (needs_grad(a)) add_inplace(nodes_[a].grad, nodes_[self].grad);
      if (needs_grad(b)) add_inplace(nodes_[b].grad, nodes_[self].grad);
    });
  }

  Id scale(Id a, Real c) {
    return push(scaled(value(a), c), needs_grad(a), [this, a, c](Id self) {
      if (needs_grad(a)) add_inplace(nodes_[a].grad, nodes_[self].grad, c);
    });
  }

  Id hadamard(Id a, Id b) {
    if (!value(a).same_shape(value(b))) throw DimensionError("tape hadamard shape mismatch");
    Matrix<Real> out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= value(b).values()[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](Id self) {
      const auto& g = nodes_[self].grad;
      if (needs_grad(a)) {
        auto& ga = nodes_[a].grad;
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga.values()[i] += g.values()[i] * value(b).values()[i];
        }
      }
      if (needs_grad(b)) {
        auto& gb = nodes_[b].grad;
        for (std::size_t i = 0; i < gb.size(); ++i) {
          gb.values()[i] += g.values()[i] * value(a).values()[i];
        }
      }
    });
  }

  Id matmul(Id a, Id b, bool trans_a = false, bool trans_b = false) {
    Matrix<Real> out = spellgcn::matmul(value(a), value(b), trans_a, trans_b);
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [this, a, b, trans_a, trans_b](Id self) {
                  const auto& g = nodes_[self].grad;
                  // C = op(A) op(B); chain rule per flag combination.
                  if (needs_grad(a)) {
                    if (!trans_a) {
                      // dA = g op(B)^T
                      matmul_into(nodes_[a].grad, g, value(b), false, !trans_b, true);
                    } else {
                      // dA = (op(B) g^T)^T = op(B)... computed directly: dA = B' g with
                      // B' chosen so shapes line up: dA = op(B) g^T transposed.
                      matmul_into(nodes_[a].grad, value(b), g, trans_b, true, true);
                    }
                  }
                  if (needs_grad(b)) {
                    if (!trans_b) {
                      matmul_into(nodes_[b].grad, value(a), g, !trans_a, false, true);
                    } else {
                      matmul_into(nodes_[b].grad, g, value(a), true, trans_a, true);
                    }
                  }
                });
  }

  // out = A * h with A a symmetric constant sparse matrix (A^T = A, so the
  // backward product reuses A). The caller keeps `a` alive for the tape's
  // lifetime.
  Id spmm_sym(const Csr<Real>* a, Id h) {
    Matrix<Real> out = spmm(*a, value(h));
    return push(std::move(out), needs_grad(h), [this, a, h](Id self) {
      if (needs_grad(h)) spmm_accumulate(nodes_[h].grad, *a, nodes_[self].grad);
    });
  }

  // out[r] = src[ids[r]]. Repeated ids accumulate in backward.
  Id gather_rows(Id src, std::vector<std::size_t> ids) {
    const auto& s = value(src);
    Matrix<Real> out(ids.size(), s.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] >= s.rows()) throw DimensionError("gather_rows index out of range");
      for (std::size_t j = 0; j < s.cols(); ++j) out(r, j) = s(ids[r], j);
    }
    return push(std::move(out), needs_grad(src),
                [this, src, ids = std::move(ids)](Id self) {
                  if (!needs_grad(src)) return;
                  const auto& g = nodes_[self].grad;
                  auto& gs = nodes_[src].grad;
                  for (std::size_t r = 0; r < ids.size(); ++r) {
                    for (std::size_t j = 0; j < g.cols(); ++j) gs(ids[r], j) += g(r, j);
                  }
                });
  }

  // Classifier assembly: out row i = h[map[i]] when mapped, else e[i].
  Id mixed_rows(Id h, Id e, std::vector<std::optional<std::size_t>> map) {
    const auto& hv = value(h);
    const auto& ev = value(e);
    if (hv.cols() != ev.cols()) throw DimensionError("mixed_rows column mismatch");
    if (map.size() != ev.rows()) throw DimensionError("mixed_rows map size mismatch");
    Matrix<Real> out(ev.rows(), ev.cols());
    for (std::size_t i = 0; i < map.size(); ++i) {
      const Real* src = map[i] ? hv.row(*map[i]) : ev.row(i);
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = src[j];
    }
    return push(std::move(out), needs_grad(h) || needs_grad(e),
                [this, h, e, map = std::move(map)](Id self) {
                  const auto& g = nodes_[self].grad;
                  for (std::size_t i = 0; i < map.size(); ++i) {
                    if (map[i]) {
                      if (!needs_grad(h)) continue;
                      auto& gh = nodes_[h].grad;
                      for (std::size_t j = 0; j < g.cols(); ++j) gh(*map[i], j) += g(i, j);
                    } else if (needs_grad(e)) {
                      auto& ge = nodes_[e].grad;
                      for (std::size_t j = 0; j < g.cols(); ++j) ge(i, j) += g(i, j);
                    }
                  }
                });
  }

  Id concat_cols(Id a, Id b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    if (av.rows() != bv.rows()) throw DimensionError("concat_cols row mismatch");
    Matrix<Real> out(av.rows(), av.cols() + bv.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
      for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j);
      for (std::size_t j = 0; j < bv.cols(); ++j) out(i, av.cols() + j) = bv(i, j);
    }
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](Id self) {
      const auto& g = nodes_[self].grad;
      const std::size_t ac = value(a).cols();
      if (needs_grad(a)) {
        auto& ga = nodes_[a].grad;
        for (std::size_t i = 0; i < ga.rows(); ++i) {
          for (std::size_t j = 0; j < ac; ++j) ga(i, j) += g(i, j);
        }
      }
      if (needs_grad(b)) {
        auto& gb = nodes_[b].grad;
        for (std::size_t i = 0; i < gb.rows(); ++i) {
          for (std::size_t j = 0; j < gb.cols(); ++j) gb(i, j) += g(i, ac + j);
        }
      }
    });
  }

  Id slice_cols(Id a, std::size_t first, std::size_t count) {
    const auto& av = value(a);
    if (first + count > av.cols()) throw DimensionError("slice_cols out of range");
    Matrix<Real> out(av.rows(), count);
    for (std::size_t i = 0; i < av.rows(); ++i) {
      for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, first + j);
    }
    return push(std::move(out), needs_grad(a), [this, a, first, count](Id self) {
      if (!needs_grad(a)) return;
      const auto& g = nodes_[self].grad;
      auto& ga = nodes_[a].grad;
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < count; ++j) ga(i, first + j) += g(i, j);
      }
    });
  }

  // Row-wise softmax with max subtraction. `additive_mask`, when given, is
  // added to the logits first (use large negatives to exclude positions).
  Id softmax_rows(Id a, const Matrix<Real>* additive_mask = nullptr) {
    Matrix<Real> out = value(a);
    if (additive_mask) {
      if (!out.same_shape(*additive_mask)) throw DimensionError("softmax mask shape mismatch");
      add_inplace(out, *additive_mask);
    }
    for (std::size_t i = 0; i < out.rows(); ++i) {
      Real* row = out.row(i);
      Real mx = row[0];
      for (std::size_t j = 1; j < out.cols(); ++j) mx = std::max(mx, row[j]);
      Real sum = 0;
      for (std::size_t j = 0; j < out.cols(); ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < out.cols(); ++j) row[j] /= sum;
    }
    return push(std::move(out), needs_grad(a), [this, a](Id self) {
      if (!needs_grad(a)) return;
      const auto& y = nodes_[self].value;
      const auto& g = nodes_[self].grad;
      auto& ga = nodes_[a].grad;
      // dx = y .* (g - sum_j g_j y_j), per row.
      for (std::size_t i = 0; i < y.rows(); ++i) {
        Real dot = 0;
        for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
        for (std::size_t j = 0; j < y.cols(); ++j) {
          ga(i, j) += y(i, j) * (g(i, j) - dot);
        }
      }
    });
  }

  // out[i][j] = m[i][j] * c[i][0] with c an (R x 1) column.
  Id col_broadcast_mul(Id m, Id c) {
    const auto& mv = value(m);
    const auto& cv = value(c);
    if (cv.cols() != 1 || cv.rows() != mv.rows()) {
      throw DimensionError("col_broadcast_mul expects an (rows x 1) column");
    }
    Matrix<Real> out = mv;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= cv(i, 0);
    }
    return push(std::move(out), needs_grad(m) || needs_grad(c), [this, m, c](Id self) {
      const auto& g = nodes_[self].grad;
      if (needs_grad(m)) {
        auto& gm = nodes_[m].grad;
        for (std::size_t i = 0; i < gm.rows(); ++i) {
          for (std::size_t j = 0; j < gm.cols(); ++j) gm(i, j) += g(i, j) * value(c)(i, 0);
        }
      }
      if (needs_grad(c)) {
        auto& gc = nodes_[c].grad;
        for (std::size_t i = 0; i < gc.rows(); ++i) {
          Real acc = 0;
          for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * value(m)(i, j);
          gc(i, 0) += acc;
        }
      }
    });
  }

  // out[i][j] = m[i][j] + b[0][j] with b a (1 x C) row (bias add).
  Id row_broadcast_add(Id m, Id b) {
    const auto& mv = value(m);
    const auto& bv = value(b);
    if (bv.rows() != 1 || bv.cols() != mv.cols()) {
      throw DimensionError("row_broadcast_add expects a (1 x cols) row");
    }
    Matrix<Real> out = mv;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
    }
    return push(std::move(out), needs_grad(m) || needs_grad(b), [this, m, b](Id self) {
      const auto& g = nodes_[self].grad;
      if (needs_grad(m)) add_inplace(nodes_[m].grad, g);
      if (needs_grad(b)) {
        auto& gb = nodes_[b].grad;
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
        }
      }
    });
  }

  // Row-wise layer normalization with learnable gain/shift (1 x C each).
  Id layer_norm(Id x, Id gain, Id shift, Real eps = Real(1e-5)) {
    const auto& xv = value(x);
    const auto& gv = value(gain);
    const auto& sv = value(shift);
    if (gv.rows() != 1 || gv.cols() != xv.cols() || sv.rows() != 1 || sv.cols() != xv.cols()) {
      throw DimensionError("layer_norm gain/shift must be (1 x cols)");
    }
    const std::size_t c = xv.cols();
    Matrix<Real> xhat(xv.rows(), c);
    std::vector<Real> inv_std(xv.rows());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      Real mean = 0;
      for (std::size_t j = 0; j < c; ++j) mean += xv(i, j);
      mean /= static_cast<Real>(c);
      Real var = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const Real d = xv(i, j) - mean;
        var += d * d;
      }
      var /= static_cast<Real>(c);
      inv_std[i] = Real(1) / std::sqrt(var + eps);
      for (std::size_t j = 0; j < c; ++j) xhat(i, j) = (xv(i, j) - mean) * inv_std[i];
    }
    Matrix<Real> out(xv.rows(), c);
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      for (std::size_t j = 0; j < c; ++j) out(i, j) = xhat(i, j) * gv(0, j) + sv(0, j);
    }
    return push(std::move(out), needs_grad(x) || needs_grad(gain) || needs_grad(shift),
                [this, x, gain, shift, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Id self) {
                  const auto& g = nodes_[self].grad;
                  const auto& gv = value(gain);
                  const std::size_t c = g.cols();
                  if (needs_grad(gain) || needs_grad(shift)) {
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      for (std::size_t j = 0; j < c; ++j) {
                        if (needs_grad(gain)) nodes_[gain].grad(0, j) += g(i, j) * xhat(i, j);
                        if (needs_grad(shift)) nodes_[shift].grad(0, j) += g(i, j);
                      }
                    }
                  }
                  if (needs_grad(x)) {
                    auto& gx = nodes_[x].grad;
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      Real sum_dy = 0, sum_dy_xhat = 0;
                      for (std::size_t j = 0; j < c; ++j) {
                        const Real dy = g(i, j) * gv(0, j);
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat(i, j);
                      }
                      const Real inv_c = Real(1) / static_cast<Real>(c);
                      for (std::size_t j = 0; j < c; ++j) {
                        const Real dy = g(i, j) * gv(0, j);
                        gx(i, j) += inv_std[i] *
                                    (dy - inv_c * sum_dy - xhat(i, j) * inv_c * sum_dy_xhat);
                      }
                    }
                  }
                });
  }

  // Exact (erf-based) GELU; smooth, so central differences behave.
  Id gelu(Id a) {
    Matrix<Real> out = value(a);
    for (Real& v : out.values()) {
      v = Real(0.5) * v * (Real(1) + std::erf(v / std::numbers::sqrt2_v<Real>));
    }
    return push(std::move(out), needs_grad(a), [this, a](Id self) {
      if (!needs_grad(a)) return;
      const auto& g = nodes_[self].grad;
      auto& ga = nodes_[a].grad;
      const Real inv_sqrt2pi = Real(1) / std::sqrt(Real(2) * std::numbers::pi_v<Real>);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const Real x = value(a).values()[i];
        const Real cdf = Real(0.5) * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
        const Real pdf = inv_sqrt2pi * std::exp(Real(-0.5) * x * x);
        ga.values()[i] += g.values()[i] * (cdf + x * pdf);
      }
    });
  }

  Id sum_all(Id a) {
    Matrix<Real> out(1, 1);
    for (Real v : value(a).values()) out(0, 0) += v;
    return push(std::move(out), needs_grad(a), [this, a](Id self) {
      if (!needs_grad(a)) return;
      const Real g = nodes_[self].grad(0, 0);
      for (Real& v : nodes_[a].grad.values()) v += g;
    });
  }

  // Sum over included rows of -log softmax(logits[r])[target[r]], stable
  // log-sum-exp path. Returns a 1x1 node; rows with include=0 contribute
  // nothing. A target probability underflowing exp(-27.631) (the 1e-12
  // floor) is clamped and counted; its gradient row is dropped.
  Id nll_sum_from_logits(Id logits, const std::vector<std::size_t>& targets,
                         const std::vector<unsigned char>& include,
                         std::size_t* clamp_count = nullptr) {
    const auto& lv = value(logits);
    if (targets.size() != lv.rows() || include.size() != lv.rows()) {
      throw DimensionError("nll target/include size mismatch");
    }
    const Real max_nll = -std::log(Real(1e-12));
    Matrix<Real> out(1, 1);
    std::vector<unsigned char> clamped(lv.rows(), 0);
    for (std::size_t r = 0; r < lv.rows(); ++r) {
      if (!include[r]) continue;
      if (targets[r] >= lv.cols()) throw DimensionError("nll target id out of range");
      const Real* row = lv.row(r);
      Real mx = row[0];
      for (std::size_t j = 1; j < lv.cols(); ++j) mx = std::max(mx, row[j]);
      Real sum = 0;
      for (std::size_t j = 0; j < lv.cols(); ++j) sum += std::exp(row[j] - mx);
      Real nll = std::log(sum) + mx - row[targets[r]];
      if (nll > max_nll) {
        nll = max_nll;
        clamped[r] = 1;
        if (clamp_count) ++(*clamp_count);
      }
      out(0, 0) += nll;
    }
    return push(std::move(out), needs_grad(logits),
                [this, logits, targets, include, clamped = std::move(clamped)](Id self) {
                  if (!needs_grad(logits)) return;
                  const Real g = nodes_[self].grad(0, 0);
                  const auto& lv = value(logits);
                  auto& gl = nodes_[logits].grad;
                  for (std::size_t r = 0; r < lv.rows(); ++r) {
                    if (!include[r] || clamped[r]) continue;
                    const Real* row = lv.row(r);
                    Real mx = row[0];
                    for (std::size_t j = 1; j < lv.cols(); ++j) mx = std::max(mx, row[j]);
                    Real sum = 0;
                    for (std::size_t j = 0; j < lv.cols(); ++j) sum += std::exp(row[j] - mx);
                    for (std::size_t j = 0; j < lv.cols(); ++j) {
                      const Real p = std::exp(row[j] - mx) / sum;
                      gl(r, j) += g * (p - Real(j == targets[r] ? 1 : 0));
                    }
                  }
                });
  }

  std::size_t n_nodes() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix<Real> value;
    Matrix<Real> grad;
    std::function<void()> backward;
    bool needs_grad = false;
  };

  Id push(Matrix<Real> value, bool needs_grad, std::function<void(Id)> back) {
    const Id id = nodes_.size();
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (back && needs_grad) {
      n.backward = [back = std::move(back), id]() { back(id); };
    }
    nodes_.push_back(std::move(n));
    return id;
  }

  std::vector<Node> nodes_;
};

}  // namespace spellgcn
