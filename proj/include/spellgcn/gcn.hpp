#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spellgcn/csr.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/matrix.hpp"
#include "spellgcn/param.hpp"
#include "spellgcn/rng.hpp"
#include "spellgcn/tape.hpp"

namespace spellgcn {

enum class CombineMode { attention, mean, sum };

inline CombineMode parse_combine_mode(const std::string& s) {
  if (s == "attention") return CombineMode::attention;
  if (s == "mean") return CombineMode::mean;
  if (s == "sum") return CombineMode::sum;
  throw ConfigError("unknown combine mode '" + s + "' (expected attention, mean or sum)");
}

inline std::string to_string(CombineMode m) {
  switch (m) {
    case CombineMode::attention: return "attention";
    case CombineMode::mean: return "mean";
    case CombineMode::sum: return "sum";
  }
  throw ConfigError("invalid combine mode value");
}

// Graph index convention: 0 = pronunciation, 1 = shape, everywhere.
inline constexpr std::size_t kPronSlot = 0;
inline constexpr std::size_t kShapeSlot = 1;

template <class Real>
struct SpellGcnParams {
  std::size_t depth = 2;
  Real beta = Real(3);
  CombineMode mode = CombineMode::attention;
  std::vector<std::array<Matrix<Real>, 2>> w;  // [layer][graph], each D x D
  Matrix<Real> w_a;                            // D x 1, only in attention mode

  // Near-identity weights keep early classifier rows close to the raw
  // embedding space; the noise breaks symmetry between the graphs.
  static SpellGcnParams init(std::size_t dim, std::size_t depth, Real beta, CombineMode mode,
                             std::uint64_t seed) {
    SpellGcnParams p;
    p.depth = depth;
    p.beta = beta;
    p.mode = mode;
    p.w.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      for (std::size_t k = 0; k < 2; ++k) {
        const std::string name =
            "gcn.l" + std::to_string(l) + (k == kPronSlot ? ".w_pron" : ".w_shape");
        Rng rng = Rng::named(seed, name);
        Matrix<Real> m = Matrix<Real>::identity(dim);
        for (Real& v : m.values()) v += static_cast<Real>(rng.uniform(-0.01, 0.01));
        p.w[l][k] = std::move(m);
      }
    }
    if (mode == CombineMode::attention) {
      Rng rng = Rng::named(seed, "gcn.w_a");
      p.w_a = Matrix<Real>(dim, 1);
      for (Real& v : p.w_a.values()) v = static_cast<Real>(rng.uniform(-0.1, 0.1));
    }
    p.validate();
    return p;
  }

  std::size_t dim() const { return w.empty() ? 0 : w[0][0].rows(); }

  void validate() const {
    if (depth < 1) throw ConfigError("gcn depth must be >= 1");
    if (!(beta > Real(0))) throw ConfigError("beta must be positive");
    if (w.size() != depth) throw ConfigError("expected one weight pair per layer");
    const std::size_t d = dim();
    for (const auto& pair : w) {
      for (const auto& m : pair) {
        if (m.rows() != d || m.cols() != d) throw DimensionError("gcn weights must be D x D");
      }
    }
    const bool has_wa = w_a.rows() > 0;
    if (has_wa != (mode == CombineMode::attention)) {
      throw ConfigError("w_a must be present exactly when mode is attention");
    }
    if (has_wa && (w_a.rows() != d || w_a.cols() != 1)) {
      throw DimensionError("w_a must be D x 1");
    }
  }

  std::vector<ParamRef<Real>> params() {
    std::vector<ParamRef<Real>> out;
    for (std::size_t l = 0; l < w.size(); ++l) {
      out.push_back({"gcn.l" + std::to_string(l) + ".w_pron", &w[l][kPronSlot]});
      out.push_back({"gcn.l" + std::to_string(l) + ".w_shape", &w[l][kShapeSlot]});
    }
    if (w_a.rows() > 0) out.push_back({"gcn.w_a", &w_a, false});
    return out;
  }
};

// Full forward record: H[0..L], C[0..L-1], per-layer graph weights alpha
// (N x 2). Immutable once returned.
template <class Real>
struct GcnTrace {
  std::vector<Matrix<Real>> h;
  std::vector<Matrix<Real>> c;
  std::vector<Matrix<Real>> alpha;

  const Matrix<Real>& final_output() const { return h.back(); }
};

// One graph convolution: normalized adjacency times H times W, and nothing
// else (an activation here measurably hurts, so none is offered).
template <class Real>
Matrix<Real> graph_conv(const Csr<Real>& norm_adj, const Matrix<Real>& h, const Matrix<Real>& w) {
  if (norm_adj.n_cols != h.rows()) throw DimensionError("graph_conv: adjacency/H mismatch");
  if (h.cols() != w.rows()) throw DimensionError("graph_conv: H/W mismatch");
  return matmul(spmm(norm_adj, h), w);
}

template <class Real>
Matrix<Real> graph_conv(const Matrix<Real>& norm_adj, const Matrix<Real>& h,
                        const Matrix<Real>& w) {
  if (norm_adj.cols() != h.rows()) throw DimensionError("graph_conv: adjacency/H mismatch");
  if (h.cols() != w.rows()) throw DimensionError("graph_conv: H/W mismatch");
  return matmul(matmul(norm_adj, h), w);
}

template <class Real>
struct CombineResult {
  Matrix<Real> combined;  // N x D
  Matrix<Real> alpha;     // N x 2
};

// Per-node softmax over the two graphs, scores (w_a . F_k[i]) / beta.
template <class Real>
CombineResult<Real> attentive_combine(const Matrix<Real>& f_pron, const Matrix<Real>& f_shape,
                                      const Matrix<Real>& w_a, Real beta) {
  if (!f_pron.same_shape(f_shape)) throw DimensionError("attentive_combine: shape mismatch");
  if (w_a.rows() != f_pron.cols() || w_a.cols() != 1) {
    throw DimensionError("attentive_combine: w_a must be D x 1");
  }
  if (!(beta > Real(0))) throw ConfigError("beta must be positive");
  if (!f_pron.all_finite() || !f_shape.all_finite() || !w_a.all_finite()) {
    throw NumericError("attentive_combine: non-finite input");
  }
  const std::size_t n = f_pron.rows();
  const std::size_t d = f_pron.cols();
  CombineResult<Real> out{Matrix<Real>(n, d), Matrix<Real>(n, 2)};
  for (std::size_t i = 0; i < n; ++i) {
    Real s[2] = {Real(0), Real(0)};
    for (std::size_t j = 0; j < d; ++j) {
      s[0] += w_a(j, 0) * f_pron(i, j);
      s[1] += w_a(j, 0) * f_shape(i, j);
    }
    s[0] /= beta;
    s[1] /= beta;
    const Real m = std::max(s[0], s[1]);
    const Real e0 = std::exp(s[0] - m);
    const Real e1 = std::exp(s[1] - m);
    const Real z = e0 + e1;
    const Real a0 = e0 / z;
    const Real a1 = e1 / z;
    out.alpha(i, 0) = a0;
    out.alpha(i, 1) = a1;
    for (std::size_t j = 0; j < d; ++j) {
      out.combined(i, j) = a0 * f_pron(i, j) + a1 * f_shape(i, j);
    }
  }
  return out;
}

// Ablation alternatives: fixed per-graph weights instead of learned ones.
template <class Real>
Matrix<Real> pooled_combine(const Matrix<Real>& f_pron, const Matrix<Real>& f_shape,
                            CombineMode mode) {
  if (!f_pron.same_shape(f_shape)) throw DimensionError("pooled_combine: shape mismatch");
  if (mode == CombineMode::attention) {
    throw ConfigError("pooled_combine handles mean and sum only");
  }
  Matrix<Real> out = add(f_pron, f_shape);
  if (mode == CombineMode::mean) {
    for (Real& v : out.values()) v *= Real(0.5);
  }
  return out;
}

namespace detail {

template <class Real>
Matrix<Real> constant_alpha(std::size_t n, Real value) {
  Matrix<Real> a(n, 2);
  a.fill(value);
  return a;
}

}  // namespace detail

// Stacked forward pass. Layer l combines the two convolutions into C[l],
// then H[l+1] = C[l] + sum of all earlier H (the initial features included);
// the running sum keeps that exact.
template <class Real>
GcnTrace<Real> forward(const SpellGcnParams<Real>& params, const Csr<Real>& norm_adj_pron,
                       const Csr<Real>& norm_adj_shape, const Matrix<Real>& h0) {
  params.validate();
  const std::size_t n = h0.rows();
  if (norm_adj_pron.n_rows != n || norm_adj_pron.n_cols != n || norm_adj_shape.n_rows != n ||
      norm_adj_shape.n_cols != n) {
    throw DimensionError("forward: adjacency size must match H0 rows");
  }
  if (h0.cols() != params.dim()) throw DimensionError("forward: H0 width must match weights");

  GcnTrace<Real> trace;
  trace.h.push_back(h0);
  Matrix<Real> acc = h0;  // sum of H[0..l]
  for (std::size_t l = 0; l < params.depth; ++l) {
    const Matrix<Real> f_pron = graph_conv(norm_adj_pron, trace.h.back(), params.w[l][kPronSlot]);
    const Matrix<Real> f_shape =
        graph_conv(norm_adj_shape, trace.h.back(), params.w[l][kShapeSlot]);
    Matrix<Real> c;
    Matrix<Real> alpha;
    if (params.mode == CombineMode::attention) {
      auto r = attentive_combine(f_pron, f_shape, params.w_a, params.beta);
      c = std::move(r.combined);
      alpha = std::move(r.alpha);
    } else {
      c = pooled_combine(f_pron, f_shape, params.mode);
      alpha = detail::constant_alpha<Real>(
          n, params.mode == CombineMode::mean ? Real(0.5) : Real(1));
    }
    Matrix<Real> h_next = add(c, acc);
    add_inplace(acc, h_next);
    trace.c.push_back(std::move(c));
    trace.alpha.push_back(std::move(alpha));
    trace.h.push_back(std::move(h_next));
  }
  return trace;
}

// Classifier rows: graph output for characters inside the confusion
// universe, untouched embedding rows for everything else. Exact copies.
template <class Real>
Matrix<Real> assemble_classifier(const Matrix<Real>& h_last, const Matrix<Real>& embedding,
                                 const std::vector<std::optional<std::size_t>>& index_map) {
  if (h_last.cols() != embedding.cols()) {
    throw DimensionError("assemble_classifier: width mismatch");
  }
  if (index_map.size() != embedding.rows()) {
    throw DimensionError("assemble_classifier: index_map must cover the vocabulary");
  }
  Matrix<Real> w(embedding.rows(), embedding.cols());
  for (std::size_t i = 0; i < index_map.size(); ++i) {
    if (index_map[i] && *index_map[i] >= h_last.rows()) {
      throw DimensionError("assemble_classifier: node index out of range");
    }
    const Real* src = index_map[i] ? h_last.row(*index_map[i]) : embedding.row(i);
    for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) = src[j];
  }
  return w;
}

// softmax(W v) with max subtraction.
template <class Real>
std::vector<Real> predict_distribution(const Matrix<Real>& w, const std::vector<Real>& v) {
  if (v.size() != w.cols()) throw DimensionError("predict_distribution: vector width mismatch");
  const std::size_t m = w.rows();
  if (m == 0) throw DimensionError("predict_distribution: empty classifier");
  std::vector<Real> logits(m, Real(0));
  for (std::size_t i = 0; i < m; ++i) {
    const Real* row = w.row(i);
    Real s = Real(0);
    for (std::size_t j = 0; j < v.size(); ++j) s += row[j] * v[j];
    logits[i] = s;
  }
  Real mx = logits[0];
  for (Real x : logits) mx = std::max(mx, x);
  Real z = Real(0);
  for (Real& x : logits) {
    x = std::exp(x - mx);
    z += x;
  }
  for (Real& x : logits) x /= z;
  return logits;
}

template <class Real>
struct NllResult {
  Real loss = Real(0);
  std::size_t clamped = 0;  // targets whose probability hit the 1e-12 floor
};

// Mean negated log-likelihood over positions.
template <class Real>
NllResult<Real> nll_loss(const std::vector<std::vector<Real>>& distributions,
                         const std::vector<std::size_t>& targets) {
  if (distributions.size() != targets.size()) {
    throw DimensionError("nll_loss: one target per distribution");
  }
  if (distributions.empty()) throw DimensionError("nll_loss: empty input");
  NllResult<Real> out;
  const Real floor = Real(1e-12);
  double total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= distributions[i].size()) {
      throw DimensionError("nll_loss: target id out of range");
    }
    Real p = distributions[i][targets[i]];
    if (p < floor) {
      p = floor;
      ++out.clamped;
    }
    total -= std::log(static_cast<double>(p));
  }
  out.loss = static_cast<Real>(total / static_cast<double>(targets.size()));
  return out;
}

// Tape leaves for the GCN tensors, creation order matching params().
template <class Real>
struct GcnNodes {
  using Id = typename Tape<Real>::Id;
  std::vector<std::array<Id, 2>> w;
  Id w_a = 0;
  bool has_w_a = false;
};

template <class Real>
GcnNodes<Real> bind_gcn(Tape<Real>& tape, const SpellGcnParams<Real>& params,
                        std::vector<typename Tape<Real>::Id>* flat_ids = nullptr) {
  GcnNodes<Real> nodes;
  auto mk = [&](const Matrix<Real>& m) {
    auto id = tape.leaf(m, true);
    if (flat_ids) flat_ids->push_back(id);
    return id;
  };
  for (const auto& pair : params.w) {
    nodes.w.push_back({mk(pair[kPronSlot]), mk(pair[kShapeSlot])});
  }
  if (params.w_a.rows() > 0) {
    nodes.w_a = mk(params.w_a);
    nodes.has_w_a = true;
  }
  return nodes;
}

// Differentiable version of forward(); the caller keeps both adjacency
// structures alive for the lifetime of the tape.
template <class Real>
typename Tape<Real>::Id gcn_forward_on_tape(Tape<Real>& tape, const SpellGcnParams<Real>& params,
                                            const GcnNodes<Real>& nodes,
                                            const Csr<Real>* norm_adj_pron,
                                            const Csr<Real>* norm_adj_shape,
                                            typename Tape<Real>::Id h0) {
  using Id = typename Tape<Real>::Id;
  params.validate();
  Id h = h0;
  Id acc = h0;
  for (std::size_t l = 0; l < params.depth; ++l) {
    Id f_pron = tape.matmul(tape.spmm_sym(norm_adj_pron, h), nodes.w[l][kPronSlot]);
    Id f_shape = tape.matmul(tape.spmm_sym(norm_adj_shape, h), nodes.w[l][kShapeSlot]);
    Id c;
    if (params.mode == CombineMode::attention) {
      Id scores = tape.scale(
          tape.concat_cols(tape.matmul(f_pron, nodes.w_a), tape.matmul(f_shape, nodes.w_a)),
          Real(1) / params.beta);
      Id alpha = tape.softmax_rows(scores);
      c = tape.add(tape.col_broadcast_mul(f_pron, tape.slice_cols(alpha, 0, 1)),
                   tape.col_broadcast_mul(f_shape, tape.slice_cols(alpha, 1, 1)));
    } else if (params.mode == CombineMode::mean) {
      c = tape.scale(tape.add(f_pron, f_shape), Real(0.5));
    } else {
      c = tape.add(f_pron, f_shape);
    }
    h = tape.add(c, acc);
    acc = tape.add(acc, h);
  }
  return h;
}

}  // namespace spellgcn
