#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "spellgcn/confusion.hpp"
#include "spellgcn/csr.hpp"
#include "spellgcn/error.hpp"

namespace spellgcn {

// Self-loop-augmented symmetric degree normalization:
//   norm = D^{-1/2} (A + I) D^{-1/2},  D = diag(rowsum(A + I)).
// Entry (i,j) is computed as inv_sqrt_deg[i] * inv_sqrt_deg[j], so the result
// is bitwise symmetric and its pattern equals the pattern of A + I.
template <class Real>
Csr<Real> normalize_adjacency(const Csr<Real>& adjacency) {
  const std::size_t n = adjacency.n_rows;
  if (adjacency.n_cols != n) throw DimensionError("adjacency must be square");

  std::vector<Real> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real deg = static_cast<Real>(adjacency.row_nnz(i) + 1);  // + self loop
    inv_sqrt_deg[i] = Real(1) / std::sqrt(deg);
  }

  Csr<Real> out;
  out.n_rows = n;
  out.n_cols = n;
  out.row_ptr.assign(n + 1, 0);
  out.col.reserve(adjacency.nnz() + n);
  out.val.reserve(adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool self_emitted = false;
    for (std::size_t p = adjacency.row_ptr[i]; p < adjacency.row_ptr[i + 1]; ++p) {
      const std::size_t j = adjacency.col[p];
      if (!self_emitted && j > i) {
        out.col.push_back(i);
        out.val.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
        self_emitted = true;
      }
      out.col.push_back(j);
      out.val.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    if (!self_emitted) {
      out.col.push_back(i);
      out.val.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
    }
    out.row_ptr[i + 1] = out.col.size();
  }
  return out;
}

// Binary similarity graph over the confusion-set node universe plus its
// normalized form.
template <class Real>
struct SimilarityGraph {
  std::size_t n_nodes = 0;
  Csr<Real> adjacency;   // symmetric, binary, zero diagonal
  Csr<Real> normalized;  // normalize_adjacency(adjacency)

  std::size_t directed_edges() const { return adjacency.nnz(); }
  std::size_t undirected_edges() const { return adjacency.nnz() / 2; }

  // Nodes with at least one incident edge.
  std::size_t active_characters() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      if (adjacency.row_nnz(i) > 0) ++count;
    }
    return count;
  }
};

template <class Real>
struct GraphPair {
  SimilarityGraph<Real> pron;
  SimilarityGraph<Real> shape;
};

namespace detail {

template <class Real>
SimilarityGraph<Real> graph_from_pairs(
    std::size_t n, const std::map<std::pair<std::size_t, std::size_t>, Real>& edges) {
  SimilarityGraph<Real> g;
  g.n_nodes = n;
  g.adjacency = Csr<Real>::from_entries(n, n, edges);
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

}  // namespace detail

// Category 1 feeds the shape graph; categories 2..5 are merged into the
// pronunciation graph. Every edge is symmetrized, self-pairs are dropped
// (the adjacency keeps a zero diagonal; self-loops enter only through
// normalization). Both graphs share the confusion set's node universe.
template <class Real>
GraphPair<Real> build_graphs(const ConfusionSet& cs) {
  const std::size_t n = cs.n_nodes();
  std::map<std::pair<std::size_t, std::size_t>, Real> pron, shape;
  for (const auto& e : cs.entries()) {
    const std::size_t i = cs.node_id(e.ch);
    const std::size_t j = cs.node_id(e.candidate);
    if (i == j) continue;
    auto& target = (e.category == 1) ? shape : pron;
    target[{i, j}] = Real(1);
    target[{j, i}] = Real(1);
  }
  return {detail::graph_from_pairs(n, pron), detail::graph_from_pairs(n, shape)};
}

// vocab position -> confusion-set node id, where defined.
inline std::vector<std::optional<std::size_t>> vocab_index_map(
    const ConfusionSet& cs, const std::vector<char32_t>& vocab) {
  std::vector<std::optional<std::size_t>> map(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (cs.contains(vocab[i])) map[i] = cs.node_id(vocab[i]);
  }
  return map;
}

// Published edge totals for confusion data rarely state their counting
// convention, so all three are reported side by side.
struct GraphStats {
  std::size_t n_nodes = 0;
  std::size_t n_entries = 0;                    // deduped directional triples
  std::array<std::size_t, 5> category_counts{};  // index 0 = category 1
  struct PerGraph {
    std::size_t characters = 0;          // nodes with degree >= 1
    std::size_t undirected_edges = 0;
    std::size_t directed_edges = 0;
  };
  PerGraph pron;
  PerGraph shape;
};

template <class Real>
GraphStats graph_stats(const ConfusionSet& cs, const GraphPair<Real>& graphs) {
  GraphStats s;
  s.n_nodes = cs.n_nodes();
  s.n_entries = cs.entries().size();
  for (const auto& e : cs.entries()) s.category_counts[e.category - 1]++;
  s.pron = {graphs.pron.active_characters(), graphs.pron.undirected_edges(),
            graphs.pron.directed_edges()};
  s.shape = {graphs.shape.active_characters(), graphs.shape.undirected_edges(),
             graphs.shape.directed_edges()};
  return s;
}

}  // namespace spellgcn
