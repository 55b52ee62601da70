#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spellgcn/confusion.hpp"
#include "spellgcn/corpus.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/extractor.hpp"
#include "spellgcn/gcn.hpp"
#include "spellgcn/graph.hpp"
#include "spellgcn/matrix.hpp"
#include "spellgcn/metrics.hpp"
#include "spellgcn/param.hpp"
#include "spellgcn/tape.hpp"
#include "spellgcn/vocab.hpp"

namespace spellgcn {

struct ModelConfig {
  std::size_t dim = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_len = 64;
  std::size_t gcn_depth = 2;
  double beta = 3.0;
  CombineMode mode = CombineMode::attention;
  bool use_gcn = true;  // false = plain softmax over embedding rows (ablation)
  std::uint64_t seed = 1;

  ExtractorConfig extractor_config() const { return {dim, n_layers, n_heads, max_len, seed}; }

  void validate() const {
    extractor_config().validate();
    if (gcn_depth < 1) throw ConfigError("gcn_depth must be >= 1");
    if (!(beta > 0)) throw ConfigError("beta must be positive");
  }
};

// The joint model: contextual extractor, similarity-graph convolution over
// the confusion universe, and the mixed classifier (graph rows inside the
// universe, embedding rows outside). The GCN tensors exist even when
// use_gcn is off so the ablation compares equal parameter counts.
template <class Real>
class CscModel {
 public:
  struct BatchLoss {
    typename Tape<Real>::Id loss = 0;  // mean nll over included positions, 1x1
    std::size_t positions = 0;     // included (non-PAD) positions
    std::size_t clamped = 0;       // probability-floor hits
    std::vector<typename Tape<Real>::Id> param_nodes;  // leaves, params() order
  };

  CscModel() = default;

  CscModel(ConfusionSet cs, Vocab vocab, const ModelConfig& cfg) : cfg_(cfg), cs_(std::move(cs)) {
    cfg_.validate();
    graphs_ = build_graphs<Real>(cs_);
    extractor_ = Extractor<Real>(std::move(vocab), cfg_.extractor_config());
    gcn_ = SpellGcnParams<Real>::init(cfg_.dim, cfg_.gcn_depth, static_cast<Real>(cfg_.beta),
                                      cfg_.mode, cfg_.seed);
    rebuild_maps();
  }

  CscModel(const ConfusionSet& cs, const std::vector<std::u32string>& texts,
           const ModelConfig& cfg)
      : CscModel(cs, Vocab::build(cs, texts), cfg) {}

  const ModelConfig& config() const noexcept { return cfg_; }
  const ConfusionSet& confusion() const noexcept { return cs_; }
  const GraphPair<Real>& graphs() const noexcept { return graphs_; }
  const Vocab& vocab() const noexcept { return extractor_.vocab(); }
  Extractor<Real>& extractor() noexcept { return extractor_; }
  const Extractor<Real>& extractor() const noexcept { return extractor_; }
  SpellGcnParams<Real>& gcn() noexcept { return gcn_; }
  const SpellGcnParams<Real>& gcn() const noexcept { return gcn_; }
  const std::vector<std::optional<std::size_t>>& index_map() const noexcept { return index_map_; }

  // Registry order is the contract for optimizer state and tape binding.
  std::vector<ParamRef<Real>> params() {
    std::vector<ParamRef<Real>> out = extractor_.params();
    auto g = gcn_.params();
    out.insert(out.end(), g.begin(), g.end());
    return out;
  }

  // One differentiable pass over a batch. Sequences are encoded at the
  // batch's max length (shorter ones padded); PAD positions are masked out
  // of attention and dropped from the loss. The classifier is built once
  // per tape and shared by every sentence.
  BatchLoss forward_loss(Tape<Real>& tape, const std::vector<Sample>& batch) {
    if (batch.empty()) throw ConfigError("forward_loss: empty batch");
    BatchLoss out;
    const auto ext_nodes = extractor_.bind(tape, &out.param_nodes);
    const auto gcn_nodes = bind_gcn(tape, gcn_, &out.param_nodes);
    const auto w = classifier_on_tape(tape, ext_nodes, gcn_nodes);

    std::size_t max_len = 0;
    for (const Sample& s : batch) max_len = std::max(max_len, s.source.size());

    typename Tape<Real>::Id total = tape.constant(Matrix<Real>(1, 1));
    out.loss = total;
    for (const Sample& s : batch) {
      if (s.source.size() != s.target.size()) {
        throw DataError("sample '" + s.id + "': source/target length mismatch");
      }
      if (s.source.empty()) continue;
      auto ids = extractor_.token_ids(s.source);
      auto targets = vocab().encode(s.target);
      ids.resize(max_len, kPadId);
      targets.resize(max_len, kPadId);
      std::vector<unsigned char> include(max_len, 1);
      for (std::size_t i = s.source.size(); i < max_len; ++i) include[i] = 0;
      for (std::size_t i = 0; i < s.source.size(); ++i) {
        if (ids[i] == kPadId) include[i] = 0;
        out.positions += include[i] != 0;
      }
      const auto x = extractor_.encode_on_tape(tape, ids, ext_nodes);
      const auto logits = tape.matmul(x, w, false, true);
      const auto nll = tape.nll_sum_from_logits(logits, targets, include, &out.clamped);
      total = tape.add(total, nll);
    }
    if (out.positions == 0) throw DataError("forward_loss: batch has no scorable positions");
    out.loss = tape.scale(total, Real(1) / static_cast<Real>(out.positions));
    return out;
  }

  // Frozen-parameter classifier (vocab x D).
  Matrix<Real> classifier() const {
    const Matrix<Real>& e = extractor_.embedding_table();
    if (!cfg_.use_gcn) return e;
    Matrix<Real> h0(node_vocab_ids_.size(), cfg_.dim);
    for (std::size_t r = 0; r < node_vocab_ids_.size(); ++r) {
      for (std::size_t j = 0; j < cfg_.dim; ++j) h0(r, j) = e(node_vocab_ids_[r], j);
    }
    const auto trace =
        spellgcn::forward(gcn_, graphs_.pron.normalized, graphs_.shape.normalized, h0);
    return assemble_classifier(trace.final_output(), e, index_map_);
  }

  // Per-position argmax over softmax(W v), lowest id winning ties. When the
  // argmax is UNK and the source character itself is out of vocabulary the
  // source character is kept, so unknown text passes through unchanged.
  std::u32string correct(const std::u32string& source) const {
    if (source.empty()) return source;
    const Matrix<Real> w = classifier();
    const auto enc = extractor_.encode(source);
    std::u32string out;
    out.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
      std::vector<Real> v(cfg_.dim);
      for (std::size_t j = 0; j < cfg_.dim; ++j) v[j] = enc.vectors(i, j);
      const auto dist = predict_distribution(w, v);
      std::size_t best = 0;
      for (std::size_t m = 1; m < dist.size(); ++m) {
        if (dist[m] > dist[best]) best = m;
      }
      if (best == kUnkId && !vocab().contains(source[i])) {
        out.push_back(source[i]);
      } else {
        out.push_back(vocab().token(best));
      }
    }
    return out;
  }

  EvalReport evaluate(const std::vector<Sample>& corpus) const {
    std::vector<Triple> triples;
    triples.reserve(corpus.size());
    for (const Sample& s : corpus) {
      triples.push_back({s.source, s.target, correct(s.source)});
    }
    return evaluate_triples(triples);
  }

  // For deserialization: replace tensors after construction.
  void rebuild_maps() {
    index_map_ = vocab_index_map(cs_, vocab().tokens());
    node_vocab_ids_ = extractor_.node_vocab_ids(cs_.chars());
  }

 private:
  typename Tape<Real>::Id classifier_on_tape(Tape<Real>& tape,
                                             const ExtractorNodes<Real>& ext_nodes,
                                             const GcnNodes<Real>& gcn_nodes) {
    if (!cfg_.use_gcn) return ext_nodes.embedding;
    const auto h0 = tape.gather_rows(ext_nodes.embedding, node_vocab_ids_);
    const auto h_final = gcn_forward_on_tape(tape, gcn_, gcn_nodes, &graphs_.pron.normalized,
                                             &graphs_.shape.normalized, h0);
    return tape.mixed_rows(h_final, ext_nodes.embedding, index_map_);
  }

  ModelConfig cfg_;
  ConfusionSet cs_;
  GraphPair<Real> graphs_;
  Extractor<Real> extractor_;
  SpellGcnParams<Real> gcn_;
  std::vector<std::optional<std::size_t>> index_map_;
  std::vector<std::size_t> node_vocab_ids_;
};

}  // namespace spellgcn
