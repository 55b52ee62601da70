#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spellgcn/confusion.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/matrix.hpp"
#include "spellgcn/param.hpp"
#include "spellgcn/rng.hpp"
#include "spellgcn/tape.hpp"
#include "spellgcn/vocab.hpp"

namespace spellgcn {

struct ExtractorConfig {
  std::size_t dim = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_len = 64;
  std::uint64_t seed = 1;

  void validate() const {
    if (dim < 1) throw ConfigError("extractor dim must be >= 1");
    if (n_heads < 1 || dim % n_heads != 0) {
      throw ConfigError("extractor dim must be divisible by n_heads");
    }
    if (max_len < 1) throw ConfigError("extractor max_len must be >= 1");
  }
};

// Per-character contextual vectors for one sequence.
template <class Real>
struct EncodedSequence {
  Matrix<Real> vectors;                // n x D
  std::vector<std::size_t> token_ids;  // length n
};

template <class Real>
struct InitialNodeFeatures {
  Matrix<Real> features;       // N x D, rows copied from the embedding table
  std::size_t unresolved = 0;  // confusion characters that fell back to UNK
};

// Tape leaves for every extractor tensor, created once per forward pass so
// gradients can be read back per parameter.
template <class Real>
struct ExtractorNodes {
  using Id = typename Tape<Real>::Id;
  Id embedding;
  struct LayerNodes {
    Id wq, bq, wk, bk, wv, bv, wo, bo;
    Id ln1_gain, ln1_shift;
    Id w_ff1, b_ff1, w_ff2, b_ff2;
    Id ln2_gain, ln2_shift;
  };
  std::vector<LayerNodes> layers;
};

// Toy contextual encoder standing in for a large pretrained backbone:
// character embedding + sinusoidal positions, then n_layers blocks of
// multi-head self-attention and a GELU feed-forward, post-norm residuals.
// Exposes the contract the classifier needs: per-token vectors plus the
// live embedding table.
template <class Real>
class Extractor {
 public:
  struct Layer {
    Matrix<Real> wq, bq, wk, bk, wv, bv, wo, bo;
    Matrix<Real> ln1_gain, ln1_shift;
    Matrix<Real> w_ff1, b_ff1, w_ff2, b_ff2;
    Matrix<Real> ln2_gain, ln2_shift;
  };

  Extractor() = default;

  Extractor(Vocab vocab, const ExtractorConfig& cfg) : vocab_(std::move(vocab)), cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.dim;
    const std::size_t f = 4 * d;
    embedding_ = init_uniform(vocab_.size(), d, "embedding");
    for (std::size_t j = 0; j < d; ++j) embedding_(kPadId, j) = Real(0);  // frozen at zero

    layers_.resize(cfg_.n_layers);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer& L = layers_[l];
      L.wq = init_uniform(d, d, p + "wq");
      L.wk = init_uniform(d, d, p + "wk");
      L.wv = init_uniform(d, d, p + "wv");
      L.wo = init_uniform(d, d, p + "wo");
      L.bq = Matrix<Real>(1, d);
      L.bk = Matrix<Real>(1, d);
      L.bv = Matrix<Real>(1, d);
      L.bo = Matrix<Real>(1, d);
      L.w_ff1 = init_uniform(d, f, p + "w_ff1");
      L.b_ff1 = Matrix<Real>(1, f);
      L.w_ff2 = init_uniform(f, d, p + "w_ff2");
      L.b_ff2 = Matrix<Real>(1, d);
      L.ln1_gain = Matrix<Real>(1, d);
      L.ln1_gain.fill(Real(1));
      L.ln1_shift = Matrix<Real>(1, d);
      L.ln2_gain = Matrix<Real>(1, d);
      L.ln2_gain.fill(Real(1));
      L.ln2_shift = Matrix<Real>(1, d);
    }

    positions_ = Matrix<Real>(cfg_.max_len, d);
    for (std::size_t pos = 0; pos < cfg_.max_len; ++pos) {
      for (std::size_t j = 0; j < d; j += 2) {
        const double angle =
            static_cast<double>(pos) /
            std::pow(10000.0, static_cast<double>(j) / static_cast<double>(d));
        positions_(pos, j) = static_cast<Real>(std::sin(angle));
        if (j + 1 < d) positions_(pos, j + 1) = static_cast<Real>(std::cos(angle));
      }
    }
  }

  const Vocab& vocab() const noexcept { return vocab_; }
  const ExtractorConfig& config() const noexcept { return cfg_; }
  std::size_t dim() const noexcept { return cfg_.dim; }

  Matrix<Real>& embedding_table() noexcept { return embedding_; }
  const Matrix<Real>& embedding_table() const noexcept { return embedding_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  std::vector<ParamRef<Real>> params() {
    std::vector<ParamRef<Real>> out;
    out.push_back({"embedding", &embedding_, true, true});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer& L = layers_[l];
      out.push_back({p + "wq", &L.wq});
      out.push_back({p + "bq", &L.bq, false});
      out.push_back({p + "wk", &L.wk});
      out.push_back({p + "bk", &L.bk, false});
      out.push_back({p + "wv", &L.wv});
      out.push_back({p + "bv", &L.bv, false});
      out.push_back({p + "wo", &L.wo});
      out.push_back({p + "bo", &L.bo, false});
      out.push_back({p + "ln1_gain", &L.ln1_gain, false});
      out.push_back({p + "ln1_shift", &L.ln1_shift, false});
      out.push_back({p + "w_ff1", &L.w_ff1});
      out.push_back({p + "b_ff1", &L.b_ff1, false});
      out.push_back({p + "w_ff2", &L.w_ff2});
      out.push_back({p + "b_ff2", &L.b_ff2, false});
      out.push_back({p + "ln2_gain", &L.ln2_gain, false});
      out.push_back({p + "ln2_shift", &L.ln2_shift, false});
    }
    return out;
  }

  // Leaf creation order matches params() order exactly.
  ExtractorNodes<Real> bind(Tape<Real>& tape,
                            std::vector<typename Tape<Real>::Id>* flat_ids = nullptr) const {
    ExtractorNodes<Real> nodes;
    auto mk = [&](const Matrix<Real>& m) {
      auto id = tape.leaf(m, true);
      if (flat_ids) flat_ids->push_back(id);
      return id;
    };
    nodes.embedding = mk(embedding_);
    for (const Layer& L : layers_) {
      typename ExtractorNodes<Real>::LayerNodes n;
      n.wq = mk(L.wq);
      n.bq = mk(L.bq);
      n.wk = mk(L.wk);
      n.bk = mk(L.bk);
      n.wv = mk(L.wv);
      n.bv = mk(L.bv);
      n.wo = mk(L.wo);
      n.bo = mk(L.bo);
      n.ln1_gain = mk(L.ln1_gain);
      n.ln1_shift = mk(L.ln1_shift);
      n.w_ff1 = mk(L.w_ff1);
      n.b_ff1 = mk(L.b_ff1);
      n.w_ff2 = mk(L.w_ff2);
      n.b_ff2 = mk(L.b_ff2);
      n.ln2_gain = mk(L.ln2_gain);
      n.ln2_shift = mk(L.ln2_shift);
      nodes.layers.push_back(n);
    }
    return nodes;
  }

  std::vector<std::size_t> token_ids(const std::u32string& tokens) const {
    if (tokens.size() > cfg_.max_len) {
      throw LengthError("sequence length " + std::to_string(tokens.size()) +
                        " exceeds max_len " + std::to_string(cfg_.max_len));
    }
    return vocab_.encode(tokens);
  }

  // Tape forward from token ids.
  typename Tape<Real>::Id encode_on_tape(Tape<Real>& tape,
                                         const std::vector<std::size_t>& ids,
                                         const ExtractorNodes<Real>& nodes) const {
    using Id = typename Tape<Real>::Id;
    const std::size_t n = ids.size();
    if (n > cfg_.max_len) throw LengthError("sequence exceeds max_len");
    const std::size_t d = cfg_.dim;
    const std::size_t dh = d / cfg_.n_heads;

    Matrix<Real> pos_slice(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) pos_slice(i, j) = positions_(i, j);
    }
    Id x = tape.add(tape.gather_rows(nodes.embedding, ids), tape.constant(pos_slice));

    // PAD keys are excluded from attention; PAD queries are dropped from the
    // loss later, their rows only need to stay finite.
    bool any_pad = false;
    for (std::size_t id : ids) any_pad = any_pad || id == kPadId;
    Matrix<Real> attn_mask;
    if (any_pad) {
      attn_mask = Matrix<Real>(n, n);
      for (std::size_t j = 0; j < n; ++j) {
        if (ids[j] == kPadId) {
          for (std::size_t i = 0; i < n; ++i) attn_mask(i, j) = Real(-1e9);
        }
      }
    }

    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& ln = nodes.layers[l];
      Id q = tape.row_broadcast_add(tape.matmul(x, ln.wq), ln.bq);
      Id k = tape.row_broadcast_add(tape.matmul(x, ln.wk), ln.bk);
      Id v = tape.row_broadcast_add(tape.matmul(x, ln.wv), ln.bv);
      Id ctx = q;
      for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
        Id qh = tape.slice_cols(q, h * dh, dh);
        Id kh = tape.slice_cols(k, h * dh, dh);
        Id vh = tape.slice_cols(v, h * dh, dh);
        Id scores = tape.scale(tape.matmul(qh, kh, false, true),
                               Real(1) / std::sqrt(static_cast<Real>(dh)));
        Id alpha = tape.softmax_rows(scores, any_pad ? &attn_mask : nullptr);
        Id ctx_h = tape.matmul(alpha, vh);
        ctx = (h == 0) ? ctx_h : tape.concat_cols(ctx, ctx_h);
      }
      Id attn_out = tape.row_broadcast_add(tape.matmul(ctx, ln.wo), ln.bo);
      x = tape.layer_norm(tape.add(x, attn_out), ln.ln1_gain, ln.ln1_shift);
      Id ff = tape.gelu(tape.row_broadcast_add(tape.matmul(x, ln.w_ff1), ln.b_ff1));
      Id ff_out = tape.row_broadcast_add(tape.matmul(ff, ln.w_ff2), ln.b_ff2);
      x = tape.layer_norm(tape.add(x, ff_out), ln.ln2_gain, ln.ln2_shift);
    }
    return x;
  }

  // Deterministic given (parameters, tokens); unknown codepoints map to UNK.
  EncodedSequence<Real> encode(const std::u32string& tokens) const {
    const auto ids = token_ids(tokens);
    if (ids.empty()) return {Matrix<Real>(0, cfg_.dim), {}};
    Tape<Real> tape;
    const auto nodes = bind(tape);
    const auto out = encode_on_tape(tape, ids, nodes);
    return {tape.value(out), ids};
  }

  // Row j = embedding row of the character with node id j. Confusion
  // characters missing from the vocabulary fall back to the UNK row.
  InitialNodeFeatures<Real> initial_node_features(const std::vector<char32_t>& node_chars) const {
    InitialNodeFeatures<Real> out;
    out.features = Matrix<Real>(node_chars.size(), cfg_.dim);
    for (std::size_t j = 0; j < node_chars.size(); ++j) {
      const char32_t c = node_chars[j];
      std::size_t id = kUnkId;
      if (vocab_.contains(c)) {
        id = vocab_.id_of(c);
      } else {
        ++out.unresolved;
      }
      for (std::size_t col = 0; col < cfg_.dim; ++col) {
        out.features(j, col) = embedding_(id, col);
      }
    }
    return out;
  }

  // node id -> vocab id used for H^0 gathers (UNK fallback applied).
  std::vector<std::size_t> node_vocab_ids(const std::vector<char32_t>& node_chars) const {
    std::vector<std::size_t> ids(node_chars.size(), kUnkId);
    for (std::size_t j = 0; j < node_chars.size(); ++j) {
      if (vocab_.contains(node_chars[j])) ids[j] = vocab_.id_of(node_chars[j]);
    }
    return ids;
  }

 private:
  Matrix<Real> init_uniform(std::size_t rows, std::size_t cols, const std::string& name) {
    Rng rng = Rng::named(cfg_.seed, name);
    Matrix<Real> m(rows, cols);
    for (Real& v : m.values()) v = static_cast<Real>(rng.uniform(-0.1, 0.1));
    return m;
  }

  Vocab vocab_;
  ExtractorConfig cfg_;
  Matrix<Real> embedding_;  // M x D; PAD row zero and frozen
  std::vector<Layer> layers_;
  Matrix<Real> positions_;  // max_len x D, sinusoidal constants
};

}  // namespace spellgcn
