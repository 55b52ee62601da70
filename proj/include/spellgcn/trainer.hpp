#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "spellgcn/adamw.hpp"
#include "spellgcn/corpus.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/metrics.hpp"
#include "spellgcn/model.hpp"
#include "spellgcn/rng.hpp"

namespace spellgcn {

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 32;
  std::size_t epochs = 6;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  std::optional<double> grad_clip;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (grad_clip && !(*grad_clip > 0)) throw ConfigError("grad_clip must be positive");
  }
};

struct EpochRecord {
  double mean_loss = 0;      // total nll / total included positions
  std::size_t clamped = 0;   // probability-floor hits this epoch
  bool has_dev = false;
  EvalReport dev;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0;
};

namespace detail {

// Shuffle, then stable-sort by length: batches hold same-length sentences
// wherever the data allows, and the residual mixing is seed-deterministic.
inline std::vector<std::size_t> epoch_order(const std::vector<Sample>& corpus,
                                            std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng::named(seed, "epoch" + std::to_string(epoch));
  rng.shuffle(idx);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return corpus[a].source.size() < corpus[b].source.size();
  });
  return idx;
}

template <class Real>
void clip_gradients(std::vector<Matrix<Real>>& grads, double max_norm) {
  double norm_sq = 0;
  for (const auto& g : grads) {
    for (Real v : g.values()) norm_sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm <= max_norm) return;
  const Real scale = static_cast<Real>(max_norm / norm);
  for (auto& g : grads) {
    for (Real& v : g.values()) v *= scale;
  }
}

}  // namespace detail

// Deterministic given (seed, corpus order, cfg). Parameters update in place;
// the dev split, when present, is scored after every epoch.
template <class Real>
TrainReport train(CscModel<Real>& model, const std::vector<Sample>& corpus,
                  const std::vector<Sample>& dev, const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("train: empty corpus");
  const std::size_t max_len = model.config().max_len;
  for (const Sample& s : corpus) {
    if (s.source.size() != s.target.size()) {
      throw DataError("sample '" + s.id + "': source/target length mismatch");
    }
    if (s.source.size() > max_len) {
      throw LengthError("sample '" + s.id + "' exceeds max_len " + std::to_string(max_len));
    }
  }

  AdamWConfig<Real> ocfg;
  ocfg.learning_rate = static_cast<Real>(cfg.learning_rate);
  ocfg.weight_decay = static_cast<Real>(cfg.weight_decay);
  AdamW<Real> opt(model.params(), ocfg);

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_order(corpus, cfg.seed, epoch);
    double nll_total = 0;
    std::size_t positions_total = 0;
    EpochRecord rec;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Sample> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(corpus[order[i]]);

      Tape<Real> tape;
      auto bl = model.forward_loss(tape, batch);
      tape.backward(bl.loss);

      nll_total += static_cast<double>(tape.value(bl.loss)(0, 0)) *
                   static_cast<double>(bl.positions);
      positions_total += bl.positions;
      rec.clamped += bl.clamped;

      std::vector<Matrix<Real>> grads;
      grads.reserve(bl.param_nodes.size());
      for (auto node : bl.param_nodes) grads.push_back(tape.grad(node));
      if (cfg.grad_clip) detail::clip_gradients(grads, *cfg.grad_clip);
      opt.step(grads);
    }
    rec.mean_loss = positions_total > 0 ? nll_total / static_cast<double>(positions_total) : 0;
    if (!dev.empty()) {
      rec.has_dev = true;
      rec.dev = model.evaluate(dev);
    }
    report.epochs.push_back(std::move(rec));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

struct GradCheckReport {
  struct Tensor {
    std::string name;
    double max_rel_error = 0;
    double max_abs_analytic = 0;
    double max_abs_fd = 0;
  };
  double max_rel_error = 0;
  std::vector<Tensor> tensors;
  std::size_t coords_checked = 0;
};

// Central differences against the analytic gradient on one sample. The
// relative-error floor keeps difference noise on near-zero coordinates from
// dominating; zero-signal tensors are still visible through the per-tensor
// absolute columns. 64-bit arithmetic only: float drowns the comparison.
template <class Real>
GradCheckReport grad_check(CscModel<Real>& model, const Sample& sample, double eps) {
  static_assert(std::is_same_v<Real, double>,
                "grad_check requires the 64-bit arithmetic mode");
  if (!(eps > 0)) throw ConfigError("grad_check: eps must be positive");

  auto loss_value = [&]() {
    Tape<Real> tape;
    auto bl = model.forward_loss(tape, {sample});
    return static_cast<double>(tape.value(bl.loss)(0, 0));
  };

  Tape<Real> tape;
  auto bl = model.forward_loss(tape, {sample});
  tape.backward(bl.loss);

  auto params = model.params();
  GradCheckReport report;
  constexpr std::size_t kCoordsPerTensor = 24;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Matrix<Real>& analytic = tape.grad(bl.param_nodes[p]);
    if (!analytic.all_finite()) {
      throw NumericError("grad_check: non-finite analytic gradient in '" + params[p].name + "'");
    }
    Matrix<Real>& theta = *params[p].tensor;
    const std::size_t total = theta.rows() * theta.cols();
    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    Rng rng = Rng::named(0x6ec5, "grad_check." + params[p].name);
    rng.shuffle(coords);
    coords.resize(std::min(total, kCoordsPerTensor));

    GradCheckReport::Tensor t;
    t.name = params[p].name;
    for (std::size_t flat : coords) {
      const std::size_t r = flat / theta.cols();
      const std::size_t c = flat % theta.cols();
      const Real saved = theta(r, c);
      theta(r, c) = saved + static_cast<Real>(eps);
      const double up = loss_value();
      theta(r, c) = saved - static_cast<Real>(eps);
      const double down = loss_value();
      theta(r, c) = saved;
      const double fd = (up - down) / (2 * eps);
      const double a = static_cast<double>(analytic(r, c));
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-5});
      t.max_rel_error = std::max(t.max_rel_error, rel);
      t.max_abs_analytic = std::max(t.max_abs_analytic, std::abs(a));
      t.max_abs_fd = std::max(t.max_abs_fd, std::abs(fd));
      ++report.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, t.max_rel_error);
    report.tensors.push_back(std::move(t));
  }
  return report;
}

}  // namespace spellgcn
