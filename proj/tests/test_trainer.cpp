#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "spellgcn/adamw.hpp"
#include "spellgcn/model.hpp"
#include "spellgcn/trainer.hpp"

namespace {

using namespace spellgcn;

ConfusionSet toy_confusion() {
  return parse_confusion_set(
      "长\t2\t常\n"
      "长\t1\t张\n"
      "常\t3\t场\n"
      "场\t4\t厂\n"
      "厂\t1\t广\n"
      "广\t5\t长\n"
      "昌\t2\t常\n");
}

ModelConfig toy_config(bool use_gcn = true) {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.max_len = 10;
  cfg.gcn_depth = 2;
  cfg.beta = 3.0;
  cfg.mode = CombineMode::attention;
  cfg.use_gcn = use_gcn;
  cfg.seed = 3;
  return cfg;
}

// Sentences over the confusion characters; every long sentence obeys one
// learnable rule: 长 in the source is 常 in the target.
std::vector<Sample> rule_corpus(std::size_t n, std::uint64_t seed) {
  const std::u32string alphabet = U"长常场厂广昌";
  Rng rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 3 + rng.next_index(4);
    std::u32string src;
    for (std::size_t j = 0; j < len; ++j) src.push_back(alphabet[rng.next_index(alphabet.size())]);
    std::u32string tgt = src;
    for (char32_t& c : tgt) {
      if (c == U'长') c = U'常';
    }
    out.push_back({"s" + std::to_string(i), src, tgt});
  }
  return out;
}

std::vector<std::u32string> corpus_texts(const std::vector<Sample>& corpus) {
  std::vector<std::u32string> texts;
  for (const Sample& s : corpus) {
    texts.push_back(s.source);
    texts.push_back(s.target);
  }
  return texts;
}

TEST(GradCheck, FullModelMatchesFiniteDifferences) {
  const auto cs = toy_confusion();
  CscModel<double> model(cs, {U"长场常"}, toy_config());
  const Sample sample{"g1", U"长场", U"常场"};
  const auto report = grad_check(model, sample, 1e-5);
  EXPECT_LT(report.max_rel_error, 1e-4);
  EXPECT_EQ(report.tensors.size(), model.params().size());
  EXPECT_GT(report.coords_checked, 100u);

  // The comparison must not hinge on a lucky step size.
  const auto coarse = grad_check(model, sample, 1e-4);
  EXPECT_LT(coarse.max_rel_error, 1e-3);
}

// With the graph branch disabled its tensors are still bound, so both the
// analytic gradient and the finite difference must vanish identically.
TEST(GradCheck, UnusedGraphTensorsHaveExactlyZeroGradient) {
  const auto cs = toy_confusion();
  CscModel<double> model(cs, {U"长场常"}, toy_config(/*use_gcn=*/false));
  const auto report = grad_check(model, {"g2", U"长场", U"常场"}, 1e-5);
  EXPECT_LT(report.max_rel_error, 1e-4);
  std::size_t gcn_tensors = 0;
  for (const auto& t : report.tensors) {
    if (t.name.rfind("gcn.", 0) == 0) {
      ++gcn_tensors;
      EXPECT_EQ(t.max_abs_analytic, 0.0) << t.name;
      EXPECT_EQ(t.max_abs_fd, 0.0) << t.name;
    }
  }
  EXPECT_EQ(gcn_tensors, 5u);  // two weights per layer plus w_a
}

TEST(GradCheck, RejectsBadEpsAndFloat) {
  const auto cs = toy_confusion();
  CscModel<double> model(cs, {U"长场"}, toy_config());
  EXPECT_THROW(grad_check(model, {"g3", U"长", U"常"}, 0.0), ConfigError);
}

TEST(AdamW, ZeroLearningRateLeavesParamsBitIdentical) {
  Matrix<double> w(3, 2);
  Rng rng(11);
  for (double& v : w.values()) v = rng.uniform(0.1, 1.0);
  const Matrix<double> orig = w;

  AdamWConfig<double> cfg;
  cfg.learning_rate = 0.0;
  AdamW<double> opt({{"w", &w}}, cfg);
  Matrix<double> g(3, 2);
  for (double& v : g.values()) v = rng.uniform(-1, 1);
  opt.step({g});
  opt.step({g});
  EXPECT_TRUE(bit_equal(w, orig));
  EXPECT_EQ(opt.step_count(), 2u);
}

TEST(AdamW, ZeroGradStepIsExactlyTheDecayFactor) {
  Matrix<double> w(2, 3), b(1, 3);
  Rng rng(12);
  for (double& v : w.values()) v = rng.uniform(0.5, 1.5);
  for (double& v : b.values()) v = rng.uniform(0.5, 1.5);
  const Matrix<double> w0 = w, b0 = b;

  AdamWConfig<double> cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.1;
  AdamW<double> opt({{"w", &w, true}, {"b", &b, false}}, cfg);
  opt.step({Matrix<double>(2, 3), Matrix<double>(1, 3)});

  EXPECT_TRUE(bit_equal(w, scaled(w0, 1.0 - cfg.learning_rate * cfg.weight_decay)));
  EXPECT_TRUE(bit_equal(b, b0));  // decay never touches bias-class tensors
}

TEST(AdamW, FirstStepMatchesHandComputation) {
  Matrix<double> w(1, 1);
  w(0, 0) = 1.0;
  AdamWConfig<double> cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  AdamW<double> opt({{"w", &w}}, cfg);
  Matrix<double> g(1, 1);
  g(0, 0) = 1.0;
  opt.step({g});
  // Bias correction cancels on step one: mhat = vhat = 1.
  EXPECT_DOUBLE_EQ(w(0, 0), 1.0 - 0.1 / (1.0 + 1e-8));
}

TEST(AdamW, PadRowStaysFrozen) {
  Matrix<double> emb(3, 2);
  Rng rng(13);
  for (double& v : emb.values()) v = rng.uniform(-1, 1);
  for (std::size_t j = 0; j < 2; ++j) emb(kPadId, j) = 0.0;
  const Matrix<double> orig = emb;

  AdamW<double> opt({{"embedding", &emb, true, true}}, {});
  Matrix<double> g(3, 2);
  g.fill(1.0);
  opt.step({g});
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(emb(kPadId, j), orig(kPadId, j));
    EXPECT_NE(emb(1, j), orig(1, j));
    EXPECT_NE(emb(2, j), orig(2, j));
  }
}

TEST(AdamW, RejectsMismatchedGradients) {
  Matrix<double> w(2, 2);
  AdamW<double> opt({{"w", &w}}, {});
  EXPECT_THROW(opt.step({}), DimensionError);
  EXPECT_THROW(opt.step({Matrix<double>(2, 3)}), DimensionError);
}

TEST(ClipGradients, ScalesOnlyWhenAboveThreshold) {
  std::vector<Matrix<double>> grads;
  grads.emplace_back(1, 2);
  grads[0](0, 0) = 3.0;
  grads[0](0, 1) = 4.0;  // norm 5
  auto small = grads;
  detail::clip_gradients(small, 10.0);
  EXPECT_TRUE(bit_equal(small[0], grads[0]));

  detail::clip_gradients(grads, 1.0);
  const double norm = std::hypot(grads[0](0, 0), grads[0](0, 1));
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_NEAR(grads[0](0, 0) / grads[0](0, 1), 0.75, 1e-12);
}

TEST(EpochOrder, DeterministicShuffleSortedByLength) {
  const auto corpus = rule_corpus(40, 21);
  const auto a = detail::epoch_order(corpus, 7, 0);
  const auto b = detail::epoch_order(corpus, 7, 0);
  EXPECT_EQ(a, b);
  const auto c = detail::epoch_order(corpus, 7, 1);
  EXPECT_NE(a, c);  // a new permutation each epoch

  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_LE(corpus[a[i - 1]].source.size(), corpus[a[i]].source.size());
  }
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
}

// A batch must score exactly like its sentences taken alone: padding and
// batching are bookkeeping, not modeling choices.
TEST(ForwardLoss, BatchLossIsPositionWeightedMeanOfSingles) {
  const auto cs = toy_confusion();
  const Sample s1{"a", U"长场", U"常场"};
  const Sample s2{"b", U"厂广昌常", U"厂广昌常"};
  CscModel<double> model(cs, corpus_texts({s1, s2}), toy_config());

  auto single = [&](const Sample& s) {
    Tape<double> tape;
    auto bl = model.forward_loss(tape, {s});
    return std::pair<double, std::size_t>(tape.value(bl.loss)(0, 0), bl.positions);
  };
  const auto [l1, p1] = single(s1);
  const auto [l2, p2] = single(s2);

  Tape<double> tape;
  auto bl = model.forward_loss(tape, {s1, s2});
  EXPECT_EQ(bl.positions, p1 + p2);
  EXPECT_EQ(bl.positions, 6u);
  const double expected = (l1 * p1 + l2 * p2) / static_cast<double>(p1 + p2);
  EXPECT_NEAR(tape.value(bl.loss)(0, 0), expected, 1e-12);
}

TEST(ForwardLoss, RejectsDegenerateBatches) {
  const auto cs = toy_confusion();
  CscModel<double> model(cs, {U"长常"}, toy_config());
  Tape<double> tape;
  EXPECT_THROW(model.forward_loss(tape, {}), ConfigError);
  EXPECT_THROW(model.forward_loss(tape, {{"x", U"长长", U"长"}}), DataError);
  Tape<double> tape2;
  const std::u32string pads(2, kPadChar);
  EXPECT_THROW(model.forward_loss(tape2, {{"y", pads, pads}}), DataError);
}

TEST(Train, TwoRunsSameSeedAreBitIdentical) {
  const auto cs = toy_confusion();
  const auto corpus = rule_corpus(30, 22);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 8;
  tc.epochs = 2;
  tc.seed = 5;

  auto run = [&]() {
    CscModel<double> model(cs, corpus_texts(corpus), toy_config());
    auto report = train(model, corpus, {}, tc);
    return std::pair<CscModel<double>, TrainReport>(std::move(model), std::move(report));
  };
  auto [m1, r1] = run();
  auto [m2, r2] = run();

  EXPECT_TRUE(bit_equal(m1.extractor().embedding_table(), m2.extractor().embedding_table()));
  EXPECT_TRUE(bit_equal(m1.extractor().layers()[0].wq, m2.extractor().layers()[0].wq));
  EXPECT_TRUE(bit_equal(m1.gcn().w[0][0], m2.gcn().w[0][0]));
  EXPECT_TRUE(bit_equal(m1.gcn().w_a, m2.gcn().w_a));
  ASSERT_EQ(r1.epochs.size(), r2.epochs.size());
  for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
    EXPECT_EQ(r1.epochs[e].mean_loss, r2.epochs[e].mean_loss);
  }
}

TEST(Train, LossDecreasesOnLearnableRule) {
  const auto cs = toy_confusion();
  const auto corpus = rule_corpus(120, 23);
  CscModel<double> model(cs, corpus_texts(corpus), toy_config());
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 16;
  tc.epochs = 6;
  tc.seed = 9;
  const auto report = train(model, corpus, {}, tc);
  ASSERT_EQ(report.epochs.size(), 6u);
  EXPECT_LT(report.epochs.back().mean_loss, report.epochs.front().mean_loss);
  for (const auto& e : report.epochs) EXPECT_TRUE(std::isfinite(e.mean_loss));
}

TEST(Train, DevSplitIsScoredEveryEpoch) {
  const auto cs = toy_confusion();
  const auto corpus = rule_corpus(16, 24);
  const std::vector<Sample> dev(corpus.begin(), corpus.begin() + 4);
  CscModel<double> model(cs, corpus_texts(corpus), toy_config());
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  const auto report = train(model, corpus, dev, tc);
  for (const auto& e : report.epochs) {
    EXPECT_TRUE(e.has_dev);
    EXPECT_EQ(e.dev.sentences.counts.total, 4u);
  }
}

TEST(Train, ValidatesInputsUpFront) {
  const auto cs = toy_confusion();
  CscModel<double> model(cs, {U"长"}, toy_config());
  TrainConfig tc;
  EXPECT_THROW(train(model, {}, {}, tc), ConfigError);

  try {
    train(model, {{"bad-7", U"长长", U"长"}}, {}, tc);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-7"), std::string::npos);
  }

  const std::u32string over(11, U'长');  // max_len is 10
  EXPECT_THROW(train(model, {{"long-1", over, over}}, {}, tc), LengthError);

  TrainConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(train(model, {{"s", U"长", U"长"}}, {}, bad), ConfigError);
}

}  // namespace
