#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "spellgcn/csr.hpp"
#include "spellgcn/matrix.hpp"
#include "spellgcn/rng.hpp"
#include "spellgcn/tape.hpp"

namespace {

using namespace spellgcn;
using T = Tape<double>;
using Id = T::Id;

Matrix<double> rnd(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1,
                   double hi = 1) {
  Rng rng(seed);
  Matrix<double> m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

// Builds the graph twice (fresh tapes) and compares the analytic gradient of
// every input coordinate against central differences. The builder must end
// in a 1x1 node; tests weight the output so uniform-gradient bugs show up.
void expect_grads_match(std::vector<Matrix<double>> inputs,
                        const std::function<Id(T&, const std::vector<Id>&)>& build,
                        double tol = 1e-6) {
  auto eval = [&](const std::vector<Matrix<double>>& ins) {
    T t;
    std::vector<Id> ids;
    for (const auto& m : ins) ids.push_back(t.leaf(m, true));
    return t.value(build(t, ids))(0, 0);
  };

  T t;
  std::vector<Id> ids;
  for (const auto& m : inputs) ids.push_back(t.leaf(m, true));
  const Id root = build(t, ids);
  ASSERT_EQ(t.value(root).rows(), 1u);
  ASSERT_EQ(t.value(root).cols(), 1u);
  t.backward(root);

  const double eps = 1e-5;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t r = 0; r < inputs[k].rows(); ++r) {
      for (std::size_t c = 0; c < inputs[k].cols(); ++c) {
        auto pert = inputs;
        pert[k](r, c) += eps;
        const double up = eval(pert);
        pert[k](r, c) -= 2 * eps;
        const double down = eval(pert);
        const double fd = (up - down) / (2 * eps);
        const double a = t.grad(ids[k])(r, c);
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        EXPECT_LT(rel, tol) << "input " << k << " coord (" << r << "," << c << ") analytic "
                            << a << " fd " << fd;
      }
    }
  }
}

// Weight the output elementwise so the incoming gradient is non-uniform.
Id weighted_sum(T& t, Id x, std::uint64_t seed = 99) {
  const auto& v = t.value(x);
  return t.sum_all(t.hadamard(x, t.constant(rnd(v.rows(), v.cols(), seed, 0.5, 1.5))));
}

TEST(TapeGrad, Add) {
  expect_grads_match({rnd(2, 3, 1), rnd(2, 3, 2)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.add(in[0], in[1]));
  });
}

TEST(TapeGrad, SharedLeafAccumulates) {
  expect_grads_match({rnd(2, 2, 3)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.add(in[0], in[0]));
  });
}

TEST(TapeGrad, Scale) {
  expect_grads_match({rnd(3, 2, 4)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.scale(in[0], -2.5));
  });
}

TEST(TapeGrad, Hadamard) {
  expect_grads_match({rnd(2, 3, 5), rnd(2, 3, 6)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.hadamard(in[0], in[1]));
  });
}

TEST(TapeGrad, MatmulAllTransposeFlags) {
  for (const bool ta : {false, true}) {
    for (const bool tb : {false, true}) {
      // Result is always 2x4: A contributes (2x3) or its transpose, etc.
      Matrix<double> a = ta ? rnd(3, 2, 7) : rnd(2, 3, 7);
      Matrix<double> b = tb ? rnd(4, 3, 8) : rnd(3, 4, 8);
      expect_grads_match({a, b}, [ta, tb](T& t, const std::vector<Id>& in) {
        return weighted_sum(t, t.matmul(in[0], in[1], ta, tb));
      });
    }
  }
}

TEST(TapeGrad, SpmmSymmetric) {
  std::map<std::pair<std::size_t, std::size_t>, double> e;
  e[{0, 0}] = 0.5;
  e[{0, 1}] = e[{1, 0}] = 0.7;
  e[{1, 2}] = e[{2, 1}] = -0.3;
  const auto a = Csr<double>::from_entries(3, 3, e);
  ASSERT_TRUE(a.is_symmetric());
  expect_grads_match({rnd(3, 2, 9)}, [&a](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.spmm_sym(&a, in[0]));
  });
}

TEST(TapeGrad, GatherRowsWithRepeats) {
  expect_grads_match({rnd(3, 2, 10)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.gather_rows(in[0], {1, 0, 1, 2}));
  });
}

TEST(TapeGrad, MixedRows) {
  std::vector<std::optional<std::size_t>> map = {std::nullopt, 1, std::nullopt, 0};
  expect_grads_match({rnd(2, 3, 11), rnd(4, 3, 12)},
                     [map](T& t, const std::vector<Id>& in) {
                       return weighted_sum(t, t.mixed_rows(in[0], in[1], map));
                     });
}

TEST(TapeGrad, ConcatAndSliceCols) {
  expect_grads_match({rnd(2, 2, 13), rnd(2, 3, 14)}, [](T& t, const std::vector<Id>& in) {
    const Id cat = t.concat_cols(in[0], in[1]);
    return weighted_sum(t, t.slice_cols(cat, 1, 3));
  });
}

TEST(TapeGrad, SoftmaxRows) {
  expect_grads_match({rnd(3, 4, 15)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.softmax_rows(in[0]));
  });
}

TEST(TapeGrad, SoftmaxRowsWithMask) {
  const Matrix<double> mask = [] {
    Matrix<double> m(3, 4);
    for (std::size_t i = 0; i < 3; ++i) m(i, 2) = -1e9;
    return m;
  }();
  expect_grads_match({rnd(3, 4, 16)}, [&mask](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.softmax_rows(in[0], &mask));
  });
}

TEST(TapeGrad, ColBroadcastMul) {
  expect_grads_match({rnd(3, 2, 17), rnd(3, 1, 18)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.col_broadcast_mul(in[0], in[1]));
  });
}

TEST(TapeGrad, RowBroadcastAdd) {
  expect_grads_match({rnd(3, 4, 19), rnd(1, 4, 20)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.row_broadcast_add(in[0], in[1]));
  });
}

TEST(TapeGrad, LayerNorm) {
  expect_grads_match({rnd(3, 5, 21), rnd(1, 5, 22, 0.5, 1.5), rnd(1, 5, 23)},
                     [](T& t, const std::vector<Id>& in) {
                       return weighted_sum(t, t.layer_norm(in[0], in[1], in[2]));
                     },
                     5e-6);
}

TEST(TapeGrad, Gelu) {
  expect_grads_match({rnd(3, 3, 24, -2, 2)}, [](T& t, const std::vector<Id>& in) {
    return weighted_sum(t, t.gelu(in[0]));
  });
}

TEST(TapeGrad, NllFromLogits) {
  const std::vector<std::size_t> targets = {2, 0, 1};
  const std::vector<unsigned char> include = {1, 0, 1};
  expect_grads_match({rnd(3, 4, 25)}, [&](T& t, const std::vector<Id>& in) {
    return t.nll_sum_from_logits(in[0], targets, include);
  });
}

TEST(TapeValue, SoftmaxHandValues) {
  T t;
  Matrix<double> logits(1, 2);
  logits(0, 0) = std::log(3.0);
  logits(0, 1) = 0.0;
  const Id y = t.softmax_rows(t.constant(logits));
  EXPECT_NEAR(t.value(y)(0, 0), 0.75, 1e-12);
  EXPECT_NEAR(t.value(y)(0, 1), 0.25, 1e-12);
}

TEST(TapeValue, GeluKnownPoints) {
  T t;
  Matrix<double> x(1, 2);
  x(0, 0) = 0.0;
  x(0, 1) = 1.0;
  const Id y = t.gelu(t.constant(x));
  EXPECT_DOUBLE_EQ(t.value(y)(0, 0), 0.0);
  EXPECT_NEAR(t.value(y)(0, 1), 0.8413447460685429, 1e-12);
}

TEST(TapeValue, NllMatchesHandComputation) {
  T t;
  Matrix<double> logits(1, 2);
  logits(0, 0) = std::log(9.0);
  logits(0, 1) = 0.0;
  const Id nll = t.nll_sum_from_logits(t.constant(logits), {0}, {1});
  EXPECT_NEAR(t.value(nll)(0, 0), -std::log(0.9), 1e-12);
}

TEST(TapeValue, NllClampCountsAndDropsGradient) {
  T t;
  Matrix<double> logits(2, 2);
  logits(0, 0) = -60.0;  // p ~ 8.8e-27 < 1e-12 floor
  logits(0, 1) = 0.0;
  logits(1, 0) = 1.0;
  logits(1, 1) = 0.0;
  std::size_t clamped = 0;
  const Id leaf = t.leaf(logits, true);
  const Id nll = t.nll_sum_from_logits(leaf, {0, 0}, {1, 1}, &clamped);
  EXPECT_EQ(clamped, 1u);
  EXPECT_NEAR(t.value(nll)(0, 0), -std::log(1e-12) + std::log1p(std::exp(-1.0)), 1e-9);
  t.backward(nll);
  EXPECT_DOUBLE_EQ(t.grad(leaf)(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(t.grad(leaf)(0, 1), 0.0);
  EXPECT_NE(t.grad(leaf)(1, 0), 0.0);
}

TEST(TapeContract, BackwardNeedsScalarRoot) {
  T t;
  const Id a = t.leaf(rnd(2, 2, 26), true);
  EXPECT_THROW(t.backward(a), DimensionError);
}

TEST(TapeContract, ConstantsGetNoGradient) {
  T t;
  const Id a = t.leaf(rnd(2, 2, 27), true);
  const Id c = t.constant(rnd(2, 2, 28));
  const Id root = t.sum_all(t.hadamard(a, c));
  t.backward(root);
  EXPECT_FALSE(t.needs_grad(c));
  for (double v : t.grad(c).values()) EXPECT_DOUBLE_EQ(v, 0.0);
  bool any = false;
  for (double v : t.grad(a).values()) any = any || v != 0.0;
  EXPECT_TRUE(any);
}

TEST(TapeContract, ShapeMismatchThrows) {
  T t;
  const Id a = t.leaf(rnd(2, 2, 29));
  const Id b = t.leaf(rnd(2, 3, 30));
  EXPECT_THROW(t.add(a, b), DimensionError);
  EXPECT_THROW(t.gather_rows(a, {5}), DimensionError);
  EXPECT_THROW(t.slice_cols(a, 1, 4), DimensionError);
}

}  // namespace
