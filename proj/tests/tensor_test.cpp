/*
 * Copyright 2026 The PgM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "pgm/autodiff.hpp"
#include "pgm/checks.hpp"
#include "pgm/error.hpp"
#include "pgm/gradcheck.hpp"
#include "test_util.hpp"

namespace pgm {
namespace {

using testing::random_tensor;

Tensor run(Tensor x, Var (*op)(Var)) {
  Tape t;
  return op(t.constant(std::move(x))).value();
}

TEST(Tensor, RejectsDataOfWrongLength) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), Error);
}

TEST(Tensor, NegativeAxesCountFromTheBack) {
  Tensor t(Shape{2, 3, 4});
  EXPECT_EQ(t.dim(-1), 4u);
  EXPECT_EQ(t.dim(0), 2u);
  EXPECT_THROW(t.dim(3), Error);
}

TEST(Softmax, SymmetricInputs) {
  const Tensor a = run(Tensor::vector({0, 0}), softmax);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  const Tensor b = run(Tensor::vector({1, 1, 1, 1}), softmax);
  for (double v : b.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, HandComputedTwoLogits) {
  const Tensor a = run(Tensor::vector({2, 0}), softmax);
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(a[0], 0.8808, 1e-3);
  EXPECT_NEAR(a[1], 0.1192, 1e-3);
  EXPECT_NEAR(a[0], e2 / (e2 + 1.0), 1e-15);
}

TEST(Softmax, RowsSumToOneAndStayInOpenUnitInterval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor y = run(random_tensor({7, 9}, seed, -30, 30), softmax);
    for (std::size_t r = 0; r < 7; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        const double v = y[r * 9 + c];
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, EmptyLastAxisIsAnError) {
  Tape t;
  EXPECT_THROW(softmax(t.constant(Tensor(Shape{3, 0}))), Error);
}

TEST(Cumsum, Examples) {
  EXPECT_EQ(run(Tensor::vector({1, 2, 3}), cumsum), Tensor::vector({1, 3, 6}));
  EXPECT_EQ(run(Tensor::vector({0, 0, 0}), cumsum), Tensor::vector({0, 0, 0}));
  EXPECT_EQ(run(Tensor::vector({0.25, 0.25, 0.25, 0.25}), cumsum), Tensor::vector({0.25, 0.5, 0.75, 1.0}));
}

TEST(Cumsum, OfSoftmaxIsNonDecreasingAndEndsAtOne) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tape t;
    const Tensor y = cumsum(softmax(t.constant(random_tensor({4, 11}, seed, -5, 5)))).value();
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 1; c < 11; ++c) EXPECT_GE(y[r * 11 + c], y[r * 11 + c - 1]);
      EXPECT_NEAR(y[r * 11 + 10], 1.0, 1e-9);
    }
  }
}

TEST(ConcatSlice, SliceAtTheConcatBoundaryIsIdentity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tape t;
    Var a = t.constant(random_tensor({2, 3, 4}, seed));
    Var b = t.constant(random_tensor({2, 3, 5}, seed + 100));
    const std::array<Var, 2> parts{a, b};
    Var c = concat(parts);
    EXPECT_EQ(slice(c, 0, 4).value(), a.value());
    EXPECT_EQ(slice(c, 4, 9).value(), b.value());
  }
}

TEST(Broadcast, SuffixShapesBroadcastOverLeadingAxes) {
  Tape t;
  Var a = t.constant(Tensor(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
  Var b = t.constant(Tensor::vector({10, 20, 30}));
  EXPECT_EQ(add(a, b).value(), Tensor(Shape{2, 3}, std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_THROW(add(a, t.constant(Tensor::vector({1, 2}))), Error);
}

TEST(Maximum, Elementwise) {
  Tape t;
  Var y = maximum(t.constant(Tensor::vector({1, -2})), t.constant(Tensor::vector({0, 3})));
  EXPECT_EQ(y.value(), Tensor::vector({1, 3}));
}

TEST(Matmul, SmallExample) {
  Tape t;
  Var a = t.constant(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3, 4}));
  Var w = t.constant(Tensor(Shape{2, 3}, std::vector<double>{1, 0, 2, 0, 1, 3}));
  EXPECT_EQ(matmul(a, w).value(), Tensor(Shape{2, 3}, std::vector<double>{1, 2, 8, 3, 4, 18}));
}

TEST(Tape, BackwardTwiceWithoutResetIsAnError) {
  Tape t;
  Var x = t.leaf(Tensor::vector({1, 2}));
  Var y = sum_all(mul(x, x));
  t.backward(y);
  EXPECT_THROW(t.backward(y), Error);
  t.reset();
  Var x2 = t.leaf(Tensor::vector({1, 2}));
  t.backward(sum_all(x2));
  EXPECT_EQ(t.grad(x2), Tensor::vector({1, 1}));
}

TEST(Tape, BackwardNeedsAScalar) {
  Tape t;
  Var x = t.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(t.backward(x), Error);
}

TEST(Tape, NonFiniteForwardNamesTheOp) {
  Tape t;
  Var x = t.leaf(Tensor::vector({1e300, 1.0}));
  try {
    mul(x, x);
    FAIL() << "expected a non-finite error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
    EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos);
  }
}

TEST(Tape, GradientsAccumulateIntoParameters) {
  Parameter p{"w", Tensor::vector({3.0}), Tensor(), ParamGroup::kOverall};
  Tape t;
  Var w = t.param(p);
  t.backward(sum_all(mul(w, w)));
  EXPECT_DOUBLE_EQ(p.grad[0], 6.0);
}

TEST(Determinism, IdenticalInputsGiveBitIdenticalOutputs) {
  auto once = [] {
    Tape t;
    Var q = t.constant(random_tensor({2, 5, 8}, 1));
    Var k = t.constant(random_tensor({2, 5, 8}, 2));
    Var v = t.constant(random_tensor({2, 5, 8}, 3));
    Var g = t.constant(random_tensor({8}, 4));
    Var b = t.constant(random_tensor({8}, 5));
    return gelu(layer_norm(attention(q, k, v, 2), g, b)).value();
  };
  EXPECT_EQ(once(), once());
}

TEST(GradCheck, QuadraticExample) {
  const ScalarFn f = [](Tape&, Var x) { return sum_all(mul(x, x)); };
  EXPECT_LT(grad_check(f, Tensor::vector({1, 2}), 1e-5), 1e-7);
  Tape t;
  Var x = t.leaf(Tensor::vector({1, 2}));
  t.backward(f(t, x));
  EXPECT_EQ(t.grad(x), Tensor::vector({2, 4}));
}

TEST(GradCheck, CrossEntropyOfSoftmaxLogits) {
  static const std::array<int, 1> label = {2};
  const ScalarFn f = [](Tape&, Var x) { return cross_entropy(reshape(x, Shape{1, 4}), label); };
  EXPECT_LT(grad_check(f, random_tensor({4}, 9), 1e-5), 1e-5);
}

TEST(GradCheck, RejectsBadArguments) {
  const ScalarFn sq = [](Tape&, Var x) { return sum_all(mul(x, x)); };
  const ScalarFn id = [](Tape&, Var x) { return x; };
  EXPECT_THROW(grad_check(sq, Tensor::vector({1}), 1e-2), Error);
  EXPECT_THROW(grad_check(sq, Tensor::vector({1}), 1e-9), Error);
  EXPECT_THROW(grad_check(id, Tensor::vector({1, 2}), 1e-5), Error);
  EXPECT_THROW(grad_check(sq, Tensor::vector({NAN}), 1e-5), Error);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A tape op whose recorded backward is off by a factor of two.
  const ScalarFn f = [](Tape& t, Var x) {
    Tensor y = x.value();
    for (double& v : y.data()) v = v * v;
    const std::array<Var, 1> in{x};
    Var sq = t.record("bad_square", y, in, [x](Tape& tt, std::size_t self) {
      const Tensor& g = tt.grad_buffer(self);
      Tensor& gx = tt.grad_buffer(x.id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 4.0 * tt.value(x.id)[i] * g[i];
    });
    return sum_all(sq);
  };
  EXPECT_GT(grad_check(f, Tensor::vector({1.0, -0.5}), 1e-5), 0.1);
}

TEST(GradCheck, EveryPrimitiveOverTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const GradCheckEntry& e : gradcheck_primitives(seed)) {
      EXPECT_LT(e.max_rel_error, 1e-5) << e.name << " seed " << seed;
    }
  }
}

}  // namespace
}  // namespace pgm
