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

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "pgm/error.hpp"
#include "pgm/nn.hpp"
#include "pgm/objectives.hpp"
#include "test_util.hpp"

namespace pgm {
namespace {

using testing::random_tensor;

Linear zero_head(ParameterSet& set, std::size_t in, std::size_t out) {
  Rng rng(0);
  return make_linear(set, "head", in, out, ParamGroup::kOverall, rng, Init::kZero);
}

TEST(Ufc, ZeroHeadGivesLogOfModalityCount) {
  for (std::size_t n : {2u, 3u}) {
    ParameterSet set;
    Linear head = zero_head(set, 4, n);
    Tape t;
    std::vector<Var> f;
    for (std::size_t m = 0; m < n; ++m) f.push_back(t.constant(random_tensor({3, 2, 4}, m)));
    EXPECT_NEAR(ufc_loss(t, f, head).value()[0], std::log(static_cast<double>(n)), 1e-12);
  }
}

TEST(Ufc, SeparableFeaturesGiveSmallLoss) {
  ParameterSet set;
  Linear head = zero_head(set, 2, 2);
  head.weight->value = Tensor(Shape{2, 2}, std::vector<double>{20, -20, -20, 20});
  Tape t;
  Tensor a(Shape{1, 1, 2}, std::vector<double>{1, 0});
  Tensor b(Shape{1, 1, 2}, std::vector<double>{0, 1});
  const std::array<Var, 2> f{t.constant(a), t.constant(b)};
  EXPECT_LT(ufc_loss(t, f, head).value()[0], 1e-15);
  const std::array<Var, 2> swapped{t.constant(b), t.constant(a)};
  EXPECT_NEAR(ufc_loss(t, swapped, head).value()[0], 40.0, 1e-9);
}

TEST(Ufc, NeedsTwoModalities) {
  ParameterSet set;
  Linear head = zero_head(set, 4, 2);
  Tape t;
  const std::array<Var, 1> f{t.constant(random_tensor({1, 2, 4}, 1))};
  EXPECT_THROW(ufc_loss(t, f, head), Error);
}

TEST(Pfc, ZeroHeadGivesLogTwo) {
  ParameterSet set;
  Linear head = zero_head(set, 4, 2);
  Tape t;
  const std::array<Var, 2> u{t.constant(random_tensor({2, 3, 4}, 1)), t.constant(random_tensor({2, 3, 4}, 2))};
  const std::array<Var, 2> p{t.constant(random_tensor({2, 3, 4}, 3)), t.constant(random_tensor({2, 3, 4}, 4))};
  EXPECT_NEAR(pfc_loss(t, u, p, head).value()[0], std::numbers::ln2, 1e-12);
}

TEST(Pfc, IdenticalUniAndPairedFeaturesCannotBeSeparated) {
  ParameterSet set;
  Linear head = zero_head(set, 4, 2);
  Rng rng(5);
  for (double& v : head.weight->value.data()) v = rng.normal();
  for (double& v : head.bias->value.data()) v = rng.normal();
  Tape t;
  const std::array<Var, 1> u{t.constant(random_tensor({2, 3, 4}, 1))};
  // Mean of -log s and -log(1 - s) is at least ln 2.
  EXPECT_GE(pfc_loss(t, u, u, head).value()[0], std::numbers::ln2 - 1e-12);
  EXPECT_THROW(pfc_loss(t, u, std::span<const Var>{}, head), Error);
}

TEST(Upr, Examples) {
  Tape t;
  Var a = t.constant(Tensor(Shape{2, 1, 2}, std::vector<double>{1, 2, 3, 4}));
  Var b = t.constant(Tensor(Shape{2, 1, 2}, std::vector<double>{1, 0, 3, 5}));
  const std::array<Var, 1> o{a}, r{b};
  EXPECT_DOUBLE_EQ(upr_loss(o, r, 2).value()[0], 5.0 / 4.0);
  const std::array<Var, 1> same{a};
  EXPECT_EQ(upr_loss(o, same, 2).value()[0], 0.0);
  EXPECT_THROW(upr_loss(o, r, 0), Error);
}

TEST(Upr, SumsOverModalities) {
  Tape t;
  Tensor x = random_tensor({3, 2, 4}, 1), y = random_tensor({3, 2, 4}, 2);
  Tensor z = random_tensor({3, 2, 4}, 3), w = random_tensor({3, 2, 4}, 4);
  double ref = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ref += (x[i] - y[i]) * (x[i] - y[i]) + (z[i] - w[i]) * (z[i] - w[i]);
  ref /= 3.0 * 8.0;
  const std::array<Var, 2> o{t.constant(x), t.constant(z)}, r{t.constant(y), t.constant(w)};
  EXPECT_NEAR(upr_loss(o, r, 8).value()[0], ref, 1e-12);
}

TEST(PretrainLoss, SumsAllTermsOverIterations) {
  const std::vector<IterationLosses> trace{{1, 2, 3}, {0.5, 0.25, 0.125}};
  EXPECT_DOUBLE_EQ(pretrain_loss(trace, 2), 6.875);
  EXPECT_THROW(pretrain_loss(trace, 3), Error);
  EXPECT_THROW(pretrain_loss({}, 0), Error);
}

TEST(PretrainLoss, OrderOfIterationsDoesNotMatter) {
  Rng rng(1);
  std::vector<IterationLosses> trace(5);
  for (auto& it : trace) it = {rng.uniform(), rng.uniform(), rng.uniform()};
  const double a = pretrain_loss(trace, 5);
  std::reverse(trace.begin(), trace.end());
  EXPECT_NEAR(pretrain_loss(trace, 5), a, 1e-14);
}

TEST(JointLoss, WeightedSum) {
  EXPECT_DOUBLE_EQ(joint_loss(2.0, 3.0, 0.5, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(joint_loss(2.0, 3.0, 0.0, 1.0), 3.0);
  EXPECT_THROW(joint_loss(1.0, 1.0, -0.1, 1.0), Error);
  Tape t;
  EXPECT_DOUBLE_EQ(joint_loss(t.constant(Tensor::scalar(2.0)), t.constant(Tensor::scalar(3.0)), 0.5, 2.0).value()[0], 7.0);
}

TEST(LossReport, TotalsPerStage) {
  const LossReport p = make_loss_report(1, Stage::kPretrain, 1, 2, 3, std::nullopt, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(p.total, 6.0);
  const LossReport j = make_loss_report(2, Stage::kJoint, 1, 2, 3, 0.7, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(j.total, 3.7);
  EXPECT_EQ(loss_report_csv_row(p), "1,pretrain,1,2,3,,6");
  EXPECT_EQ(loss_report_csv_row(j).rfind("2,joint,1,2,3,0.69999999999999996,", 0), 0u);
  EXPECT_STREQ(kLossCurveHeader, "epoch,stage,ufc,pfc,upr,task,total");
}

}  // namespace
}  // namespace pgm
