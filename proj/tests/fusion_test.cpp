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
#include <numbers>

#include "pgm/error.hpp"
#include "pgm/fusion.hpp"
#include "test_util.hpp"

namespace pgm {
namespace {

using testing::random_tensor;

FusionHead head_for(ParameterSet& set, std::size_t n_mod, FusionMode mode = FusionMode::kPartitioned,
                    TaskKind task = TaskKind::kClassification) {
  Rng rng(21);
  return make_fusion_head(set, "fusion", mode, task, n_mod, 8, 2, 2, rng);
}

std::vector<Var> inputs(Tape& t, std::size_t n, std::uint64_t seed) {
  std::vector<Var> v;
  for (std::size_t m = 0; m < n; ++m) v.push_back(t.constant(random_tensor({3, 4, 8}, seed + m)));
  return v;
}

TEST(Fusion, ShapesForTwoAndThreeModalities) {
  for (std::size_t n : {2u, 3u}) {
    ParameterSet set;
    FusionHead h = head_for(set, n);
    Tape t;
    Var f = h.fuse(t, inputs(t, n, 1), inputs(t, n, 10));
    EXPECT_EQ(f.shape(), (Shape{3, 8}));
    EXPECT_EQ(h.predict(t, f).shape(), (Shape{3, 2}));
    EXPECT_THROW(h.fuse(t, inputs(t, n, 1), inputs(t, n + 1, 10)), Error);
  }
}

TEST(Fusion, MatchingStreamsGiveMatchingOutputs) {
  ParameterSet set;
  FusionHead h = head_for(set, 2);
  // Copy every uni-side weight onto its paired twin.
  for (Parameter* p : set.all()) {
    const auto pos = p->name.find(".uni_");
    if (pos == std::string::npos) continue;
    std::string twin = p->name;
    twin.replace(pos, 5, ".paired_");
    set.find(twin)->value = p->value;
  }
  Tape t;
  std::vector<Var> x = inputs(t, 2, 3);
  Var u_f, p_f;
  h.fuse(t, x, x, &u_f, &p_f);
  EXPECT_EQ(u_f.value(), p_f.value());
}

TEST(Fusion, ZeroPredictorGivesUniformClassLoss) {
  ParameterSet set;
  FusionHead h = head_for(set, 2);
  Tape t;
  Var logits = h.predict(t, h.fuse(t, inputs(t, 2, 1), inputs(t, 2, 5)));
  const std::vector<int> labels{0, 1, 1};
  EXPECT_NEAR(task_loss(logits, labels, {}, TaskKind::kClassification).value()[0], std::numbers::ln2, 1e-15);
}

TEST(Fusion, ShiftingLogitsKeepsTheArgmaxAndTheLoss) {
  Tape t;
  const Tensor z = random_tensor({5, 3}, 2);
  Tensor shifted = z;
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) shifted[r * 3 + c] += 7.5 * static_cast<double>(r);
  const std::vector<int> labels{0, 2, 1, 1, 0};
  EXPECT_NEAR(task_loss(t.constant(z), labels, {}, TaskKind::kClassification).value()[0],
              task_loss(t.constant(shifted), labels, {}, TaskKind::kClassification).value()[0], 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    auto argmax = [&](const Tensor& x) {
      return std::max_element(x.data().begin() + r * 3, x.data().begin() + r * 3 + 3) - x.data().begin();
    };
    EXPECT_EQ(argmax(z), argmax(shifted));
  }
}

TEST(Fusion, RegressionLoss) {
  Tape t;
  Var pred = t.constant(Tensor(Shape{2, 1}, std::vector<double>{1.0, -1.0}));
  const std::vector<double> targets{0.0, 1.0};
  EXPECT_DOUBLE_EQ(task_loss(pred, {}, targets, TaskKind::kRegression).value()[0], 2.5);
  const std::vector<double> wrong{0.0};
  EXPECT_THROW(task_loss(pred, {}, wrong, TaskKind::kRegression), Error);
  ParameterSet set;
  FusionHead h = head_for(set, 2, FusionMode::kPartitioned, TaskKind::kRegression);
  EXPECT_EQ(h.predict(t, h.fuse(t, inputs(t, 2, 1), inputs(t, 2, 2))).shape(), (Shape{3, 1}));
}

TEST(Fusion, ConcatModePoolsEachModality) {
  ParameterSet set;
  FusionHead h = head_for(set, 2, FusionMode::kConcat);
  Tape t;
  std::vector<Var> x = inputs(t, 2, 4);
  Var c = h.concat_inputs(t, x);
  ASSERT_EQ(c.shape(), (Shape{3, 16}));
  for (std::size_t m = 0; m < 2; ++m) {
    const Tensor& xm = x[m].value();
    for (std::size_t j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (std::size_t s = 0; s < 4; ++s) acc += xm[s * 8 + j];
      EXPECT_NEAR(c.value()[m * 8 + j], acc / 4.0, 1e-15);
    }
  }
  EXPECT_EQ(h.predict(t, c).shape(), (Shape{3, 2}));
  EXPECT_THROW(h.fuse(t, x, x), Error);
}

TEST(Fusion, TaskKindNames) {
  EXPECT_EQ(parse_task_kind("regression"), TaskKind::kRegression);
  EXPECT_STREQ(task_kind_name(TaskKind::kClassification), "classification");
  EXPECT_THROW(parse_task_kind("ranking"), Error);
}

}  // namespace
}  // namespace pgm
