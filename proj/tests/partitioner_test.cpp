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

#include <cmath>

#include "pgm/error.hpp"
#include "pgm/gradcheck.hpp"
#include "pgm/nn.hpp"
#include "pgm/partitioner.hpp"
#include "test_util.hpp"

namespace pgm {
namespace {

using testing::random_tensor;

Tensor cumsoftmax_of(const Tensor& logits) {
  Tape t;
  return cumsoftmax(t.constant(logits)).value();
}

TEST(Cumsoftmax, UniformLogits) {
  EXPECT_EQ(cumsoftmax_of(Tensor::vector({0, 0, 0, 0})), Tensor::vector({0.25, 0.5, 0.75, 1.0}));
}

TEST(Cumsoftmax, TwoLogits) {
  const Tensor y = cumsoftmax_of(Tensor::vector({std::log(3.0), 0.0}));
  EXPECT_NEAR(y[0], 0.75, 1e-15);
  EXPECT_NEAR(y[1], 1.0, 1e-15);
}

TEST(Cumsoftmax, NeedsTwoEntries) {
  Tape t;
  EXPECT_THROW(cumsoftmax(t.constant(Tensor::vector({1.0}))), Error);
}

TEST(Gates, ZeroMapWeightsGiveUniformGates) {
  ParameterSet set;
  Rng rng(3);
  PartitionerParams params = make_partitioner_params(set, "part", 6, rng);
  for (Parameter* p : set.all()) p->value.fill(0.0);
  Tape t;
  Var x = t.constant(random_tensor({2, 4, 6}, 1));
  GateSet g = compute_gates(t, x, x, params);
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_NEAR(g.g_p.value()[j], (j + 1) / 6.0, 1e-15);
    EXPECT_NEAR(g.g_u.value()[j], 1.0 - (j + 1) / 6.0, 1e-15);
  }
}

TEST(Gates, UniGateVanishesAtTheLastChannel) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tape t;
    GateSet g = gates_from_logits(t.constant(random_tensor({9}, seed, -8, 8)),
                                  t.constant(random_tensor({9}, seed + 50, -8, 8)), 1);
    EXPECT_NEAR(g.g_u.value()[8], 0.0, 1e-12);
    EXPECT_NEAR(g.g_p.value()[8], 1.0, 1e-12);
  }
}

// Draws 1000 random logit pairs and checks ordering, the endpoint and the
// decomposition of each gate into its exclusive and shared parts.
TEST(Gates, RandomLogitProperties) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 2 + rng.next_u64() % 31;
    const double scale = 0.1 + 10.0 * rng.uniform();
    Tensor lu(Shape{d}), lp(Shape{d});
    for (std::size_t j = 0; j < d; ++j) {
      lu[j] = scale * rng.normal();
      lp[j] = scale * rng.normal();
    }
    Tape t;
    GateSet g = gates_from_logits(t.constant(lu), t.constant(lp), 1);
    const Tensor& gu = g.g_u.value();
    const Tensor& gp = g.g_p.value();
    const Tensor c = cumsoftmax_of(lp);
    EXPECT_NEAR(c[d - 1], 1.0, 1e-9);
    for (std::size_t j = 0; j < d; ++j) {
      if (j > 0) {
        EXPECT_LE(gu[j], gu[j - 1]);
        EXPECT_GE(gp[j], gp[j - 1]);
      }
      EXPECT_EQ(g.g_s.value()[j], gu[j] * gp[j]);
      EXPECT_NEAR(g.upper.value()[j] + g.g_s.value()[j], gu[j], 0x1.0p-52);
      EXPECT_NEAR(g.downer.value()[j] + g.g_s.value()[j], gp[j], 0x1.0p-52);
      for (const Var* v : {&g.g_u, &g.g_p, &g.g_s, &g.upper, &g.downer}) {
        EXPECT_GE(v->value()[j], 0.0);
        EXPECT_LE(v->value()[j], 1.0);
      }
    }
  }
}

TEST(Update, UniformGatesOnFourChannels) {
  Tape t;
  Var x = t.constant(Tensor(Shape{1, 1, 4}, std::vector<double>{1, 2, 3, 4}));
  GateSet g = gates_from_logits(t.constant(Tensor::vector({0, 0, 0, 0})),
                                t.constant(Tensor::vector({0, 0, 0, 0})), 1);
  PartitionState s0{x, x, x, {}, 0};
  PartitionState s1 = update_partitions(x, s0, g);
  // From identical starting partitions each side reduces to its own gate times the input.
  const std::vector<double> u{0.75, 1.0, 0.75, 0.0};
  const std::vector<double> p{0.25, 1.0, 2.25, 4.0};
  const std::vector<double> shared{0.1875, 0.5, 0.5625, 0.0};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(s1.u.value()[j], u[j], 1e-15);
    EXPECT_NEAR(s1.p.value()[j], p[j], 1e-15);
    EXPECT_NEAR(s1.shared.value()[j], shared[j], 1e-15);
  }
  EXPECT_EQ(s1.iteration, 1);
}

TEST(Update, ZeroStateKeepsOnlySharedPart) {
  Tape t;
  Var x = t.constant(random_tensor({2, 3, 5}, 4));
  Var zero = t.constant(Tensor(Shape{2, 3, 5}));
  GateSet g = gates_from_logits(t.constant(random_tensor({5}, 5)), t.constant(random_tensor({5}, 6)), 1);
  PartitionState s1 = update_partitions(x, PartitionState{zero, zero, zero, {}, 0}, g);
  EXPECT_EQ(s1.u.value(), s1.shared.value());
  EXPECT_EQ(s1.p.value(), s1.shared.value());
}

TEST(Update, RejectsMismatchedWidths) {
  Tape t;
  Var x = t.constant(Tensor(Shape{1, 2, 4}));
  GateSet g = gates_from_logits(t.constant(Tensor::vector({0, 0, 0})), t.constant(Tensor::vector({0, 0, 0})), 1);
  EXPECT_THROW(update_partitions(x, PartitionState{x, x, x, {}, 0}, g), Error);
}

TEST(Harden, Examples) {
  const HardGate u = harden(Tensor::vector({0.9, 0.7, 0.4, 0.1}), GateRole::kUni);
  EXPECT_EQ(u.mask, (std::vector<int>{1, 1, 0, 0}));
  EXPECT_EQ(u.cut, 2u);
  const HardGate p = harden(Tensor::vector({0.1, 0.4, 0.7, 0.9}), GateRole::kPaired);
  EXPECT_EQ(p.mask, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(p.cut, 3u);
  const HardGate edge = harden(Tensor::vector({0.5, 0.5, 0.49}), GateRole::kUni);
  EXPECT_EQ(edge.mask, (std::vector<int>{1, 1, 0}));
}

TEST(Harden, KeepsAtLeastOneChannel) {
  const HardGate u = harden(Tensor::vector({0.3, 0.2, 0.0}), GateRole::kUni);
  EXPECT_EQ(u.mask, (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(u.cut, 1u);
  const HardGate p = harden(Tensor::vector({0.0, 0.1, 0.2}), GateRole::kPaired);
  EXPECT_EQ(p.mask, (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(p.cut, 3u);
}

TEST(Harden, RejectsNonMonotoneGates) {
  EXPECT_THROW(harden(Tensor::vector({0.2, 0.8}), GateRole::kUni), Error);
  EXPECT_THROW(harden(Tensor::vector({0.8, 0.2}), GateRole::kPaired), Error);
  EXPECT_THROW(harden(Tensor(Shape{0}), GateRole::kUni), Error);
}

TEST(Harden, IsIdempotent) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tape t;
    GateSet g = gates_from_logits(t.constant(random_tensor({12}, seed, -3, 3)),
                                  t.constant(random_tensor({12}, seed + 99, -3, 3)), 1);
    for (auto [gate, role] : {std::pair{g.g_u, GateRole::kUni}, std::pair{g.g_p, GateRole::kPaired}}) {
      const HardGate once = harden(gate.value(), role);
      const HardGate twice = harden(once.as_tensor(), role);
      EXPECT_EQ(once.mask, twice.mask);
      EXPECT_EQ(once.cut, twice.cut);
    }
  }
}

TEST(Mask, SixChannelsFourRows) {
  const HardGate g = harden(Tensor::vector({1, 1, 1, 1, 0, 0}), GateRole::kUni);
  const Tensor m = build_padding_mask(g, 4);
  ASSERT_EQ(m.shape(), (Shape{4, 6}));
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(m[r * 6 + c], c < 4 ? 0.0 : -10000.0);
  }
}

TEST(Mask, CustomConstantAndPairedRole) {
  const HardGate g = harden(Tensor::vector({0, 0, 1}), GateRole::kPaired);
  const Tensor m = build_padding_mask(g, 2, -1e9);
  EXPECT_EQ(m, Tensor(Shape{2, 3}, std::vector<double>{-1e9, -1e9, 0, -1e9, -1e9, 0}));
}

TEST(Partition, TraceHasOneStatePerIteration) {
  ParameterSet set;
  Rng rng(1);
  PartitionerParams params = make_partitioner_params(set, "part", 8, rng);
  for (int n = 1; n <= 4; ++n) {
    Tape t;
    PartitionTrace tr = partition(t, t.constant(random_tensor({2, 4, 8}, 7)), n, params);
    ASSERT_EQ(tr.states.size(), static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) EXPECT_EQ(tr.states[i].iteration, i + 1);
    EXPECT_EQ(tr.final_uni.width(), 8u);
  }
  Tape t;
  EXPECT_THROW(partition(t, t.constant(random_tensor({2, 4, 8}, 7)), 0, params), Error);
}

TEST(Partition, Deterministic) {
  auto once = [] {
    ParameterSet set;
    Rng rng(11);
    PartitionerParams params = make_partitioner_params(set, "part", 8, rng);
    Tape t;
    PartitionTrace tr = partition(t, t.constant(random_tensor({3, 4, 8}, 2)), 3, params);
    return std::pair{tr.states.back().u.value(), tr.states.back().p.value()};
  };
  EXPECT_EQ(once(), once());
}

TEST(Partition, NearUniformStartCutsNearTheMiddle) {
  ParameterSet set;
  Rng rng(5);
  PartitionerParams params = make_partitioner_params(set, "part", 16, rng);
  Tape t;
  PartitionTrace tr = partition(t, t.constant(random_tensor({4, 8, 16}, 3)), 3, params);
  EXPECT_NEAR(static_cast<double>(tr.final_uni.cut), 8.0, 1.0);
  EXPECT_NEAR(static_cast<double>(tr.final_paired.cut), 9.0, 1.0);
}

TEST(Partition, ParametersReceiveGradientAndPassGradCheck) {
  ParameterSet set;
  Rng rng(8);
  PartitionerParams params = make_partitioner_params(set, "part", 6, rng);
  for (Parameter* p : set.all()) {
    for (double& v : p->value.data()) v += rng.normal(0.0, 0.3);
  }
  const Tensor x = random_tensor({2, 3, 6}, 12);
  const Tensor w = random_tensor({2, 3, 6}, 13);
  const ParamLossFn f = [&](Tape& t) {
    PartitionTrace tr = partition(t, t.constant(x), 3, params);
    Var wv = t.constant(w);
    return add(sum_all(mul(tr.states.back().u, wv)), sum_all(mul(tr.states.back().p, mul(wv, wv))));
  };
  Tape t;
  Var loss = f(t);
  for (Parameter* p : set.all()) p->grad = Tensor(p->value.shape());
  t.backward(loss);
  for (Parameter* p : set.all()) {
    double norm = 0.0;
    for (double g : p->grad.data()) norm += g * g;
    EXPECT_GT(norm, 0.0) << p->name;
  }
  const std::vector<Parameter*> ps = set.all();
  EXPECT_LT(grad_check_params(f, ps, 1e-6).max_rel_error, 1e-5);
}

TEST(Report, PercentagesAndCuts) {
  const HardGate u = harden(Tensor::vector({1, 1, 1, 0}), GateRole::kUni);
  const HardGate p = harden(Tensor::vector({0, 0, 1, 1}), GateRole::kPaired);
  const PartitionReportRow r = partition_report_row("A", u, p);
  EXPECT_DOUBLE_EQ(r.percent_uni, 75.0);
  EXPECT_DOUBLE_EQ(r.percent_paired, 50.0);
  EXPECT_DOUBLE_EQ(r.percent_overlap, 25.0);
  EXPECT_EQ(r.cut_u, 3u);
  EXPECT_EQ(r.cut_p, 3u);
}

}  // namespace
}  // namespace pgm
