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

#include "pgm/partitioner.hpp"

#include <algorithm>

#include "pgm/error.hpp"

namespace pgm {

std::size_t HardGate::ones() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

Tensor HardGate::as_tensor() const {
  Tensor t(Shape{mask.size()});
  for (std::size_t i = 0; i < mask.size(); ++i) t[i] = mask[i];
  return t;
}

PartitionerParams make_partitioner_params(ParameterSet& set, const std::string& name,
                                          std::size_t width, Rng& rng) {
  PartitionerParams p;
  p.uni_map = make_linear(set, name + ".uni_map", width, width, ParamGroup::kOverall, rng, Init::kZero);
  p.paired_map =
      make_linear(set, name + ".paired_map", width, width, ParamGroup::kOverall, rng, Init::kZero);
  // Small random weights, zero bias: gates start close to the uniform split.
  for (Parameter* w : {p.uni_map.weight, p.paired_map.weight}) {
    for (double& v : w->value.data()) v = rng.normal(0.0, 0.02);
  }
  return p;
}

Var cumsoftmax(Var v) {
  if (v.value().rank() == 0 || v.shape().back() < 2) {
    fail(ErrorCode::kShapeMismatch, "cumsoftmax needs a last axis of length >= 2");
  }
  return cumsum(softmax(v));
}

GateSet make_gate_set(Var g_u, Var g_p, int iteration) {
  if (g_u.shape() != g_p.shape()) {
    fail(ErrorCode::kShapeMismatch, "uni and paired gates differ in shape: " +
                                        shape_str(g_u.shape()) + " vs " + shape_str(g_p.shape()));
  }
  GateSet g;
  g.g_u = g_u;
  g.g_p = g_p;
  g.g_s = mul(g_u, g_p);
  g.upper = sub(g_u, g.g_s);
  g.downer = sub(g_p, g.g_s);
  g.iteration = iteration;
  return g;
}

namespace {

// Rounding in the cumulative sum can leave an entry an ulp outside [0, 1].
Var clamp_unit(Var x) {
  Tape& tape = *x.tape;
  Var lo = maximum(x, tape.constant(Tensor(x.shape(), 0.0)));
  return affine(maximum(affine(lo, -1.0), tape.constant(Tensor(x.shape(), -1.0))), -1.0);
}

}  // namespace

GateSet gates_from_logits(Var logits_u, Var logits_p, int iteration) {
  return make_gate_set(clamp_unit(affine(cumsoftmax(logits_u), -1.0, 1.0)),
                       clamp_unit(cumsoftmax(logits_p)), iteration);
}

namespace {

// (B, S, D) -> (D) arithmetic mean over batch and sequence.
Var pool_rows(Var x) {
  const Shape& s = x.shape();
  if (s.size() != 3) fail(ErrorCode::kShapeMismatch, "partition input must be (B, S, D)");
  return mean(reshape(x, Shape{s[0] * s[1], s[2]}), 0);
}

}  // namespace

GateSet compute_gates(Tape& tape, Var u_m, Var p_m, const PartitionerParams& params,
                      int iteration) {
  if (u_m.shape() != p_m.shape()) {
    fail(ErrorCode::kShapeMismatch, "compute_gates: " + shape_str(u_m.shape()) + " vs " +
                                        shape_str(p_m.shape()));
  }
  Var lu = params.uni_map.forward(tape, pool_rows(u_m));
  Var lp = params.paired_map.forward(tape, pool_rows(p_m));
  return gates_from_logits(lu, lp, iteration);
}

PartitionState update_partitions(Var input, const PartitionState& state, const GateSet& gates) {
  const Shape& s = input.shape();
  if (state.u.shape() != s || state.p.shape() != s) {
    fail(ErrorCode::kShapeMismatch, "update_partitions: partitions " + shape_str(state.u.shape()) +
                                        " do not match input " + shape_str(s));
  }
  if (s.empty() || gates.g_s.shape() != Shape{s.back()}) {
    fail(ErrorCode::kShapeMismatch, "update_partitions: gate width does not match input");
  }
  PartitionState next;
  next.shared = mul(input, gates.g_s);
  next.u = add(mul(state.u, gates.upper), next.shared);
  next.p = add(mul(state.p, gates.downer), next.shared);
  next.gates = gates;
  next.iteration = state.iteration + 1;
  return next;
}

HardGate harden(std::span<const double> gate, GateRole role, double theta) {
  const std::size_t n = gate.size();
  if (n == 0) fail(ErrorCode::kShapeMismatch, "harden: empty gate");
  for (std::size_t i = 1; i < n; ++i) {
    const bool ok = role == GateRole::kUni ? gate[i] <= gate[i - 1] : gate[i] >= gate[i - 1];
    if (!ok) {
      fail(ErrorCode::kInvalidArgument,
           std::string("harden: gate is not monotone for the ") +
               (role == GateRole::kUni ? "uni (non-increasing)" : "paired (non-decreasing)") +
               " role at index " + std::to_string(i));
    }
  }
  HardGate h;
  h.role = role;
  h.mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) h.mask[i] = gate[i] >= theta ? 1 : 0;
  if (h.ones() == 0) {
    // Minimum width: the largest entry sits at the open end of the monotone gate.
    h.mask[role == GateRole::kUni ? 0 : n - 1] = 1;
  }
  const std::size_t k = h.ones();
  h.cut = role == GateRole::kUni ? k : n - k + 1;
  return h;
}

Tensor build_padding_mask(const HardGate& gate, std::size_t seq_len, double c) {
  const std::size_t d = gate.width();
  Tensor m(Shape{seq_len, d});
  for (std::size_t r = 0; r < seq_len; ++r) {
    for (std::size_t j = 0; j < d; ++j) m[r * d + j] = gate.mask[j] == 1 ? 0.0 : c;
  }
  return m;
}

PartitionTrace partition(Tape& tape, Var input, int n_iters, const PartitionerParams& params,
                         double theta) {
  if (n_iters < 1) fail(ErrorCode::kInvalidArgument, "partition: n_iters must be >= 1");
  PartitionTrace trace;
  PartitionState state;
  state.u = input;
  state.p = input;
  state.iteration = 0;
  for (int i = 1; i <= n_iters; ++i) {
    GateSet gates = compute_gates(tape, state.u, state.p, params, i);
    state = update_partitions(input, state, gates);
    trace.states.push_back(state);
  }
  const GateSet& last = trace.states.back().gates;
  trace.final_uni = harden(last.g_u.value(), GateRole::kUni, theta);
  trace.final_paired = harden(last.g_p.value(), GateRole::kPaired, theta);
  return trace;
}

PartitionReportRow partition_report_row(const std::string& modality, const HardGate& uni,
                                        const HardGate& paired) {
  if (uni.width() != paired.width() || uni.width() == 0) {
    fail(ErrorCode::kShapeMismatch, "partition report: gate widths differ");
  }
  const double d = static_cast<double>(uni.width());
  std::size_t overlap = 0;
  for (std::size_t i = 0; i < uni.width(); ++i) overlap += (uni.mask[i] == 1 && paired.mask[i] == 1);
  PartitionReportRow row;
  row.modality = modality;
  row.percent_uni = 100.0 * static_cast<double>(uni.ones()) / d;
  row.percent_paired = 100.0 * static_cast<double>(paired.ones()) / d;
  row.percent_overlap = 100.0 * static_cast<double>(overlap) / d;
  row.cut_u = uni.cut;
  row.cut_p = paired.cut;
  return row;
}

}  // namespace pgm
