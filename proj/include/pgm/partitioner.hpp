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

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pgm/autodiff.hpp"
#include "pgm/nn.hpp"

namespace pgm {

enum class GateRole { kUni, kPaired };

// Soft gates of one partitioner iteration, all length D and on the tape.
//   g_s = g_u * g_p,  upper = g_u - g_s,  downer = g_p - g_s
struct GateSet {
  Var g_u;
  Var g_p;
  Var g_s;
  Var upper;
  Var downer;
  int iteration = 0;
};

// u and p are the two (B, S, D) partitions; shared is g_s * I_m.
// Iteration 0 is the initial state (u = p = I_m, no gates).
struct PartitionState {
  Var u;
  Var p;
  Var shared;
  GateSet gates;
  int iteration = 0;
};

// Binary gate: a prefix of ones (uni) or a suffix of ones (paired).
// cut is 1-based: the last uni channel, or the first paired channel.
struct HardGate {
  std::vector<int> mask;
  std::size_t cut = 0;
  GateRole role = GateRole::kUni;

  std::size_t width() const { return mask.size(); }
  std::size_t ones() const;
  Tensor as_tensor() const;
};

struct PartitionTrace {
  std::vector<PartitionState> states;  // iterations 1..N
  HardGate final_uni;
  HardGate final_paired;
};

// Learned affine maps (D -> D) applied to the pooled partitions before gating.
struct PartitionerParams {
  Linear uni_map;
  Linear paired_map;
};

PartitionerParams make_partitioner_params(ParameterSet& set, const std::string& name,
                                          std::size_t width, Rng& rng);

// cumsum(softmax(v)) over the last axis.
Var cumsoftmax(Var v);

GateSet make_gate_set(Var g_u, Var g_p, int iteration);
// g_u = 1 - cumsoftmax(logits_u), g_p = cumsoftmax(logits_p).
GateSet gates_from_logits(Var logits_u, Var logits_p, int iteration);
// Mean-pools u_m and p_m over batch and sequence, maps them, then gates.
GateSet compute_gates(Tape& tape, Var u_m, Var p_m, const PartitionerParams& params,
                      int iteration = 1);

PartitionState update_partitions(Var input, const PartitionState& state, const GateSet& gates);

HardGate harden(std::span<const double> gate, GateRole role, double theta = 0.5);
inline HardGate harden(const Tensor& gate, GateRole role, double theta = 0.5) {
  return harden(gate.data(), role, theta);
}

inline constexpr double kMaskConstant = -10000.0;

// (S, D) additive mask: 0 where the gate is 1, C elsewhere; rows identical.
Tensor build_padding_mask(const HardGate& gate, std::size_t seq_len, double c = kMaskConstant);

PartitionTrace partition(Tape& tape, Var input, int n_iters, const PartitionerParams& params,
                         double theta = 0.5);

struct PartitionReportRow {
  std::string modality;
  double percent_uni = 0.0;
  double percent_paired = 0.0;
  double percent_overlap = 0.0;
  std::size_t cut_u = 0;
  std::size_t cut_p = 0;
};

PartitionReportRow partition_report_row(const std::string& modality, const HardGate& uni,
                                        const HardGate& paired);

}  // namespace pgm
