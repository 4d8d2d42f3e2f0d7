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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgm/nn.hpp"

namespace pgm {

// Uni-modal feature classification: which modality did this uni feature come
// from? Each (B, S, D) feature is mean-pooled over S and fed to a shared
// linear head with one logit per modality. modality_ids[i] labels features[i]
// (defaults to i). Cross-entropy averaged over batch and modalities.
Var ufc_loss(Tape& tape, std::span<const Var> uni_features, const Linear& head,
             std::span<const int> modality_ids = {});

// Paired-modal feature classification: uni features are class 0, paired
// features class 1, through a shared binary head. Averaged over all instances.
Var pfc_loss(Tape& tape, std::span<const Var> uni_features, std::span<const Var> paired_features,
             const Linear& head);

// Reconstruction: (1 / B) * sum_m ||I_m - I_hat_m||_F^2 / d_h, the norm running
// over sequence and feature axes and B the number of samples in the batch.
Var upr_loss(std::span<const Var> originals, std::span<const Var> reconstructions,
             std::size_t d_h);

struct IterationLosses {
  double ufc = 0.0;
  double pfc = 0.0;
  double upr = 0.0;
};

// L^P = sum over iterations of (ufc + pfc + upr).
double pretrain_loss(std::span<const IterationLosses> trace, int n_iters);
// L^D = alpha L^P + beta L^T.
double joint_loss(double l_p, double l_t, double alpha, double beta);
Var joint_loss(Var l_p, Var l_t, double alpha, double beta);

enum class Stage { kPretrain, kJoint };
const char* stage_name(Stage stage);

// One row of a loss curve. ufc/pfc/upr are summed over partitioner
// iterations; total follows pretrain_loss() or joint_loss().
struct LossReport {
  double ufc = 0.0;
  double pfc = 0.0;
  double upr = 0.0;
  std::optional<double> task;
  double total = 0.0;
  int epoch = 0;
  Stage stage = Stage::kPretrain;
};

LossReport make_loss_report(int epoch, Stage stage, double ufc, double pfc, double upr,
                            std::optional<double> task, double alpha, double beta);

inline constexpr const char* kLossCurveHeader = "epoch,stage,ufc,pfc,upr,task,total";
std::string loss_report_csv_row(const LossReport& row);

}  // namespace pgm
