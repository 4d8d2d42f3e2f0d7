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
#include <span>
#include <string>
#include <vector>

#include "pgm/nn.hpp"

namespace pgm {

enum class TaskKind { kClassification, kRegression };

enum class FusionMode {
  kPartitioned,  // uni and paired streams, each FFN + Transformer, then fused
  kConcat,       // pooled concatenation of the raw modal inputs
};

// Downstream head over the final-iteration learner outputs.
struct FusionHead {
  FusionMode mode = FusionMode::kPartitioned;
  TaskKind task = TaskKind::kClassification;
  FeedForward uni_ffn;     // n_mod * D -> D
  FeedForward paired_ffn;  // n_mod * D -> D
  TransformerBlock uni_stream;
  TransformerBlock paired_stream;
  FeedForward fusion_ffn;  // 2D -> D
  Linear predictor;        // D -> outputs, or n_mod * D -> outputs in concat mode

  // (B, D) fused representation, mean-pooled over S after the fusion FFN.
  Var fuse(Tape& tape, std::span<const Var> uni, std::span<const Var> paired) const;
  // Same as fuse() but also hands back the two stream outputs.
  Var fuse(Tape& tape, std::span<const Var> uni, std::span<const Var> paired, Var* uni_stream_out,
           Var* paired_stream_out) const;
  // Concat mode: pooled concatenation of the given (B, S, D) inputs.
  Var concat_inputs(Tape& tape, std::span<const Var> inputs) const;
  // Class logits (B, n_classes) or regression output (B, 1).
  Var predict(Tape& tape, Var fused) const;
};

FusionHead make_fusion_head(ParameterSet& set, const std::string& name, FusionMode mode,
                            TaskKind task, std::size_t n_modalities, std::size_t width,
                            std::size_t heads, std::size_t n_classes, Rng& rng);

// Cross-entropy for classification (labels), mean squared error for regression (targets).
Var task_loss(Var prediction, std::span<const int> labels, std::span<const double> targets,
              TaskKind task);

TaskKind parse_task_kind(const std::string& name);
const char* task_kind_name(TaskKind task);

}  // namespace pgm
