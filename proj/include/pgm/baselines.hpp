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

#include "pgm/config.hpp"
#include "pgm/nn.hpp"
#include "pgm/synth.hpp"
#include "pgm/train.hpp"

namespace pgm {

// Fusion baselines over S-pooled modal features.
enum class BaselineKind { kConcat, kAdd, kMax, kLinear, kMlp, kUni };

struct BaselineMethod {
  BaselineKind kind = BaselineKind::kConcat;
  std::size_t modality = 0;  // kUni only
  std::string name() const;  // "concat", ..., "uni:A"
};

// Accepts concat, add, max, linear, mlp, uni:<A|B|C> and uni:<index>.
BaselineMethod parse_baseline(const std::string& name);

class BaselineModel {
 public:
  BaselineModel(BaselineMethod method, std::size_t n_modalities, std::size_t dim,
                std::size_t n_classes, TaskKind task, Rng& rng);

  // pooled: per-modality (B, D). Returns logits (B, n_classes) or (B, 1).
  Var forward(Tape& tape, std::span<const Tensor> pooled) const;
  // The fused (B, width) feature before the head.
  Var features(Tape& tape, std::span<const Tensor> pooled) const;

  std::vector<Parameter*> parameters() const { return set_.all(); }
  const BaselineMethod& method() const { return method_; }

 private:
  BaselineMethod method_;
  std::size_t n_modalities_;
  std::size_t dim_;
  ParameterSet set_;
  Parameter* mix_ = nullptr;  // kLinear: per-modality scalar weights
  Linear hidden_;             // kMlp
  Linear head_;
};

// Trains for pretrain_epochs + joint_epochs (the PgM budget) with Adam at
// lr_overall, then evaluates on the test split.
MetricsReport train_baseline(const BaselineMethod& method, const SynthDataset& data,
                             const RunConfig& config);

}  // namespace pgm
