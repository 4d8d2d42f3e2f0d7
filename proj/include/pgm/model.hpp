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
#include <string>
#include <vector>

#include "pgm/config.hpp"
#include "pgm/learners.hpp"
#include "pgm/objectives.hpp"
#include "pgm/partitioner.hpp"
#include "pgm/fusion.hpp"

namespace pgm {

struct ModelDims {
  std::size_t n_modalities = 2;
  std::size_t seq_len = 8;
  std::size_t dim = 16;
  std::size_t n_classes = 2;
};

// Per-iteration loss terms on the tape. Absent terms are ablated.
struct IterationTerms {
  std::optional<Var> ufc;
  std::optional<Var> pfc;
  std::optional<Var> upr;
};

struct ForwardResult {
  std::vector<IterationTerms> iterations;
  std::optional<Var> pretrain_loss;  // L^P, absent when every term is ablated
  std::optional<Var> prediction;     // head output when requested
  std::vector<PartitionTrace> traces;  // per modality, empty without a partitioner
  std::vector<Var> uni_final;          // per modality, fed to the fusion head
  std::vector<Var> paired_final;

  // Sums of the iteration terms (zero where ablated).
  IterationLosses summed() const;
};

struct ParamReportRow {
  std::string module;
  std::size_t count = 0;
};

// Partitioner, learners and decoder per modality, the two objective heads, and
// the downstream fusion head.
class PgmModel {
 public:
  PgmModel(const TrainConfig& config, const ModelDims& dims);
  PgmModel(const PgmModel&) = delete;
  PgmModel& operator=(const PgmModel&) = delete;

  // with_pretrain: record UFC/PFC/UPR; with_head: run the fusion head.
  ForwardResult forward(Tape& tape, std::span<const Tensor> inputs, GateMode mode,
                        bool with_pretrain, bool with_head) const;

  std::vector<Parameter*> parameters() const;
  std::vector<Parameter*> pgm_parameters() const;  // everything but the fusion head
  std::vector<ParamReportRow> param_report() const;

  const TrainConfig& config() const { return config_; }
  TrainConfig& mutable_config() { return config_; }
  const ModelDims& dims() const { return dims_; }
  const AblationFlags& ablation() const { return ablation_; }

  // Replaces parameter values by name; shapes must match.
  void load_parameters(const std::vector<std::pair<std::string, Tensor>>& values);

 private:
  TrainConfig config_;
  ModelDims dims_;
  AblationFlags ablation_;

  ParameterSet partitioner_set_;
  ParameterSet uni_set_;
  ParameterSet paired_set_;
  ParameterSet decoder_set_;
  ParameterSet heads_set_;
  ParameterSet fusion_set_;

  std::vector<PartitionerParams> partitioners_;
  std::vector<Learner> uni_learners_;
  std::vector<Learner> paired_learners_;
  std::vector<Decoder> decoders_;
  Linear ufc_head_;
  Linear pfc_head_;
  FusionHead fusion_;
};

std::string modality_name(std::size_t m);

}  // namespace pgm
