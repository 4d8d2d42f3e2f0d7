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
#include <cstdint>
#include <string>
#include <vector>

#include "pgm/fusion.hpp"
#include "pgm/learners.hpp"

namespace pgm {

// Synthetic benchmark parameters. Modality m observes [s_m | c_m] where s_m
// (width d_uni) carries the uni-modal signal and c_m (width d_paired) the
// paired signal that only pays off jointly with the other modalities.
struct SynthConfig {
  std::size_t n_modalities = 2;
  std::size_t dim = 16;
  std::size_t seq_len = 8;
  std::size_t d_uni = 8;
  std::size_t d_paired = 8;
  double beta_uni = 1.0;
  double beta_paired = 0.5;
  double noise_sigma = 0.5;
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::size_t n_test = 1000;
  std::uint64_t seed = 7;
  bool entangle = false;

  void validate() const;
};

struct AblationFlags {
  bool no_partitioner = false;
  bool no_uni_learner = false;
  bool no_paired_learner = false;
  bool no_decoder = false;

  // Removing the partitioner removes everything built on it.
  AblationFlags effective() const;
  bool any() const { return no_partitioner || no_uni_learner || no_paired_learner || no_decoder; }
};

struct TrainConfig {
  int n_iters = 3;
  double alpha = 0.5;
  double beta = 1.0;
  int pretrain_epochs = 20;
  int joint_epochs = 50;
  std::size_t batch_size = 32;
  double lr_overall = 3e-4;
  double lr_learners = 1e-4;
  double lr_decoder = 1e-3;
  double theta = 0.5;
  std::uint64_t seed = 1;
  AblationFlags ablation;
  TaskKind task = TaskKind::kClassification;
  std::size_t learner_depth = 2;
  std::size_t heads = 4;
  GateMode train_gate_mode = GateMode::kStraightThrough;
  GateMode eval_gate_mode = GateMode::kHard;
  FusionMode fusion = FusionMode::kPartitioned;
  std::size_t bench_seeds = 5;

  void validate() const;
};

// Everything a run needs; addressable by flat string keys for config files,
// CLI flags and the C API.
struct RunConfig {
  SynthConfig synth;
  TrainConfig train;

  struct KeyInfo {
    const char* key;
    const char* doc;
  };
  static const std::vector<KeyInfo>& keys();

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  // "key = value" lines; '#' starts a comment.
  void load_text(const std::string& text);
  void load_file(const std::string& path);
  // Canonical "key = value" lines in keys() order.
  std::string to_text() const;
  // FNV-1a of to_text(), 16 hex digits.
  std::string hash() const;
  void validate() const;
};

}  // namespace pgm
