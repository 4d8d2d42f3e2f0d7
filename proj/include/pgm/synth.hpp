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

#include "pgm/config.hpp"
#include "pgm/tensor.hpp"

namespace pgm {

// One split, stored per modality as (N, S, D) arrays.
struct SynthSplit {
  std::size_t count = 0;
  std::vector<Tensor> inputs;   // per modality, (N, S, D)
  std::vector<int> labels;      // (N), binary
  std::vector<double> scores;   // (N), the pre-threshold generative score
  Tensor latents;               // (N, n_mod, D): [s_m | c_m] before noise and mixing
};

struct SynthDataset {
  SynthConfig config;
  std::vector<Tensor> mixing;      // per modality (D, D) when entangled, else empty
  std::vector<Tensor> directions;  // per modality unit vector (d_uni)
  SynthSplit train;
  SynthSplit val;
  SynthSplit test;

  const SynthSplit& split(const std::string& name) const;
};

SynthDataset generate(const SynthConfig& config);

// Generative score beta_u * sum_m <w_m, s_m> + beta_p * sum_i prod_m c_m[i].
// latent is (n_mod, D) row-major.
double generative_score(const SynthConfig& config, const std::vector<Tensor>& directions,
                        std::span<const double> latent);

struct OracleEstimate {
  double accuracy = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo accuracy of the generative rule applied to latents recovered
// from noisy observations (unmixed, then averaged over positions).
OracleEstimate bayes_oracle(const SynthConfig& config, std::size_t n_mc);

// Versioned binary container; see docs/formats.md.
void save_dataset(const SynthDataset& data, const std::string& path);
SynthDataset load_dataset(const std::string& path);

// Mini-batch view of a split.
struct Batch {
  std::vector<Tensor> inputs;  // per modality (B, S, D)
  std::vector<int> labels;
  std::vector<double> targets;
  std::size_t size() const { return labels.size(); }
};

Batch make_batch(const SynthSplit& split, std::span<const std::size_t> indices);
// (N, D) mean over positions per modality.
std::vector<Tensor> pooled_inputs(const SynthSplit& split);

}  // namespace pgm
