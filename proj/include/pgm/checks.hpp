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

namespace pgm {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Finite-difference check of every differentiable primitive on random inputs
// in [-2, 2], plus the end-to-end pretraining and joint losses of a toy model
// (2 samples, D = 8, S = 4, 2 modalities) with respect to all its parameters.
std::vector<GradCheckEntry> gradcheck_primitives(std::uint64_t seed, double eps = 1e-6);
std::vector<GradCheckEntry> gradcheck_end_to_end(std::uint64_t seed, double eps = 1e-6,
                                                 std::size_t stride = 1);

std::string gradcheck_csv(const std::vector<GradCheckEntry>& entries);

}  // namespace pgm
