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
#include <functional>
#include <span>
#include <string>

#include "pgm/autodiff.hpp"

namespace pgm {

// Central-difference verification of reverse-mode gradients.
//
// Error per coordinate is |analytic - numeric| / max(1, |analytic|) with
// numeric = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). The checkers return
// the maximum over all coordinates visited.

using ScalarFn = std::function<Var(Tape&, Var)>;
using ParamLossFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "param[index]" of the largest error
};

double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// Perturbs parameter values in place (restored afterwards). A non-zero
// stride visits every stride-th coordinate of each parameter.
GradCheckResult grad_check_params(const ParamLossFn& f, std::span<Parameter* const> params,
                                  double eps = 1e-5, std::size_t stride = 1);

}  // namespace pgm
