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

#include "pgm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pgm/error.hpp"

namespace pgm {

namespace {

void check_eps(double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    fail(ErrorCode::kInvalidArgument, "grad_check eps must lie in [1e-7, 1e-3]");
  }
}

double scalar_value(Var v) {
  if (v.value().size() != 1) {
    fail(ErrorCode::kShapeMismatch, "grad_check: function returned shape " + shape_str(v.shape()) +
                                        ", expected a scalar");
  }
  const double out = v.value()[0];
  if (!std::isfinite(out)) fail(ErrorCode::kNonFinite, "grad_check: non-finite function value");
  return out;
}

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  check_eps(eps);
  if (!x.all_finite()) fail(ErrorCode::kNonFinite, "grad_check: non-finite input");

  Tape tape;
  Var input = tape.leaf(x, true);
  Var out = f(tape, input);
  scalar_value(out);
  tape.backward(out);
  const Tensor analytic = tape.grad(input);

  auto eval = [&](const Tensor& point) {
    Tape t;
    return scalar_value(f(t, t.leaf(point, false)));
  };

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(probe);
    probe[i] = x[i] - eps;
    const double down = eval(probe);
    probe[i] = x[i];
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

GradCheckResult grad_check_params(const ParamLossFn& f, std::span<Parameter* const> params,
                                  double eps, std::size_t stride) {
  check_eps(eps);
  stride = std::max<std::size_t>(stride, 1);
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    scalar_value(out);
    tape.backward(out);
  }

  auto eval = [&] {
    Tape t;
    return scalar_value(f(t));
  };

  GradCheckResult result;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); i += stride) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = eval();
      p->value[i] = saved - eps;
      const double down = eval();
      p->value[i] = saved;
      const double err = rel_error(analytic[i], (up - down) / (2.0 * eps));
      ++result.coordinates;
      if (err >= result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace pgm
