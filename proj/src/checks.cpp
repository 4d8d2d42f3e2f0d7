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

#include "pgm/checks.hpp"

#include <array>
#include <cstdio>
#include <functional>

#include "pgm/gradcheck.hpp"
#include "pgm/model.hpp"
#include "pgm/partitioner.hpp"
#include "pgm/rng.hpp"

namespace pgm {

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// Contracts an op's output with fixed random weights so every output element
// contributes to the checked scalar.
Var contract(Var out, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x77);
  return sum_all(mul(out, out.tape->constant(uniform_tensor(out.shape(), rng, -1.0, 1.0))));
}

struct Case {
  const char* name;
  Shape input;
  std::function<Var(Var)> op;
};

Var part(Var x, std::size_t begin, std::size_t end, Shape shape) {
  return reshape(slice(x, begin, end), std::move(shape));
}

}  // namespace

std::vector<GradCheckEntry> gradcheck_primitives(std::uint64_t seed, double eps) {
  static const std::array<int, 4> labels = {0, 3, 1, 2};
  const std::vector<Case> cases = {
      {"add", {3, 8}, [](Var x) { return add(slice(x, 0, 4), slice(x, 4, 8)); }},
      {"add_broadcast", {16}, [](Var x) { return add(part(x, 0, 12, {3, 4}), slice(x, 12, 16)); }},
      {"sub", {3, 8}, [](Var x) { return sub(slice(x, 0, 4), slice(x, 4, 8)); }},
      {"sub_broadcast", {16}, [](Var x) { return sub(part(x, 0, 12, {3, 4}), slice(x, 12, 16)); }},
      {"mul", {3, 8}, [](Var x) { return mul(slice(x, 0, 4), slice(x, 4, 8)); }},
      {"mul_broadcast", {16}, [](Var x) { return mul(part(x, 0, 12, {3, 4}), slice(x, 12, 16)); }},
      {"maximum", {3, 8}, [](Var x) { return maximum(slice(x, 0, 4), slice(x, 4, 8)); }},
      {"affine", {3, 4}, [](Var x) { return affine(x, -1.5, 0.25); }},
      {"broadcast", {4}, [](Var x) { return broadcast_to(x, Shape{2, 3, 4}); }},
      {"reshape", {3, 4}, [](Var x) { return reshape(x, Shape{2, 6}); }},
      {"matmul", {44}, [](Var x) { return matmul(part(x, 0, 24, {2, 3, 4}), part(x, 24, 44, {4, 5})); }},
      {"bmm", {64}, [](Var x) { return bmm(part(x, 0, 24, {2, 3, 4}), part(x, 24, 64, {2, 4, 5})); }},
      {"transpose", {2, 3, 4}, [](Var x) { return transpose(x); }},
      {"concat", {3, 6},
       [](Var x) {
         const std::array<Var, 2> parts{slice(x, 2, 6), slice(x, 0, 2)};
         return concat(parts);
       }},
      {"slice", {3, 6}, [](Var x) { return slice(x, 1, 4); }},
      {"mean_axis0", {3, 4}, [](Var x) { return mean(x, 0); }},
      {"mean_axis1", {2, 3, 4}, [](Var x) { return mean(x, 1); }},
      {"sum_all", {3, 4}, [](Var x) { return sum_all(x); }},
      {"mean_all", {3, 4}, [](Var x) { return mean_all(x); }},
      {"softmax", {3, 5}, [](Var x) { return softmax(x); }},
      {"cumsum", {3, 5}, [](Var x) { return cumsum(x); }},
      {"cumsoftmax", {3, 5}, [](Var x) { return cumsoftmax(x); }},
      {"layer_norm", {40},
       [](Var x) { return layer_norm(part(x, 0, 24, {2, 3, 4}), slice(x, 24, 28), slice(x, 28, 32)); }},
      {"gelu", {3, 5}, [](Var x) { return gelu(x); }},
      {"attention", {72},
       [](Var x) {
         return attention(part(x, 0, 24, {2, 3, 4}), part(x, 24, 48, {2, 3, 4}),
                          part(x, 48, 72, {2, 3, 4}), 2);
       }},
      {"cross_entropy", {4, 4}, [](Var x) { return cross_entropy(x, labels); }},
      {"squared_error", {3, 8}, [](Var x) { return squared_error(slice(x, 0, 4), slice(x, 4, 8)); }},
      {"mse", {3, 8}, [](Var x) { return mse(slice(x, 0, 4), slice(x, 4, 8)); }},
  };
  std::vector<GradCheckEntry> out;
  std::uint64_t k = 0;
  for (const Case& c : cases) {
    Rng rng = Rng::stream(seed, 0x6763, k++);
    const Tensor x = uniform_tensor(c.input, rng);
    const std::uint64_t wseed = mix_seed(seed + k);
    const auto f = [&](Tape&, Var v) { return contract(c.op(v), wseed); };
    out.push_back({c.name, grad_check(f, x, eps), x.size()});
  }
  return out;
}

std::vector<GradCheckEntry> gradcheck_end_to_end(std::uint64_t seed, double eps, std::size_t stride) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.heads = 2;
  cfg.train_gate_mode = GateMode::kSoft;
  const ModelDims dims{2, 4, 8, 2};
  PgmModel model(cfg, dims);
  Rng rng = Rng::stream(seed, 0x6532);
  // Move off the zero-initialised heads so every path carries gradient.
  for (Parameter* p : model.parameters())
    for (double& v : p->value.data()) v += 0.1 * rng.normal();
  std::vector<Tensor> inputs;
  for (std::size_t m = 0; m < dims.n_modalities; ++m) {
    inputs.push_back(uniform_tensor(Shape{2, dims.seq_len, dims.dim}, rng));
  }
  const std::vector<int> labels = {0, 1};
  const std::vector<double> targets = {0.5, -0.5};

  const auto pgm_params = model.pgm_parameters();
  const auto all_params = model.parameters();
  const ParamLossFn lp = [&](Tape& t) {
    return *model.forward(t, inputs, GateMode::kSoft, true, false).pretrain_loss;
  };
  const ParamLossFn ld = [&](Tape& t) {
    ForwardResult r = model.forward(t, inputs, GateMode::kSoft, true, true);
    return joint_loss(*r.pretrain_loss, task_loss(*r.prediction, labels, targets, cfg.task), cfg.alpha,
                      cfg.beta);
  };
  const GradCheckResult rp = grad_check_params(lp, pgm_params, eps, stride);
  const GradCheckResult rd = grad_check_params(ld, all_params, eps, stride);
  return {{"pretrain_loss", rp.max_rel_error, rp.coordinates},
          {"joint_loss", rd.max_rel_error, rd.coordinates}};
}

std::string gradcheck_csv(const std::vector<GradCheckEntry>& entries) {
  std::string out = "check,coordinates,max_rel_error\n";
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.3e\n", e.name.c_str(), e.coordinates, e.max_rel_error);
    out += buf;
  }
  return out;
}

}  // namespace pgm
