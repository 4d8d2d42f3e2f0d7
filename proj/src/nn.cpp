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

#include "pgm/nn.hpp"

#include <cmath>

#include "pgm/error.hpp"

namespace pgm {

Parameter& ParameterSet::create(std::string name, Shape shape, ParamGroup group) {
  if (find(name) != nullptr) fail(ErrorCode::kInternal, "duplicate parameter name " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Tensor(shape);
  p->grad = Tensor(shape);
  p->group = group;
  params_.push_back(std::move(p));
  return *params_.back();
}

std::vector<Parameter*> ParameterSet::all() const {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Var Linear::forward(Tape& tape, Var x) const {
  return add(matmul(x, tape.param(*weight)), tape.param(*bias));
}

Linear make_linear(ParameterSet& set, const std::string& name, std::size_t in, std::size_t out,
                   ParamGroup group, Rng& rng, Init init) {
  Linear l;
  l.weight = &set.create(name + ".weight", Shape{in, out}, group);
  l.bias = &set.create(name + ".bias", Shape{out}, group);
  switch (init) {
    case Init::kXavier: {
      const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
      for (double& w : l.weight->value.data()) w = rng.normal(0.0, stddev);
      break;
    }
    case Init::kZero:
      break;
    case Init::kIdentity:
      for (std::size_t i = 0; i < std::min(in, out); ++i) l.weight->value[i * out + i] = 1.0;
      break;
  }
  return l;
}

Var LayerNorm::forward(Tape& tape, Var x) const {
  return layer_norm(x, tape.param(*scale), tape.param(*offset));
}

LayerNorm make_layer_norm(ParameterSet& set, const std::string& name, std::size_t width,
                          ParamGroup group) {
  LayerNorm n;
  n.scale = &set.create(name + ".scale", Shape{width}, group);
  n.offset = &set.create(name + ".offset", Shape{width}, group);
  n.scale->value.fill(1.0);
  return n;
}

Var FeedForward::forward(Tape& tape, Var x) const {
  return down.forward(tape, gelu(up.forward(tape, x)));
}

FeedForward make_feed_forward(ParameterSet& set, const std::string& name, std::size_t in,
                              std::size_t hidden, std::size_t out, ParamGroup group, Rng& rng) {
  FeedForward f;
  f.up = make_linear(set, name + ".up", in, hidden, group, rng);
  f.down = make_linear(set, name + ".down", hidden, out, group, rng);
  return f;
}

Var TransformerBlock::forward(Tape& tape, Var x, Tensor* attention_weights) const {
  Var n1 = norm1.forward(tape, x);
  Var attended = attention(query.forward(tape, n1), key.forward(tape, n1),
                           value.forward(tape, n1), heads, attention_weights);
  Var h = add(x, output.forward(tape, attended));
  return add(h, ffn.forward(tape, norm2.forward(tape, h)));
}

TransformerBlock make_transformer_block(ParameterSet& set, const std::string& name,
                                        std::size_t width, std::size_t heads, ParamGroup group,
                                        Rng& rng) {
  if (heads == 0 || width % heads != 0) {
    fail(ErrorCode::kConfig, "feature width " + std::to_string(width) +
                                 " must be divisible by the head count " + std::to_string(heads));
  }
  TransformerBlock b;
  b.heads = heads;
  b.norm1 = make_layer_norm(set, name + ".norm1", width, group);
  b.query = make_linear(set, name + ".query", width, width, group, rng);
  b.key = make_linear(set, name + ".key", width, width, group, rng);
  b.value = make_linear(set, name + ".value", width, width, group, rng);
  b.output = make_linear(set, name + ".output", width, width, group, rng);
  b.norm2 = make_layer_norm(set, name + ".norm2", width, group);
  b.ffn = make_feed_forward(set, name + ".ffn", width, 4 * width, width, group, rng);
  return b;
}

}  // namespace pgm
