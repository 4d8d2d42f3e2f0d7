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

#include "pgm/learners.hpp"

#include <array>

#include "pgm/error.hpp"

namespace pgm {

Var masked_attention_block(Tape& tape, Var x, Var gate, const TransformerBlock& block,
                           Tensor* attention_weights) {
  if (x.value().rank() != 3 || gate.shape() != Shape{x.shape().back()}) {
    fail(ErrorCode::kShapeMismatch, "masked block: gate " + shape_str(gate.shape()) +
                                        " does not match input " + shape_str(x.shape()));
  }
  bool any = false;
  for (double g : gate.value().data()) any = any || g != 0.0;
  if (!any) fail(ErrorCode::kInvalidArgument, "masked block: gate is all zero");
  Var gated = mul(x, gate);
  return mul(block.forward(tape, gated, attention_weights), gate);
}

Var Learner::forward(Tape& tape, Var x, Var gate) const {
  Var h = x;
  for (const TransformerBlock& b : blocks) h = masked_attention_block(tape, h, gate, b);
  return h;
}

Learner make_learner(ParameterSet& set, const std::string& name, std::size_t width,
                     std::size_t heads, std::size_t depth, ParamGroup group, Rng& rng) {
  if (depth == 0) fail(ErrorCode::kConfig, "learner depth must be >= 1");
  Learner l;
  for (std::size_t i = 0; i < depth; ++i) {
    l.blocks.push_back(
        make_transformer_block(set, name + ".block" + std::to_string(i), width, heads, group, rng));
  }
  return l;
}

Var Decoder::forward(Tape& tape, Var uni, Var paired) const {
  if (uni.shape() != paired.shape()) {
    fail(ErrorCode::kShapeMismatch, "decode: " + shape_str(uni.shape()) + " vs " +
                                        shape_str(paired.shape()));
  }
  const std::array<Var, 2> parts{uni, paired};
  return block.forward(tape, merge.forward(tape, concat(parts)));
}

Decoder make_decoder(ParameterSet& set, const std::string& name, std::size_t width,
                     std::size_t heads, Rng& rng) {
  Decoder d;
  d.merge = make_linear(set, name + ".merge", 2 * width, width, ParamGroup::kDecoder, rng);
  d.block = make_transformer_block(set, name + ".block", width, heads, ParamGroup::kDecoder, rng);
  return d;
}

}  // namespace pgm
