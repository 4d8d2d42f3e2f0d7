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

#include "pgm/nn.hpp"

namespace pgm {

// Soft gates multiply by the continuous gate; hard gates by its thresholded
// 0/1 version. Straight-through uses the hard gate in the forward pass and
// routes its gradient to the soft gate.
enum class GateMode { kSoft, kHard, kStraightThrough };

// Transformer block restricted to one partition's feature channels:
//   out = gate * block(gate * x)
// gate has shape (D) and broadcasts over (B, S). With a 0/1 gate, channels
// outside the support are exactly zero in the output.
Var masked_attention_block(Tape& tape, Var x, Var gate, const TransformerBlock& block,
                           Tensor* attention_weights = nullptr);

// Stack of masked blocks sharing one gate. Used for both the uni-modal and the
// paired-modal learner; they differ only in the gate they receive.
struct Learner {
  std::vector<TransformerBlock> blocks;

  Var forward(Tape& tape, Var x, Var gate) const;
};

Learner make_learner(ParameterSet& set, const std::string& name, std::size_t width,
                     std::size_t heads, std::size_t depth, ParamGroup group, Rng& rng);

// Reconstructs I_m from the two learner outputs: merge [U, P] (2D -> D), then
// one attention block whose query, key and value all come from the merge.
struct Decoder {
  Linear merge;
  TransformerBlock block;

  Var forward(Tape& tape, Var uni, Var paired) const;
};

Decoder make_decoder(ParameterSet& set, const std::string& name, std::size_t width,
                     std::size_t heads, Rng& rng);

}  // namespace pgm
