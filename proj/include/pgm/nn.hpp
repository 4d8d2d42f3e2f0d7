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
#include <memory>
#include <string>
#include <vector>

#include "pgm/autodiff.hpp"
#include "pgm/rng.hpp"

namespace pgm {

// Owns parameters with stable addresses, in creation order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& create(std::string name, Shape shape, ParamGroup group);

  std::vector<Parameter*> all() const;
  std::size_t scalar_count() const;
  std::size_t size() const { return params_.size(); }
  Parameter* find(const std::string& name) const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

enum class Init { kXavier, kZero, kIdentity };

struct Linear {
  Parameter* weight = nullptr;  // (in, out)
  Parameter* bias = nullptr;    // (out)

  Var forward(Tape& tape, Var x) const;
};

Linear make_linear(ParameterSet& set, const std::string& name, std::size_t in, std::size_t out,
                   ParamGroup group, Rng& rng, Init init = Init::kXavier);

struct LayerNorm {
  Parameter* scale = nullptr;
  Parameter* offset = nullptr;

  Var forward(Tape& tape, Var x) const;
};

LayerNorm make_layer_norm(ParameterSet& set, const std::string& name, std::size_t width,
                          ParamGroup group);

// Linear -> GELU -> Linear.
struct FeedForward {
  Linear up;
  Linear down;

  Var forward(Tape& tape, Var x) const;
};

FeedForward make_feed_forward(ParameterSet& set, const std::string& name, std::size_t in,
                              std::size_t hidden, std::size_t out, ParamGroup group, Rng& rng);

// Pre-norm Transformer block over (B, S, D):
//   h = x + W_o attn(W_q n1(x), W_k n1(x), W_v n1(x));  y = h + ffn(n2(h))
struct TransformerBlock {
  LayerNorm norm1;
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  LayerNorm norm2;
  FeedForward ffn;
  std::size_t heads = 1;

  Var forward(Tape& tape, Var x, Tensor* attention_weights = nullptr) const;
};

TransformerBlock make_transformer_block(ParameterSet& set, const std::string& name,
                                        std::size_t width, std::size_t heads, ParamGroup group,
                                        Rng& rng);

}  // namespace pgm
