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
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgm/tensor.hpp"

namespace pgm {

// Learning-rate group a parameter belongs to.
enum class ParamGroup { kOverall, kLearner, kDecoder };

// A trainable array. The owning module keeps it alive; tapes only borrow it.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  ParamGroup group = ParamGroup::kOverall;

  void zero_grad() { grad = Tensor(value.shape()); }
};

class Tape;

// Handle to a node recorded on a tape. Cheap to copy; valid until the tape is reset.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(int axis) const { return value().dim(axis); }
};

// Records executed ops in order; backward() replays them in reverse.
//
// One tape per forward pass. backward() may run once; call reset() before reuse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value, bool requires_grad = true);
  Var param(Parameter& p);

  // Appends an op node. `inputs` decide whether the node needs a gradient.
  // Throws kNonFinite naming `op` if the output contains NaN/Inf.
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. Parameter grads are accumulated
  // into Parameter::grad.
  void backward(Var loss);
  void reset();

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Zero-filled grad buffer for node `id`, allocated on first use.
  Tensor& grad_buffer(std::size_t id);
  // Grad of a node after backward(); zeros if nothing flowed into it.
  Tensor grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    const char* op = "";
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable primitives. Unless noted, binary ops accept `b` with either the
// same shape as `a` or a shape equal to a trailing suffix of `a`'s shape, in
// which case `b` is broadcast over the leading axes.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var maximum(Var a, Var b);  // same shape only
// scale * x + shift
Var affine(Var x, double scale, double shift = 0.0);
Var broadcast_to(Var x, const Shape& shape);
Var reshape(Var x, Shape shape);

// a: (..., K), w: (K, N) -> (..., N)
Var matmul(Var a, Var w);
// a: (B, M, K), b: (B, K, N) -> (B, M, N)
Var bmm(Var a, Var b);
// Swaps the last two axes.
Var transpose(Var x);

Var concat(std::span<const Var> parts);  // last axis
Var slice(Var x, std::size_t begin, std::size_t end);  // last axis, [begin, end)

Var mean(Var x, int axis);  // removes `axis`
Var sum_all(Var x);         // scalar
Var mean_all(Var x);        // scalar

Var softmax(Var x);  // last axis
Var cumsum(Var x);   // last axis
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);  // last axis
Var gelu(Var x);  // exact erf form

// Multi-head scaled dot-product attention over (B, S, D) inputs, heads split
// the feature axis evenly. If `weights_out` is non-null it receives the
// (B, H, S, S) attention weights.
Var attention(Var q, Var k, Var v, std::size_t heads, Tensor* weights_out = nullptr);

// Mean softmax cross-entropy of (N, C) logits against integer class labels.
Var cross_entropy(Var logits, std::span<const int> labels);
// Sum over all elements of (a - b)^2.
Var squared_error(Var a, Var b);
Var mse(Var a, Var b);

// Forward-only helpers over plain tensors.
Tensor softmax_values(const Tensor& x);

}  // namespace pgm
