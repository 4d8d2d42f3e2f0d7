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

#include "pgm/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "pgm/error.hpp"

namespace pgm {

const Tensor& Var::value() const { return tape->value(id); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) fail(ErrorCode::kNonFinite, "non-finite value in leaf tensor");
  Node n;
  n.value = std::move(value);
  n.op = "leaf";
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (!p.value.all_finite()) {
    fail(ErrorCode::kNonFinite, "non-finite value in parameter '" + p.name + "'");
  }
  Node n;
  n.value = p.value;
  n.op = "param";
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (backward_done_) fail(ErrorCode::kState, "tape already consumed by backward(); reset() first");
  if (!value.all_finite()) {
    fail(ErrorCode::kNonFinite, std::string("non-finite value produced by op '") + op + "'");
  }
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape != this) fail(ErrorCode::kInvalidArgument, "op inputs belong to another tape");
    needs = needs || nodes_[v.id].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() != n.value.size()) return Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) fail(ErrorCode::kInvalidArgument, "loss belongs to another tape");
  if (backward_done_) fail(ErrorCode::kState, "backward() called twice without reset()");
  if (nodes_[loss.id].value.size() != 1) {
    fail(ErrorCode::kShapeMismatch, "backward() needs a scalar loss, got shape " +
                                        shape_str(nodes_[loss.id].value.shape()));
  }
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() != n.value.size()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      if (n.param->grad.shape() != n.param->value.shape()) n.param->zero_grad();
      n.param->grad.accumulate(n.grad);
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    fail(ErrorCode::kInvalidArgument, "operands live on different tapes");
  }
  return *a.tape;
}

// Number of times `b` repeats inside `a` for suffix broadcasting.
std::size_t broadcast_outer(const Shape& a, const Shape& b, const char* op) {
  bool ok = b.size() <= a.size() && std::equal(b.begin(), b.end(), a.end() - b.size());
  if (!ok) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": cannot broadcast " + shape_str(b) +
                                        " against " + shape_str(a));
  }
  return shape_numel(a) / std::max<std::size_t>(shape_numel(b), 1);
}

std::size_t last_dim(const Tensor& t, const char* op) {
  if (t.rank() == 0 || t.shape().back() == 0) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": empty last axis");
  }
  return t.shape().back();
}

enum class BinOp { kAdd, kSub, kMul };

Var binary(Var a, Var b, BinOp kind, const char* name) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t outer = broadcast_outer(av.shape(), bv.shape(), name);
  const std::size_t inner = bv.size();
  Tensor out(av.shape());
  auto o = out.data();
  auto x = av.data();
  auto y = bv.data();
  for (std::size_t r = 0; r < outer; ++r) {
    const std::size_t base = r * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      switch (kind) {
        case BinOp::kAdd: o[base + i] = x[base + i] + y[i]; break;
        case BinOp::kSub: o[base + i] = x[base + i] - y[i]; break;
        case BinOp::kMul: o[base + i] = x[base + i] * y[i]; break;
      }
    }
  }
  const std::array<Var, 2> in{a, b};
  return tape.record(name, std::move(out), in, [a, b, kind, outer, inner](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    if (t.requires_grad(a.id)) {
      auto ga = t.grad_buffer(a.id).data();
      const auto y = t.value(b.id).data();
      for (std::size_t r = 0; r < outer; ++r) {
        const std::size_t base = r * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          ga[base + i] += kind == BinOp::kMul ? g[base + i] * y[i] : g[base + i];
        }
      }
    }
    if (t.requires_grad(b.id)) {
      auto gb = t.grad_buffer(b.id).data();
      const auto x = t.value(a.id).data();
      for (std::size_t r = 0; r < outer; ++r) {
        const std::size_t base = r * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          switch (kind) {
            case BinOp::kAdd: gb[i] += g[base + i]; break;
            case BinOp::kSub: gb[i] -= g[base + i]; break;
            case BinOp::kMul: gb[i] += g[base + i] * x[base + i]; break;
          }
        }
      }
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) { return binary(a, b, BinOp::kAdd, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::kSub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::kMul, "mul"); }

Var maximum(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShapeMismatch, "maximum: " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
  }
  const auto x = a.value().data();
  const auto y = b.value().data();
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x[i], y[i]);
  const std::array<Var, 2> in{a, b};
  return tape.record("maximum", std::move(out), in, [a, b](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    const auto x = t.value(a.id).data();
    const auto y = t.value(b.id).data();
    // Ties route the gradient to `a`.
    if (t.requires_grad(a.id)) {
      auto ga = t.grad_buffer(a.id).data();
      for (std::size_t i = 0; i < g.size(); ++i) if (x[i] >= y[i]) ga[i] += g[i];
    }
    if (t.requires_grad(b.id)) {
      auto gb = t.grad_buffer(b.id).data();
      for (std::size_t i = 0; i < g.size(); ++i) if (x[i] < y[i]) gb[i] += g[i];
    }
  });
}

Var affine(Var x, double scale, double shift) {
  Tensor out(x.shape());
  const auto v = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * v[i] + shift;
  const std::array<Var, 1> in{x};
  return x.tape->record("affine", std::move(out), in, [x, scale](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += scale * g[i];
  });
}

Var broadcast_to(Var x, const Shape& shape) {
  const std::size_t outer = broadcast_outer(shape, x.shape(), "broadcast_to");
  const std::size_t inner = x.value().size();
  Tensor out(shape);
  const auto v = x.value().data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy(v.begin(), v.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * inner));
  }
  const std::array<Var, 1> in{x};
  return x.tape->record("broadcast_to", std::move(out), in, [x, outer, inner](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    for (std::size_t r = 0; r < outer; ++r) {
      for (std::size_t i = 0; i < inner; ++i) gx[i] += g[r * inner + i];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::array<Var, 1> in{x};
  return x.tape->record("reshape", std::move(out), in, [x](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

namespace {

// Row-major kernels shared by matmul and bmm. Clones for AVX2 are picked at
// load time; no reductions are reordered, so results match the baseline build.
#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define PGM_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define PGM_KERNEL
#endif

// out(rows, n) += x(rows, k) w(k, n)
PGM_KERNEL void gemm_nn(const double* x, const double* w, double* out, std::size_t rows,
                        std::size_t k_dim, std::size_t n_dim) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* orow = out + r * n_dim;
    const double* xrow = x + r * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double xv = xrow[k];
      const double* wrow = w + k * n_dim;
      for (std::size_t n = 0; n < n_dim; ++n) orow[n] += xv * wrow[n];
    }
  }
}

// gw(k, n) += x(rows, k)^T g(rows, n)
PGM_KERNEL void gemm_tn(const double* x, const double* g, double* gw, std::size_t rows,
                        std::size_t k_dim, std::size_t n_dim) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* grow = g + r * n_dim;
    const double* xrow = x + r * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double xv = xrow[k];
      double* gwrow = gw + k * n_dim;
      for (std::size_t n = 0; n < n_dim; ++n) gwrow[n] += xv * grow[n];
    }
  }
}

}  // namespace

Var matmul(Var a, Var w) {
  Tape& tape = same_tape(a, w);
  const Tensor& av = a.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2 || av.rank() < 1 || av.shape().back() != wv.shape()[0]) {
    fail(ErrorCode::kShapeMismatch, "matmul: " + shape_str(av.shape()) + " x " +
                                        shape_str(wv.shape()));
  }
  const std::size_t k_dim = wv.shape()[0];
  const std::size_t n_dim = wv.shape()[1];
  const std::size_t rows = k_dim == 0 ? 0 : av.size() / k_dim;
  Shape out_shape = av.shape();
  out_shape.back() = n_dim;
  Tensor out(out_shape);
  gemm_nn(av.data().data(), wv.data().data(), out.data().data(), rows, k_dim, n_dim);
  const std::array<Var, 2> in{a, w};
  return tape.record("matmul", std::move(out), in, [a, w, rows, k_dim, n_dim](Tape& t, std::size_t self) {
    const double* g = t.grad_buffer(self).data().data();
    if (t.requires_grad(a.id)) {
      const double* m = t.value(w.id).data().data();
      std::vector<double> mt(k_dim * n_dim);
      for (std::size_t k = 0; k < k_dim; ++k)
        for (std::size_t n = 0; n < n_dim; ++n) mt[n * k_dim + k] = m[k * n_dim + n];
      gemm_nn(g, mt.data(), t.grad_buffer(a.id).data().data(), rows, n_dim, k_dim);
    }
    if (t.requires_grad(w.id)) {
      gemm_tn(t.value(a.id).data().data(), g, t.grad_buffer(w.id).data().data(), rows, k_dim, n_dim);
    }
  });
}

Var bmm(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[1]) {
    fail(ErrorCode::kShapeMismatch, "bmm: " + shape_str(as) + " x " + shape_str(bs));
  }
  const std::size_t batch = as[0], m_dim = as[1], k_dim = as[2], n_dim = bs[2];
  Tensor out(Shape{batch, m_dim, n_dim});
  const auto x = a.value().data();
  const auto y = b.value().data();
  auto o = out.data();
  for (std::size_t p = 0; p < batch; ++p) {
    for (std::size_t i = 0; i < m_dim; ++i) {
      for (std::size_t k = 0; k < k_dim; ++k) {
        const double xv = x[(p * m_dim + i) * k_dim + k];
        for (std::size_t j = 0; j < n_dim; ++j) {
          o[(p * m_dim + i) * n_dim + j] += xv * y[(p * k_dim + k) * n_dim + j];
        }
      }
    }
  }
  const std::array<Var, 2> in{a, b};
  return tape.record("bmm", std::move(out), in, [a, b, batch, m_dim, k_dim, n_dim](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    const auto x = t.value(a.id).data();
    const auto y = t.value(b.id).data();
    const bool need_a = t.requires_grad(a.id);
    const bool need_b = t.requires_grad(b.id);
    std::span<double> ga, gb;
    if (need_a) ga = t.grad_buffer(a.id).data();
    if (need_b) gb = t.grad_buffer(b.id).data();
    for (std::size_t p = 0; p < batch; ++p) {
      for (std::size_t i = 0; i < m_dim; ++i) {
        for (std::size_t k = 0; k < k_dim; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n_dim; ++j) {
            const double gv = g[(p * m_dim + i) * n_dim + j];
            acc += gv * y[(p * k_dim + k) * n_dim + j];
            if (need_b) gb[(p * k_dim + k) * n_dim + j] += x[(p * m_dim + i) * k_dim + k] * gv;
          }
          if (need_a) ga[(p * m_dim + i) * k_dim + k] += acc;
        }
      }
    }
  });
}

Var transpose(Var x) {
  const Shape& s = x.shape();
  if (s.size() < 2) fail(ErrorCode::kShapeMismatch, "transpose needs rank >= 2");
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s[s.size() - 1];
  const std::size_t batch = shape_numel(s) / std::max<std::size_t>(rows * cols, 1);
  Shape os = s;
  std::swap(os[os.size() - 2], os[os.size() - 1]);
  Tensor out(os);
  const auto v = x.value().data();
  for (std::size_t p = 0; p < batch; ++p) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        out[(p * cols + j) * rows + i] = v[(p * rows + i) * cols + j];
      }
    }
  }
  const std::array<Var, 1> in{x};
  return x.tape->record("transpose", std::move(out), in, [x, batch, rows, cols](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    for (std::size_t p = 0; p < batch; ++p) {
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          gx[(p * rows + i) * cols + j] += g[(p * cols + j) * rows + i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Structural

Var concat(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::kInvalidArgument, "concat of zero tensors");
  Tape& tape = *parts[0].tape;
  const Shape& first = parts[0].shape();
  if (first.empty()) fail(ErrorCode::kShapeMismatch, "concat needs rank >= 1");
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      fail(ErrorCode::kShapeMismatch, "concat: " + shape_str(first) + " vs " + shape_str(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  const std::size_t rows = shape_numel(first) / std::max<std::size_t>(first.back(), 1);
  Shape os = first;
  os.back() = total;
  Tensor out(os);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].value().data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < widths[p]; ++j) out[r * total + offset + j] = v[r * widths[p] + j];
    }
    offset += widths[p];
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return tape.record("concat", std::move(out), in, [in, widths, rows, total](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    std::size_t offset = 0;
    for (std::size_t p = 0; p < in.size(); ++p) {
      if (t.requires_grad(in[p].id)) {
        auto gp = t.grad_buffer(in[p].id).data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < widths[p]; ++j) gp[r * widths[p] + j] += g[r * total + offset + j];
        }
      }
      offset += widths[p];
    }
  });
}

Var slice(Var x, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (s.empty() || begin >= end || end > s.back()) {
    fail(ErrorCode::kShapeMismatch, "slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                                        ") out of range for " + shape_str(s));
  }
  const std::size_t width = s.back();
  const std::size_t rows = shape_numel(s) / width;
  const std::size_t w = end - begin;
  Shape os = s;
  os.back() = w;
  Tensor out(os);
  const auto v = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = v[r * width + begin + j];
  }
  const std::array<Var, 1> in{x};
  return x.tape->record("slice", std::move(out), in, [x, rows, width, begin, w](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < w; ++j) gx[r * width + begin + j] += g[r * w + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var mean(Var x, int axis) {
  const Shape& s = x.shape();
  const int r = static_cast<int>(s.size());
  const int ax = axis < 0 ? axis + r : axis;
  if (ax < 0 || ax >= r || s[static_cast<std::size_t>(ax)] == 0) {
    fail(ErrorCode::kShapeMismatch, "mean: bad axis for " + shape_str(s));
  }
  const auto a = static_cast<std::size_t>(ax);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < a; ++i) outer *= s[i];
  for (std::size_t i = a + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[a];
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i) if (i != a) os.push_back(s[i]);
  Tensor out(os);
  const auto v = x.value().data();
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += v[(o * n + j) * inner + i];
    }
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] *= inv;
  }
  const std::array<Var, 1> in{x};
  return x.tape->record("mean", std::move(out), in, [x, outer, inner, n, inv](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < inner; ++i) gx[(o * n + j) * inner + i] += g[o * inner + i] * inv;
      }
    }
  });
}

Var sum_all(Var x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  const std::array<Var, 1> in{x};
  return x.tape->record("sum_all", Tensor::scalar(acc), in, [x](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    for (double& gx : t.grad_buffer(x.id).data()) gx += g;
  });
}

Var mean_all(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) fail(ErrorCode::kShapeMismatch, "mean_all of empty tensor");
  return affine(sum_all(x), 1.0 / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Nonlinearities

Tensor softmax_values(const Tensor& x) {
  const std::size_t n = last_dim(x, "softmax");
  const std::size_t rows = x.size() / n;
  Tensor out(x.shape());
  const auto v = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * n;
    double* orow = out.data().data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] /= z;
  }
  return out;
}


Var softmax(Var x) {
  const std::array<Var, 1> in{x};
  return x.tape->record("softmax", softmax_values(x.value()), in, [x](Tape& t, std::size_t self) {
    const auto y = t.value(self).data();
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    const std::size_t n = t.value(self).shape().back();
    const std::size_t rows = y.size() / n;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

Var cumsum(Var x) {
  const std::size_t n = last_dim(x.value(), "cumsum");
  const std::size_t rows = x.value().size() / n;
  Tensor out(x.shape());
  const auto v = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += v[r * n + j];
      out[r * n + j] = acc;
    }
  }
  const std::array<Var, 1> in{x};
  return x.tape->record("cumsum", std::move(out), in, [x, rows, n](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    auto gx = t.grad_buffer(x.id).data();
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t j = n; j-- > 0;) {
        acc += g[r * n + j];
        gx[r * n + j] += acc;
      }
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& tape = same_tape(x, gamma);
  same_tape(x, beta);
  const std::size_t n = last_dim(x.value(), "layer_norm");
  if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) {
    fail(ErrorCode::kShapeMismatch, "layer_norm: scale/offset must have shape (" +
                                        std::to_string(n) + ")");
  }
  const std::size_t rows = x.value().size() / n;
  const auto v = x.value().data();
  const auto gv = gamma.value().data();
  const auto bv = beta.value().data();
  Tensor out(x.shape());
  std::vector<double> xhat(v.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += v[r * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = v[r * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (v[r * n + j] - mu) * inv_std[r];
      out[r * n + j] = gv[j] * xhat[r * n + j] + bv[j];
    }
  }
  const std::array<Var, 3> in{x, gamma, beta};
  return tape.record("layer_norm", std::move(out), in,
                     [x, gamma, beta, rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                         Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    const auto gv = t.value(gamma.id).data();
    if (t.requires_grad(gamma.id)) {
      auto gg = t.grad_buffer(gamma.id).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) gg[j] += g[r * n + j] * xhat[r * n + j];
    }
    if (t.requires_grad(beta.id)) {
      auto gb = t.grad_buffer(beta.id).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
    }
    if (t.requires_grad(x.id)) {
      auto gx = t.grad_buffer(x.id).data();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = g[r * n + j] * gv[j];
          sum_d += d;
          sum_dx += d * xhat[r * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double d = g[r * n + j] * gv[j];
          gx[r * n + j] += inv_std[r] * (d - inv_n * sum_d - xhat[r * n + j] * inv_n * sum_dx);
        }
      }
    }
  });
}

Var gelu(Var x) {
  const auto v = x.value().data();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = 0.5 * v[i] * (1.0 + std::erf(v[i] * std::numbers::sqrt2 / 2.0));
  }
  const std::array<Var, 1> in{x};
  return x.tape->record("gelu", std::move(out), in, [x](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    const auto v = t.value(x.id).data();
    auto gx = t.grad_buffer(x.id).data();
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(v[i] * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v[i] * v[i]);
      gx[i] += g[i] * (cdf + v[i] * pdf);
    }
  });
}

// ---------------------------------------------------------------------------
// Attention

Var attention(Var q, Var k, Var v, std::size_t heads, Tensor* weights_out) {
  Tape& tape = same_tape(q, k);
  same_tape(q, v);
  const Shape& s = q.shape();
  if (s.size() != 3 || k.shape() != s || v.shape() != s) {
    fail(ErrorCode::kShapeMismatch, "attention expects matching (B, S, D) inputs, got " +
                                        shape_str(s) + ", " + shape_str(k.shape()) + ", " +
                                        shape_str(v.shape()));
  }
  const std::size_t batch = s[0], seq = s[1], width = s[2];
  if (heads == 0 || width % heads != 0) {
    fail(ErrorCode::kInvalidArgument, "attention: feature width " + std::to_string(width) +
                                          " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t hd = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const auto qv = q.value().data();
  const auto kv = k.value().data();
  const auto vv = v.value().data();
  Tensor weights(Shape{batch, heads, seq, seq});
  Tensor out(s);
  std::vector<double> row(seq);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      for (std::size_t i = 0; i < seq; ++i) {
        const double* qi = qv.data() + (b * seq + i) * width + off;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq; ++j) {
          const double* kj = kv.data() + (b * seq + j) * width + off;
          double dot = 0.0;
          for (std::size_t c = 0; c < hd; ++c) dot += qi[c] * kj[c];
          row[j] = dot * scale;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        double* wrow = weights.data().data() + ((b * heads + h) * seq + i) * seq;
        double* oi = out.data().data() + (b * seq + i) * width + off;
        for (std::size_t j = 0; j < seq; ++j) {
          wrow[j] = row[j] / z;
          const double* vj = vv.data() + (b * seq + j) * width + off;
          for (std::size_t c = 0; c < hd; ++c) oi[c] += wrow[j] * vj[c];
        }
      }
    }
  }
  if (weights_out != nullptr) *weights_out = weights;
  const std::array<Var, 3> in{q, k, v};
  return tape.record("attention", std::move(out), in,
                     [q, k, v, batch, seq, width, heads, hd, scale, weights = std::move(weights)](
                         Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self).data();
    const auto qv = t.value(q.id).data();
    const auto kv = t.value(k.id).data();
    const auto vv = t.value(v.id).data();
    const bool need_q = t.requires_grad(q.id);
    const bool need_k = t.requires_grad(k.id);
    const bool need_v = t.requires_grad(v.id);
    std::span<double> gq, gk, gv;
    if (need_q) gq = t.grad_buffer(q.id).data();
    if (need_k) gk = t.grad_buffer(k.id).data();
    if (need_v) gv = t.grad_buffer(v.id).data();
    std::vector<double> dw(seq);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t i = 0; i < seq; ++i) {
          const double* wrow = weights.data().data() + ((b * heads + h) * seq + i) * seq;
          const double* gi = g.data() + (b * seq + i) * width + off;
          double dot = 0.0;
          for (std::size_t j = 0; j < seq; ++j) {
            const double* vj = vv.data() + (b * seq + j) * width + off;
            double acc = 0.0;
            for (std::size_t c = 0; c < hd; ++c) acc += gi[c] * vj[c];
            dw[j] = acc;
            dot += acc * wrow[j];
            if (need_v) {
              double* gvj = gv.data() + (b * seq + j) * width + off;
              for (std::size_t c = 0; c < hd; ++c) gvj[c] += wrow[j] * gi[c];
            }
          }
          const double* qi = qv.data() + (b * seq + i) * width + off;
          for (std::size_t j = 0; j < seq; ++j) {
            const double ds = wrow[j] * (dw[j] - dot) * scale;
            if (ds == 0.0) continue;
            const double* kj = kv.data() + (b * seq + j) * width + off;
            if (need_q) {
              double* gqi = gq.data() + (b * seq + i) * width + off;
              for (std::size_t c = 0; c < hd; ++c) gqi[c] += ds * kj[c];
            }
            if (need_k) {
              double* gkj = gk.data() + (b * seq + j) * width + off;
              for (std::size_t c = 0; c < hd; ++c) gkj[c] += ds * qi[c];
            }
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Losses

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 2) fail(ErrorCode::kShapeMismatch, "cross_entropy expects (N, C) logits");
  const std::size_t rows = lv.shape()[0], classes = lv.shape()[1];
  if (labels.size() != rows) {
    fail(ErrorCode::kShapeMismatch, "cross_entropy: " + std::to_string(labels.size()) +
                                        " labels for " + std::to_string(rows) + " rows");
  }
  if (rows == 0 || classes == 0) fail(ErrorCode::kShapeMismatch, "cross_entropy of empty batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      fail(ErrorCode::kInvalidArgument, "label " + std::to_string(y) + " out of range for " +
                                            std::to_string(classes) + " classes");
    }
  }
  Tensor probs = softmax_values(lv);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = lv.data().data() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    loss += mx + std::log(z) - row[labels[r]];
  }
  loss /= static_cast<double>(rows);
  std::vector<int> y(labels.begin(), labels.end());
  const std::array<Var, 1> in{logits};
  return logits.tape->record("cross_entropy", Tensor::scalar(loss), in,
                             [logits, rows, classes, y = std::move(y), probs = std::move(probs)](
                                 Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0] / static_cast<double>(rows);
    auto gl = t.grad_buffer(logits.id).data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double target = static_cast<int>(c) == y[r] ? 1.0 : 0.0;
        gl[r * classes + c] += g * (probs[r * classes + c] - target);
      }
    }
  });
}

Var squared_error(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShapeMismatch, "squared_error: " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
  }
  const auto x = a.value().data();
  const auto y = b.value().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  const std::array<Var, 2> in{a, b};
  return tape.record("squared_error", Tensor::scalar(acc), in, [a, b](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    const auto x = t.value(a.id).data();
    const auto y = t.value(b.id).data();
    if (t.requires_grad(a.id)) {
      auto ga = t.grad_buffer(a.id).data();
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * g * (x[i] - y[i]);
    }
    if (t.requires_grad(b.id)) {
      auto gb = t.grad_buffer(b.id).data();
      for (std::size_t i = 0; i < x.size(); ++i) gb[i] -= 2.0 * g * (x[i] - y[i]);
    }
  });
}

Var mse(Var a, Var b) {
  const std::size_t n = a.value().size();
  if (n == 0) fail(ErrorCode::kShapeMismatch, "mse of empty tensors");
  return affine(squared_error(a, b), 1.0 / static_cast<double>(n));
}

}  // namespace pgm
