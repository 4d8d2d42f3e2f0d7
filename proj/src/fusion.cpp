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

#include "pgm/fusion.hpp"

#include <array>

#include "pgm/error.hpp"

namespace pgm {

namespace {

void check_stream(std::span<const Var> features, const char* what) {
  if (features.empty()) fail(ErrorCode::kInvalidArgument, std::string(what) + ": empty modality list");
  for (const Var& f : features) {
    if (f.value().rank() != 3 || f.shape() != features[0].shape()) {
      fail(ErrorCode::kShapeMismatch, std::string(what) + ": inconsistent feature shapes");
    }
  }
}

}  // namespace

Var FusionHead::fuse(Tape& tape, std::span<const Var> uni, std::span<const Var> paired) const {
  return fuse(tape, uni, paired, nullptr, nullptr);
}

Var FusionHead::fuse(Tape& tape, std::span<const Var> uni, std::span<const Var> paired,
                     Var* uni_stream_out, Var* paired_stream_out) const {
  if (mode != FusionMode::kPartitioned) {
    fail(ErrorCode::kState, "fuse() called on a concat-mode head");
  }
  check_stream(uni, "fuse");
  check_stream(paired, "fuse");
  if (uni.size() != paired.size() || uni[0].shape() != paired[0].shape()) {
    fail(ErrorCode::kShapeMismatch, "fuse: uni and paired lists do not match");
  }
  Var u_hat = uni_ffn.forward(tape, concat(uni));
  Var p_hat = paired_ffn.forward(tape, concat(paired));
  Var u_f = uni_stream.forward(tape, u_hat);
  Var p_f = paired_stream.forward(tape, p_hat);
  if (uni_stream_out != nullptr) *uni_stream_out = u_f;
  if (paired_stream_out != nullptr) *paired_stream_out = p_f;
  const std::array<Var, 2> both{u_f, p_f};
  return mean(fusion_ffn.forward(tape, concat(both)), 1);
}

Var FusionHead::concat_inputs(Tape& tape, std::span<const Var> inputs) const {
  (void)tape;
  check_stream(inputs, "concat fusion");
  std::vector<Var> pooled;
  for (const Var& x : inputs) pooled.push_back(mean(x, 1));
  return concat(pooled);
}

Var FusionHead::predict(Tape& tape, Var fused) const {
  if (fused.value().rank() != 2) fail(ErrorCode::kShapeMismatch, "predict expects (B, D) input");
  return predictor.forward(tape, fused);
}

FusionHead make_fusion_head(ParameterSet& set, const std::string& name, FusionMode mode,
                            TaskKind task, std::size_t n_modalities, std::size_t width,
                            std::size_t heads, std::size_t n_classes, Rng& rng) {
  if (n_modalities == 0) fail(ErrorCode::kConfig, "fusion head needs at least one modality");
  FusionHead h;
  h.mode = mode;
  h.task = task;
  const std::size_t outputs = task == TaskKind::kClassification ? n_classes : 1;
  if (outputs == 0) fail(ErrorCode::kConfig, "fusion head needs at least one output");
  const auto g = ParamGroup::kOverall;
  if (mode == FusionMode::kPartitioned) {
    h.uni_ffn = make_feed_forward(set, name + ".uni_ffn", n_modalities * width, 4 * width, width, g, rng);
    h.paired_ffn =
        make_feed_forward(set, name + ".paired_ffn", n_modalities * width, 4 * width, width, g, rng);
    h.uni_stream = make_transformer_block(set, name + ".uni_stream", width, heads, g, rng);
    h.paired_stream = make_transformer_block(set, name + ".paired_stream", width, heads, g, rng);
    h.fusion_ffn = make_feed_forward(set, name + ".fusion_ffn", 2 * width, 4 * width, width, g, rng);
    h.predictor = make_linear(set, name + ".predictor", width, outputs, g, rng, Init::kZero);
  } else {
    h.predictor =
        make_linear(set, name + ".predictor", n_modalities * width, outputs, g, rng, Init::kZero);
  }
  return h;
}

Var task_loss(Var prediction, std::span<const int> labels, std::span<const double> targets,
              TaskKind task) {
  if (task == TaskKind::kClassification) return cross_entropy(prediction, labels);
  const Shape& s = prediction.shape();
  if (s.size() != 2 || s[1] != 1 || targets.size() != s[0]) {
    fail(ErrorCode::kShapeMismatch, "regression loss: prediction " + shape_str(s) + " vs " +
                                        std::to_string(targets.size()) + " targets");
  }
  Tensor t(Shape{targets.size(), 1}, std::vector<double>(targets.begin(), targets.end()));
  return mse(prediction, prediction.tape->constant(std::move(t)));
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "classification") return TaskKind::kClassification;
  if (name == "regression") return TaskKind::kRegression;
  fail(ErrorCode::kInvalidArgument, "unknown task kind '" + name + "'");
}

const char* task_kind_name(TaskKind task) {
  return task == TaskKind::kClassification ? "classification" : "regression";
}

}  // namespace pgm
