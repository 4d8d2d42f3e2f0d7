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

#include "pgm/baselines.hpp"

#include <algorithm>

#include "pgm/error.hpp"

namespace pgm {

std::string BaselineMethod::name() const {
  switch (kind) {
    case BaselineKind::kConcat: return "concat";
    case BaselineKind::kAdd: return "add";
    case BaselineKind::kMax: return "max";
    case BaselineKind::kLinear: return "linear";
    case BaselineKind::kMlp: return "mlp";
    case BaselineKind::kUni: return "uni:" + modality_name(modality);
  }
  return "unknown";
}

BaselineMethod parse_baseline(const std::string& name) {
  if (name == "concat") return {BaselineKind::kConcat, 0};
  if (name == "add") return {BaselineKind::kAdd, 0};
  if (name == "max") return {BaselineKind::kMax, 0};
  if (name == "linear") return {BaselineKind::kLinear, 0};
  if (name == "mlp") return {BaselineKind::kMlp, 0};
  if (name.rfind("uni:", 0) == 0 && name.size() > 4) {
    const std::string tag = name.substr(4);
    for (std::size_t m = 0; m < 3; ++m) {
      if (tag == modality_name(m) || tag == std::to_string(m)) return {BaselineKind::kUni, m};
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown baseline method '" + name + "'");
}

BaselineModel::BaselineModel(BaselineMethod method, std::size_t n_modalities, std::size_t dim,
                             std::size_t n_classes, TaskKind task, Rng& rng)
    : method_(method), n_modalities_(n_modalities), dim_(dim) {
  if (n_modalities == 0) fail(ErrorCode::kConfig, "baseline needs at least one modality");
  if (method.kind == BaselineKind::kUni && method.modality >= n_modalities) {
    fail(ErrorCode::kInvalidArgument, "baseline " + method.name() + " names a missing modality");
  }
  const std::size_t outputs = task == TaskKind::kClassification ? n_classes : 1;
  const auto g = ParamGroup::kOverall;
  std::size_t width = dim;
  switch (method.kind) {
    case BaselineKind::kConcat:
      width = n_modalities * dim;
      break;
    case BaselineKind::kLinear: {
      mix_ = &set_.create("baseline.mix", Shape{n_modalities}, g);
      mix_->value.fill(1.0 / static_cast<double>(n_modalities));
      break;
    }
    case BaselineKind::kMlp:
      hidden_ = make_linear(set_, "baseline.hidden", n_modalities * dim, 4 * dim, g, rng);
      width = 4 * dim;
      break;
    default:
      break;
  }
  head_ = make_linear(set_, "baseline.head", width, outputs, g, rng);
}

Var BaselineModel::features(Tape& tape, std::span<const Tensor> pooled) const {
  if (pooled.size() != n_modalities_) {
    fail(ErrorCode::kShapeMismatch, "baseline expects " + std::to_string(n_modalities_) + " modalities");
  }
  std::vector<Var> xs;
  for (const Tensor& t : pooled) {
    if (t.rank() != 2 || t.shape()[1] != dim_ || t.shape()[0] != pooled[0].shape()[0]) {
      fail(ErrorCode::kShapeMismatch, "baseline input has shape " + shape_str(t.shape()));
    }
    xs.push_back(tape.constant(t));
  }
  switch (method_.kind) {
    case BaselineKind::kConcat: return xs.size() == 1 ? xs[0] : concat(xs);
    case BaselineKind::kAdd: {
      Var acc = xs[0];
      for (std::size_t m = 1; m < xs.size(); ++m) acc = add(acc, xs[m]);
      return acc;
    }
    case BaselineKind::kMax: {
      Var acc = xs[0];
      for (std::size_t m = 1; m < xs.size(); ++m) acc = maximum(acc, xs[m]);
      return acc;
    }
    case BaselineKind::kLinear: {
      Var w = tape.param(*mix_);
      Var acc;
      for (std::size_t m = 0; m < xs.size(); ++m) {
        Var wm = broadcast_to(reshape(slice(w, m, m + 1), Shape{}), Shape{dim_});
        Var term = mul(xs[m], wm);
        acc = m == 0 ? term : add(acc, term);
      }
      return acc;
    }
    case BaselineKind::kMlp: return gelu(hidden_.forward(tape, xs.size() == 1 ? xs[0] : concat(xs)));
    case BaselineKind::kUni: return xs[method_.modality];
  }
  fail(ErrorCode::kInternal, "unhandled baseline kind");
}

Var BaselineModel::forward(Tape& tape, std::span<const Tensor> pooled) const {
  return head_.forward(tape, features(tape, pooled));
}

namespace {

std::vector<Tensor> gather_rows(const std::vector<Tensor>& pooled, std::span<const std::size_t> idx) {
  std::vector<Tensor> out;
  for (const Tensor& p : pooled) {
    const std::size_t d = p.shape()[1];
    Tensor t(Shape{idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * d), d,
                  t.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

MetricsReport train_baseline(const BaselineMethod& method, const SynthDataset& data, const RunConfig& config) {
  const TrainConfig& cfg = config.train;
  const SynthConfig& sc = data.config;
  Rng rng = Rng::stream(cfg.seed, 0x62617365);
  BaselineModel model(method, sc.n_modalities, sc.dim, 2, cfg.task, rng);
  Adam::Rates rates{cfg.lr_overall, cfg.lr_overall, cfg.lr_overall};
  Adam opt(model.parameters(), rates);
  const std::vector<Tensor> train = pooled_inputs(data.train);
  const int epochs = cfg.pretrain_epochs + cfg.joint_epochs;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto order = epoch_order(data.train.count, cfg.seed, 3, epoch);
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + s, e - s);
      std::vector<int> labels;
      std::vector<double> targets;
      for (std::size_t i : idx) {
        labels.push_back(data.train.labels[i]);
        targets.push_back(data.train.scores[i]);
      }
      Tape tape;
      Var loss = task_loss(model.forward(tape, gather_rows(train, idx)), labels, targets, cfg.task);
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
    }
  }
  const std::vector<Tensor> test = pooled_inputs(data.test);
  Tape tape;
  const Tensor pred = model.forward(tape, test).value();
  std::vector<int> predicted;
  const std::size_t k = pred.shape()[1];
  for (std::size_t i = 0; i < data.test.count; ++i) {
    if (k == 1) {
      predicted.push_back(pred[i] > 0.0 ? 1 : 0);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (pred[i * k + c] > pred[i * k + best]) best = c;
    predicted.push_back(static_cast<int>(best));
  }
  MetricsReport r = classification_metrics(data.test.labels, predicted, 2);
  r.split = "test";
  r.seed = cfg.seed;
  r.config_hash = config.hash();
  return r;
}

}  // namespace pgm
