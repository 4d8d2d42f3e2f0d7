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

#include "pgm/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include "pgm/error.hpp"

namespace pgm {

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'G', 'M', 'C', 'K', 'P', 'T', '\x01'};
constexpr std::uint32_t kCheckpointVersion = 1;

constexpr std::uint64_t kStagePretrain = 1;
constexpr std::uint64_t kStageJoint = 2;

double group_rate(const Adam::Rates& r, ParamGroup g) {
  switch (g) {
    case ParamGroup::kOverall: return r.overall;
    case ParamGroup::kLearner: return r.learner;
    case ParamGroup::kDecoder: return r.decoder;
  }
  return r.overall;
}

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& order,
                                                 std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

[[noreturn]] void rethrow_with_context(const Error& e, const char* stage, int epoch, std::size_t step) {
  std::ostringstream os;
  os << stage << " epoch " << epoch << " step " << step << ": " << e.what();
  fail(e.code(), os.str());
}

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    fail(ErrorCode::kFormat, "truncated checkpoint '" + path + "'");
  }
  return v;
}

}  // namespace

Adam::Adam(std::vector<Parameter*> params, Rates rates, double beta1, double beta2, double eps)
    : params_(std::move(params)), rates_(rates), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double Adam::rate(ParamGroup group) const { return group_rate(rates_, group); }

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.grad.size() != p.value.size()) continue;
    const double lr = group_rate(rates_, p.group);
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

Adam::Rates rates_from(const TrainConfig& c) { return {c.lr_overall, c.lr_learners, c.lr_decoder}; }

ModelDims dims_from(const SynthConfig& c) { return {c.n_modalities, c.seq_len, c.dim, 2}; }

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t stage, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, 0x73687566, stage, static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<LossReport> pretrain(PgmModel& model, const SynthDataset& data, const EpochCallback& on_epoch) {
  const TrainConfig& cfg = model.config();
  std::vector<LossReport> rows;
  if (model.ablation().no_partitioner) {
    // Nothing to pretrain; still emit zero rows so curves stay gap-free.
    for (int e = 1; e <= cfg.pretrain_epochs; ++e) {
      rows.push_back(make_loss_report(e, Stage::kPretrain, 0, 0, 0, std::nullopt, cfg.alpha, cfg.beta));
      if (on_epoch) on_epoch(rows.back());
    }
    return rows;
  }
  Adam opt(model.pgm_parameters(), rates_from(cfg));
  const SynthSplit& split = data.train;
  for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    const auto batches = batches_of(epoch_order(split.count, cfg.seed, kStagePretrain, epoch), cfg.batch_size);
    IterationLosses sum;
    double weight = 0.0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const Batch batch = make_batch(split, batches[step]);
      try {
        Tape tape;
        ForwardResult r = model.forward(tape, batch.inputs, cfg.train_gate_mode, true, false);
        const IterationLosses s = r.summed();
        const double b = static_cast<double>(batch.size());
        sum.ufc += b * s.ufc;
        sum.pfc += b * s.pfc;
        sum.upr += b * s.upr;
        weight += b;
        if (!r.pretrain_loss) continue;
        opt.zero_grad();
        tape.backward(*r.pretrain_loss);
        opt.step();
      } catch (const Error& e) {
        rethrow_with_context(e, "pretrain", epoch, step);
      }
    }
    rows.push_back(make_loss_report(epoch, Stage::kPretrain, sum.ufc / weight, sum.pfc / weight,
                                    sum.upr / weight, std::nullopt, cfg.alpha, cfg.beta));
    if (on_epoch) on_epoch(rows.back());
  }
  return rows;
}

std::vector<LossReport> train_joint(PgmModel& model, const SynthDataset& data, const EpochCallback& on_epoch) {
  const TrainConfig& cfg = model.config();
  Adam opt(model.parameters(), rates_from(cfg));
  const SynthSplit& split = data.train;
  std::vector<LossReport> rows;
  for (int epoch = 1; epoch <= cfg.joint_epochs; ++epoch) {
    const auto batches = batches_of(epoch_order(split.count, cfg.seed, kStageJoint, epoch), cfg.batch_size);
    IterationLosses sum;
    double task_sum = 0.0;
    double weight = 0.0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const Batch batch = make_batch(split, batches[step]);
      try {
        Tape tape;
        ForwardResult r = model.forward(tape, batch.inputs, cfg.train_gate_mode, true, true);
        Var lt = task_loss(*r.prediction, batch.labels, batch.targets, cfg.task);
        Var loss = r.pretrain_loss ? joint_loss(*r.pretrain_loss, lt, cfg.alpha, cfg.beta)
                                   : affine(lt, cfg.beta);
        const IterationLosses s = r.summed();
        const double b = static_cast<double>(batch.size());
        sum.ufc += b * s.ufc;
        sum.pfc += b * s.pfc;
        sum.upr += b * s.upr;
        task_sum += b * lt.value()[0];
        weight += b;
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
      } catch (const Error& e) {
        rethrow_with_context(e, "train", epoch, step);
      }
    }
    rows.push_back(make_loss_report(epoch, Stage::kJoint, sum.ufc / weight, sum.pfc / weight,
                                    sum.upr / weight, task_sum / weight, cfg.alpha, cfg.beta));
    if (on_epoch) on_epoch(rows.back());
  }
  return rows;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  os << text;
  if (!os) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

void write_loss_curve(const std::vector<LossReport>& rows, const std::string& path) {
  std::string text = std::string(kLossCurveHeader) + "\n";
  for (const LossReport& r : rows) text += loss_report_csv_row(r) + "\n";
  write_text_file(path, text);
}

MetricsReport classification_metrics(std::span<const int> truth, std::span<const int> predicted,
                                     std::size_t n_classes) {
  if (truth.size() != predicted.size()) fail(ErrorCode::kShapeMismatch, "metrics: length mismatch");
  if (truth.empty()) fail(ErrorCode::kInvalidArgument, "metrics on an empty split");
  MetricsReport r;
  r.count = truth.size();
  std::vector<std::size_t> tp(n_classes), fp(n_classes), fn(n_classes), support(n_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes ||
        static_cast<std::size_t>(p) >= n_classes) {
      fail(ErrorCode::kInvalidArgument, "metrics: label out of range");
    }
    ++support[static_cast<std::size_t>(t)];
    if (t == p) {
      ++correct;
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassMetrics m;
    m.label = static_cast<int>(c);
    m.support = support[c];
    const double pd = static_cast<double>(tp[c] + fp[c]);
    const double rd = static_cast<double>(tp[c] + fn[c]);
    m.precision = pd > 0 ? static_cast<double>(tp[c]) / pd : 0.0;
    m.recall = rd > 0 ? static_cast<double>(tp[c]) / rd : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.weighted_f1 += m.f1 * static_cast<double>(m.support) / static_cast<double>(truth.size());
    r.per_class.push_back(m);
  }
  return r;
}

std::vector<int> predict_labels(const PgmModel& model, const SynthSplit& split) {
  const TrainConfig& cfg = model.config();
  std::vector<std::size_t> order(split.count);
  for (std::size_t i = 0; i < split.count; ++i) order[i] = i;
  std::vector<int> out;
  out.reserve(split.count);
  for (const auto& idx : batches_of(order, cfg.batch_size)) {
    const Batch batch = make_batch(split, idx);
    Tape tape;
    ForwardResult r = model.forward(tape, batch.inputs, cfg.eval_gate_mode, false, true);
    const Tensor& pred = r.prediction->value();
    const std::size_t k = pred.shape()[1];
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (cfg.task == TaskKind::kRegression) {
        out.push_back(pred[i] > 0.0 ? 1 : 0);
        continue;
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (pred[i * k + c] > pred[i * k + best]) best = c;
      }
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

std::vector<PartitionReportRow> partition_table(const PgmModel& model, const SynthSplit& split) {
  std::vector<PartitionReportRow> rows;
  if (model.ablation().no_partitioner) return rows;
  Tape tape;
  std::vector<Tensor> inputs(split.inputs.begin(), split.inputs.end());
  ForwardResult r = model.forward(tape, inputs, GateMode::kHard, false, false);
  for (std::size_t m = 0; m < r.traces.size(); ++m) {
    rows.push_back(partition_report_row(modality_name(m), r.traces[m].final_uni, r.traces[m].final_paired));
  }
  return rows;
}

MetricsReport evaluate(const PgmModel& model, const SynthSplit& split, const std::string& split_name,
                       const RunConfig& config) {
  if (split.count == 0) fail(ErrorCode::kInvalidArgument, "cannot evaluate on an empty split");
  const std::vector<int> pred = predict_labels(model, split);
  MetricsReport r = classification_metrics(split.labels, pred, model.dims().n_classes);
  r.split = split_name;
  r.partition_table = partition_table(model, split);
  r.seed = config.train.seed;
  r.config_hash = config.hash();
  return r;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["split"] = r.split;
  j["count"] = r.count;
  j["accuracy"] = r.accuracy;
  j["weighted_f1"] = r.weighted_f1;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const ClassMetrics& c : r.per_class) {
    j["per_class"].push_back({{"label", c.label},
                              {"precision", c.precision},
                              {"recall", c.recall},
                              {"f1", c.f1},
                              {"support", c.support}});
  }
  j["partition_table"] = nlohmann::ordered_json::array();
  for (const PartitionReportRow& p : r.partition_table) {
    j["partition_table"].push_back({{"modality", p.modality},
                                    {"percent_uni", p.percent_uni},
                                    {"percent_paired", p.percent_paired},
                                    {"percent_overlap", p.percent_overlap},
                                    {"cut_u", p.cut_u},
                                    {"cut_p", p.cut_p}});
  }
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  return j.dump(2) + "\n";
}

std::string partition_table_csv(const std::vector<PartitionReportRow>& rows) {
  std::string out = "modality,percent_uni,percent_paired,percent_overlap,cut_u,cut_p\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%zu,%zu\n", r.modality.c_str(), r.percent_uni,
                  r.percent_paired, r.percent_overlap, r.cut_u, r.cut_p);
    out += buf;
  }
  return out;
}

std::string param_report_csv(const std::vector<ParamReportRow>& rows) {
  std::string out = "module,parameters\n";
  for (const auto& r : rows) out += r.module + "," + std::to_string(r.count) + "\n";
  return out;
}

void save_checkpoint(const PgmModel& model, const RunConfig& config, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put(os, kCheckpointVersion);
  const std::string text = config.to_text();
  put(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto params = model.parameters();
  put(os, static_cast<std::uint64_t>(params.size()));
  for (const Parameter* p : params) {
    put(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put(os, static_cast<std::uint64_t>(p->value.rank()));
    for (std::size_t d : p->value.shape()) put(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(p->value.data().data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!os) fail(ErrorCode::kIo, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    fail(ErrorCode::kFormat, "'" + path + "' is not a PgM checkpoint");
  }
  const auto version = take<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kFormat, "checkpoint version " + std::to_string(version) + " unsupported");
  }
  const auto text_len = take<std::uint32_t>(is, path);
  std::string text(text_len, '\0');
  if (!is.read(text.data(), text_len)) fail(ErrorCode::kFormat, "truncated checkpoint '" + path + "'");
  Checkpoint ck;
  ck.config.load_text(text);
  ck.config.validate();
  const auto n = take<std::uint64_t>(is, path);
  if (n > (1u << 20)) fail(ErrorCode::kFormat, "implausible parameter count in checkpoint");
  std::vector<std::pair<std::string, Tensor>> values;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto name_len = take<std::uint32_t>(is, path);
    if (name_len > 4096) fail(ErrorCode::kFormat, "implausible parameter name in checkpoint");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) fail(ErrorCode::kFormat, "truncated checkpoint '" + path + "'");
    const auto rank = take<std::uint64_t>(is, path);
    if (rank > 8) fail(ErrorCode::kFormat, "implausible tensor rank in checkpoint");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(take<std::uint64_t>(is, path));
    if (shape_numel(shape) > (1u << 26)) fail(ErrorCode::kFormat, "implausible tensor size in checkpoint");
    Tensor t(shape);
    if (!is.read(reinterpret_cast<char*>(t.data().data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      fail(ErrorCode::kFormat, "truncated checkpoint '" + path + "'");
    }
    values.emplace_back(std::move(name), std::move(t));
  }
  ck.model = std::make_unique<PgmModel>(ck.config.train, dims_from(ck.config.synth));
  ck.model->load_parameters(values);
  return ck;
}

}  // namespace pgm
