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

#include "pgm/model.hpp"

#include "pgm/error.hpp"

namespace pgm {

std::string modality_name(std::size_t m) {
  static const char* names[] = {"A", "B", "C"};
  return m < 3 ? names[m] : "M" + std::to_string(m);
}

namespace {

Var learner_gate(Tape& tape, Var soft, GateRole role, GateMode mode, double theta) {
  if (mode == GateMode::kSoft) return soft;
  Tensor hard = harden(soft.value(), role, theta).as_tensor();
  if (mode == GateMode::kHard) return tape.constant(std::move(hard));
  for (std::size_t i = 0; i < hard.size(); ++i) hard[i] -= soft.value()[i];
  return add(soft, tape.constant(std::move(hard)));
}

}  // namespace

IterationLosses ForwardResult::summed() const {
  IterationLosses s;
  for (const IterationTerms& it : iterations) {
    if (it.ufc) s.ufc += it.ufc->value()[0];
    if (it.pfc) s.pfc += it.pfc->value()[0];
    if (it.upr) s.upr += it.upr->value()[0];
  }
  return s;
}

PgmModel::PgmModel(const TrainConfig& config, const ModelDims& dims)
    : config_(config), dims_(dims), ablation_(config.ablation.effective()) {
  config_.validate();
  if (dims.n_modalities < 2) fail(ErrorCode::kConfig, "PgM needs at least two modalities");
  if (dims.dim < 2 || dims.seq_len == 0) fail(ErrorCode::kConfig, "invalid model dimensions");
  Rng rng = Rng::stream(config.seed, 0x5067'4d00);
  const std::size_t d = dims.dim;
  for (std::size_t m = 0; m < dims.n_modalities; ++m) {
    const std::string tag = modality_name(m);
    if (!ablation_.no_partitioner) {
      partitioners_.push_back(make_partitioner_params(partitioner_set_, "partitioner." + tag, d, rng));
    }
    if (!ablation_.no_uni_learner) {
      uni_learners_.push_back(make_learner(uni_set_, "uni_learner." + tag, d, config.heads,
                                           config.learner_depth, ParamGroup::kLearner, rng));
    }
    if (!ablation_.no_paired_learner) {
      paired_learners_.push_back(make_learner(paired_set_, "paired_learner." + tag, d, config.heads,
                                              config.learner_depth, ParamGroup::kLearner, rng));
    }
    if (!ablation_.no_decoder) {
      decoders_.push_back(make_decoder(decoder_set_, "decoder." + tag, d, config.heads, rng));
    }
  }
  if (!ablation_.no_uni_learner) {
    ufc_head_ = make_linear(heads_set_, "ufc_head", d, dims.n_modalities, ParamGroup::kOverall, rng,
                            Init::kZero);
  }
  if (!ablation_.no_paired_learner) {
    pfc_head_ = make_linear(heads_set_, "pfc_head", d, 2, ParamGroup::kOverall, rng, Init::kZero);
  }
  fusion_ = make_fusion_head(fusion_set_, "fusion", config.fusion, config.task, dims.n_modalities, d,
                             config.heads, dims.n_classes, rng);
}

ForwardResult PgmModel::forward(Tape& tape, std::span<const Tensor> inputs, GateMode mode,
                                bool with_pretrain, bool with_head) const {
  if (inputs.size() != dims_.n_modalities) {
    fail(ErrorCode::kShapeMismatch, "expected " + std::to_string(dims_.n_modalities) +
                                        " modal inputs, got " + std::to_string(inputs.size()));
  }
  const std::size_t n_mod = dims_.n_modalities;
  std::vector<Var> in;
  for (const Tensor& x : inputs) {
    if (x.rank() != 3 || x.shape()[1] != dims_.seq_len || x.shape()[2] != dims_.dim ||
        x.shape()[0] != inputs[0].shape()[0]) {
      fail(ErrorCode::kShapeMismatch, "modal input has shape " + shape_str(x.shape()));
    }
    in.push_back(tape.constant(x));
  }

  ForwardResult result;
  if (ablation_.no_partitioner) {
    result.uni_final = in;
    result.paired_final = in;
  } else {
    // Partition every modality first; learners then run per iteration.
    for (std::size_t m = 0; m < n_mod; ++m) {
      result.traces.push_back(partition(tape, in[m], config_.n_iters, partitioners_[m], config_.theta));
    }
    const bool run_all_iterations = with_pretrain;
    const int first = run_all_iterations ? 1 : config_.n_iters;
    for (int i = first; i <= config_.n_iters; ++i) {
      std::vector<Var> uni(n_mod), paired(n_mod);
      for (std::size_t m = 0; m < n_mod; ++m) {
        const PartitionTrace& trace = result.traces[m];
        const PartitionState& st = trace.states[static_cast<std::size_t>(i - 1)];
        const Var gate_u = learner_gate(tape, st.gates.g_u, GateRole::kUni, mode, config_.theta);
        const Var gate_p = learner_gate(tape, st.gates.g_p, GateRole::kPaired, mode, config_.theta);
        uni[m] = ablation_.no_uni_learner ? st.u : uni_learners_[m].forward(tape, st.u, gate_u);
        paired[m] =
            ablation_.no_paired_learner ? st.p : paired_learners_[m].forward(tape, st.p, gate_p);
      }
      if (with_pretrain) {
        IterationTerms terms;
        if (!ablation_.no_uni_learner) terms.ufc = ufc_loss(tape, uni, ufc_head_);
        if (!ablation_.no_paired_learner) terms.pfc = pfc_loss(tape, uni, paired, pfc_head_);
        if (!ablation_.no_decoder) {
          std::vector<Var> recon(n_mod);
          for (std::size_t m = 0; m < n_mod; ++m) recon[m] = decoders_[m].forward(tape, uni[m], paired[m]);
          terms.upr = upr_loss(in, recon, dims_.dim);
        }
        result.iterations.push_back(terms);
      }
      if (i == config_.n_iters) {
        result.uni_final = uni;
        result.paired_final = paired;
      }
    }
    if (with_pretrain) {
      std::optional<Var> total;
      for (const IterationTerms& t : result.iterations) {
        for (const auto& term : {t.ufc, t.pfc, t.upr}) {
          if (term) total = total ? add(*total, *term) : *term;
        }
      }
      result.pretrain_loss = total;
    }
  }

  if (with_head) {
    Var fused = fusion_.mode == FusionMode::kConcat
                    ? fusion_.concat_inputs(tape, in)
                    : fusion_.fuse(tape, result.uni_final, result.paired_final);
    result.prediction = fusion_.predict(tape, fused);
  }
  return result;
}

std::vector<Parameter*> PgmModel::pgm_parameters() const {
  std::vector<Parameter*> out;
  for (const ParameterSet* s : {&partitioner_set_, &uni_set_, &paired_set_, &decoder_set_, &heads_set_}) {
    auto ps = s->all();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::vector<Parameter*> PgmModel::parameters() const {
  std::vector<Parameter*> out = pgm_parameters();
  auto fs = fusion_set_.all();
  out.insert(out.end(), fs.begin(), fs.end());
  return out;
}

std::vector<ParamReportRow> PgmModel::param_report() const {
  std::vector<ParamReportRow> rows = {
      {"modal_encoder", 0},
      {"partitioner", partitioner_set_.scalar_count()},
      {"uni_learner", uni_set_.scalar_count()},
      {"paired_learner", paired_set_.scalar_count()},
      {"decoder", decoder_set_.scalar_count()},
      {"objective_heads", heads_set_.scalar_count()},
      {"fusion_head", fusion_set_.scalar_count()},
  };
  std::size_t total = 0;
  for (const auto& r : rows) total += r.count;
  rows.push_back({"total", total});
  return rows;
}

void PgmModel::load_parameters(const std::vector<std::pair<std::string, Tensor>>& values) {
  auto params = parameters();
  if (values.size() != params.size()) {
    fail(ErrorCode::kFormat, "checkpoint holds " + std::to_string(values.size()) +
                                 " parameters, model expects " + std::to_string(params.size()));
  }
  for (const auto& [name, value] : values) {
    Parameter* target = nullptr;
    for (Parameter* p : params) {
      if (p->name == name) target = p;
    }
    if (target == nullptr) fail(ErrorCode::kFormat, "checkpoint parameter '" + name + "' unknown to model");
    if (target->value.shape() != value.shape()) {
      fail(ErrorCode::kFormat, "checkpoint parameter '" + name + "' has shape " +
                                   shape_str(value.shape()) + ", model expects " +
                                   shape_str(target->value.shape()));
    }
    target->value = value;
  }
}

}  // namespace pgm
