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

#include "pgm/objectives.hpp"

#include <cmath>
#include <cstdio>

#include "pgm/error.hpp"

namespace pgm {

namespace {

void check_features(std::span<const Var> features, const char* what) {
  for (const Var& f : features) {
    if (f.value().rank() != 3 || f.shape() != features[0].shape()) {
      fail(ErrorCode::kShapeMismatch, std::string(what) + ": inconsistent feature shapes");
    }
  }
}

Var pooled_cross_entropy(Tape& tape, Var feature, const Linear& head, int label) {
  Var logits = head.forward(tape, mean(feature, 1));
  const std::vector<int> labels(feature.shape()[0], label);
  return cross_entropy(logits, labels);
}

Var average(std::span<const Var> terms) {
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return affine(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

Var ufc_loss(Tape& tape, std::span<const Var> uni_features, const Linear& head,
             std::span<const int> modality_ids) {
  if (uni_features.size() < 2) {
    fail(ErrorCode::kInvalidArgument, "ufc_loss needs at least two modalities");
  }
  if (!modality_ids.empty() && modality_ids.size() != uni_features.size()) {
    fail(ErrorCode::kShapeMismatch, "ufc_loss: one modality id per feature required");
  }
  check_features(uni_features, "ufc_loss");
  std::vector<Var> terms;
  for (std::size_t m = 0; m < uni_features.size(); ++m) {
    const int id = modality_ids.empty() ? static_cast<int>(m) : modality_ids[m];
    terms.push_back(pooled_cross_entropy(tape, uni_features[m], head, id));
  }
  return average(terms);
}

Var pfc_loss(Tape& tape, std::span<const Var> uni_features, std::span<const Var> paired_features,
             const Linear& head) {
  if (uni_features.empty() || uni_features.size() != paired_features.size()) {
    fail(ErrorCode::kShapeMismatch, "pfc_loss: need matching non-empty uni and paired lists");
  }
  check_features(uni_features, "pfc_loss");
  check_features(paired_features, "pfc_loss");
  if (uni_features[0].shape() != paired_features[0].shape()) {
    fail(ErrorCode::kShapeMismatch, "pfc_loss: uni and paired shapes differ");
  }
  std::vector<Var> terms;
  for (const Var& u : uni_features) terms.push_back(pooled_cross_entropy(tape, u, head, 0));
  for (const Var& p : paired_features) terms.push_back(pooled_cross_entropy(tape, p, head, 1));
  return average(terms);
}

Var upr_loss(std::span<const Var> originals, std::span<const Var> reconstructions,
             std::size_t d_h) {
  if (d_h == 0) fail(ErrorCode::kInvalidArgument, "upr_loss: d_h must be positive");
  if (originals.empty() || originals.size() != reconstructions.size()) {
    fail(ErrorCode::kShapeMismatch, "upr_loss: need matching non-empty lists");
  }
  Var acc{};
  for (std::size_t m = 0; m < originals.size(); ++m) {
    if (originals[m].shape() != reconstructions[m].shape() || originals[m].value().rank() == 0) {
      fail(ErrorCode::kShapeMismatch, "upr_loss: reconstruction shape mismatch");
    }
    Var term = squared_error(originals[m], reconstructions[m]);
    acc = m == 0 ? term : add(acc, term);
  }
  const double samples = static_cast<double>(originals[0].shape()[0]);
  return affine(acc, 1.0 / (samples * static_cast<double>(d_h)));
}

double pretrain_loss(std::span<const IterationLosses> trace, int n_iters) {
  if (n_iters < 1 || trace.size() != static_cast<std::size_t>(n_iters)) {
    fail(ErrorCode::kShapeMismatch, "pretrain_loss: trace has " + std::to_string(trace.size()) +
                                        " iterations, expected " + std::to_string(n_iters));
  }
  double total = 0.0;
  for (const IterationLosses& it : trace) total += it.ufc + it.pfc + it.upr;
  return total;
}

double joint_loss(double l_p, double l_t, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) fail(ErrorCode::kInvalidArgument, "loss weights must be >= 0");
  return alpha * l_p + beta * l_t;
}

Var joint_loss(Var l_p, Var l_t, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) fail(ErrorCode::kInvalidArgument, "loss weights must be >= 0");
  return add(affine(l_p, alpha), affine(l_t, beta));
}

const char* stage_name(Stage stage) {
  return stage == Stage::kPretrain ? "pretrain" : "joint";
}

LossReport make_loss_report(int epoch, Stage stage, double ufc, double pfc, double upr,
                            std::optional<double> task, double alpha, double beta) {
  LossReport r;
  r.epoch = epoch;
  r.stage = stage;
  r.ufc = ufc;
  r.pfc = pfc;
  r.upr = upr;
  r.task = task;
  const double l_p = ufc + pfc + upr;
  r.total = stage == Stage::kPretrain ? l_p : joint_loss(l_p, task.value_or(0.0), alpha, beta);
  return r;
}

std::string loss_report_csv_row(const LossReport& row) {
  char buf[256];
  char task[40] = "";
  if (row.task) std::snprintf(task, sizeof task, "%.17g", *row.task);
  std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%s,%.17g", row.epoch,
                stage_name(row.stage), row.ufc, row.pfc, row.upr, task, row.total);
  return buf;
}

}  // namespace pgm
