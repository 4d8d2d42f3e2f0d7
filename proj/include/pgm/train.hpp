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
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pgm/config.hpp"
#include "pgm/model.hpp"
#include "pgm/synth.hpp"

namespace pgm {

// Adam with one learning rate per parameter group.
class Adam {
 public:
  struct Rates {
    double overall = 3e-4;
    double learner = 1e-4;
    double decoder = 1e-3;
  };

  Adam(std::vector<Parameter*> params, Rates rates, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void zero_grad();
  // Parameters that received no gradient this step are left untouched.
  void step();
  long steps() const { return t_; }
  double rate(ParamGroup group) const;

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  Rates rates_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

Adam::Rates rates_from(const TrainConfig& config);

ModelDims dims_from(const SynthConfig& config);

// Deterministic epoch order: a Fisher-Yates shuffle keyed by (seed, stage, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t stage, int epoch);

// Called after each epoch with the row just produced.
using EpochCallback = std::function<void(const LossReport&)>;

// Minimises L^P over the training split for pretrain_epochs. The fusion head
// is not touched.
std::vector<LossReport> pretrain(PgmModel& model, const SynthDataset& data,
                                 const EpochCallback& on_epoch = {});

// Minimises alpha L^P + beta L^T for joint_epochs, fusion head included.
std::vector<LossReport> train_joint(PgmModel& model, const SynthDataset& data,
                                    const EpochCallback& on_epoch = {});

void write_loss_curve(const std::vector<LossReport>& rows, const std::string& path);

struct ClassMetrics {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::string split;
  std::size_t count = 0;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<PartitionReportRow> partition_table;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Accuracy, support-weighted F1 and per-class precision/recall over labels
// 0..n_classes-1.
MetricsReport classification_metrics(std::span<const int> truth, std::span<const int> predicted,
                                     std::size_t n_classes);

std::vector<int> predict_labels(const PgmModel& model, const SynthSplit& split);

// Partition table from one partitioner pass over the whole split.
std::vector<PartitionReportRow> partition_table(const PgmModel& model, const SynthSplit& split);

MetricsReport evaluate(const PgmModel& model, const SynthSplit& split, const std::string& split_name,
                       const RunConfig& config);

std::string metrics_json(const MetricsReport& report);
std::string partition_table_csv(const std::vector<PartitionReportRow>& rows);
std::string param_report_csv(const std::vector<ParamReportRow>& rows);

// Checkpoint: magic, version, config echo, then every parameter by name.
void save_checkpoint(const PgmModel& model, const RunConfig& config, const std::string& path);
struct Checkpoint {
  RunConfig config;
  std::unique_ptr<PgmModel> model;
};
Checkpoint load_checkpoint(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace pgm
