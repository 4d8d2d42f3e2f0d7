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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pgm/baselines.hpp"
#include "pgm/train.hpp"

namespace pgm {

// Full two-stage PgM run: pretrain, joint training, test evaluation.
struct PgmRun {
  std::vector<LossReport> pretrain_curve;
  std::vector<LossReport> joint_curve;
  MetricsReport metrics;
  std::vector<ParamReportRow> params;
};
PgmRun run_pgm(const RunConfig& config, const SynthDataset& data);

// Method names: every baseline name, "pgm", "pgm-concat" (concat fusion head),
// and "pgm-<ablation flag>" such as "pgm-no_decoder".
std::vector<std::string> default_methods(std::size_t n_modalities);
bool is_pgm_method(const std::string& method);
// Config a PgM-family method trains with.
RunConfig pgm_method_config(const RunConfig& base, const std::string& method);

struct BenchmarkCell {
  std::string method;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  double median = 0.0;
};
Summary summarize(std::vector<double> values);

struct BenchmarkRow {
  std::string method;
  std::size_t seeds = 0;
  Summary accuracy;
  Summary weighted_f1;
};

struct BenchmarkTable {
  std::vector<BenchmarkCell> cells;
  std::vector<BenchmarkRow> rows;
  OracleEstimate oracle;
  std::string csv() const;
  std::string cells_csv() const;
};

using CellCallback = std::function<void(const BenchmarkCell&)>;

// Runs every method for bench_seeds training seeds (seed, seed+1, ...) on the
// same dataset, then appends the Bayes-oracle row.
BenchmarkTable run_benchmark(const RunConfig& config, const SynthDataset& data,
                             const std::vector<std::string>& methods, std::size_t oracle_samples = 20000,
                             const CellCallback& on_cell = {});

}  // namespace pgm
