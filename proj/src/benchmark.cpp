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

#include "pgm/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pgm/error.hpp"

namespace pgm {

PgmRun run_pgm(const RunConfig& config, const SynthDataset& data) {
  PgmModel model(config.train, dims_from(data.config));
  PgmRun run;
  run.params = model.param_report();
  run.pretrain_curve = pretrain(model, data);
  run.joint_curve = train_joint(model, data);
  run.metrics = evaluate(model, data.test, "test", config);
  return run;
}

std::vector<std::string> default_methods(std::size_t n_modalities) {
  std::vector<std::string> out;
  for (std::size_t m = 0; m < n_modalities; ++m) out.push_back("uni:" + modality_name(m));
  for (const char* name : {"concat", "add", "max", "linear", "mlp", "pgm"}) out.emplace_back(name);
  return out;
}

bool is_pgm_method(const std::string& method) { return method.rfind("pgm", 0) == 0; }

RunConfig pgm_method_config(const RunConfig& base, const std::string& method) {
  RunConfig c = base;
  if (method == "pgm") return c;
  if (method == "pgm-concat") {
    c.train.fusion = FusionMode::kConcat;
    return c;
  }
  static const char* flags[] = {"no_partitioner", "no_uni_learner", "no_paired_learner", "no_decoder"};
  for (const char* flag : flags) {
    if (method == std::string("pgm-") + flag) {
      c.set(flag, "true");
      return c;
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown PgM variant '" + method + "'");
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  s.median = values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
  return s;
}

std::string BenchmarkTable::csv() const {
  std::string out = "method,seeds,acc_mean,acc_std,acc_median,f1_mean,f1_std,f1_median\n";
  char buf[512];
  for (const BenchmarkRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.method.c_str(), r.seeds,
                  r.accuracy.mean, r.accuracy.std, r.accuracy.median, r.weighted_f1.mean,
                  r.weighted_f1.std, r.weighted_f1.median);
    out += buf;
  }
  // The oracle's spread column holds its Monte-Carlo standard error.
  std::snprintf(buf, sizeof buf, "bayes_oracle,0,%.6f,%.6f,%.6f,,,\n", oracle.accuracy, oracle.std_error,
                oracle.accuracy);
  out += buf;
  return out;
}

std::string BenchmarkTable::cells_csv() const {
  std::string out = "method,seed,accuracy,weighted_f1\n";
  char buf[512];
  for (const BenchmarkCell& c : cells) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%.6f,%.6f\n", c.method.c_str(),
                  static_cast<unsigned long long>(c.seed), c.accuracy, c.weighted_f1);
    out += buf;
  }
  return out;
}

BenchmarkTable run_benchmark(const RunConfig& config, const SynthDataset& data,
                             const std::vector<std::string>& methods, std::size_t oracle_samples,
                             const CellCallback& on_cell) {
  if (methods.empty()) fail(ErrorCode::kInvalidArgument, "benchmark needs at least one method");
  for (const std::string& m : methods) {
    if (is_pgm_method(m)) {
      pgm_method_config(config, m);
    } else {
      parse_baseline(m);
    }
  }
  BenchmarkTable table;
  for (const std::string& method : methods) {
    BenchmarkRow row;
    row.method = method;
    std::vector<double> acc, f1;
    for (std::size_t k = 0; k < config.train.bench_seeds; ++k) {
      RunConfig rc = is_pgm_method(method) ? pgm_method_config(config, method) : config;
      rc.train.seed = config.train.seed + k;
      const MetricsReport m = is_pgm_method(method) ? run_pgm(rc, data).metrics
                                                    : train_baseline(parse_baseline(method), data, rc);
      BenchmarkCell cell{method, rc.train.seed, m.accuracy, m.weighted_f1};
      table.cells.push_back(cell);
      if (on_cell) on_cell(cell);
      acc.push_back(m.accuracy);
      f1.push_back(m.weighted_f1);
    }
    row.seeds = acc.size();
    row.accuracy = summarize(acc);
    row.weighted_f1 = summarize(f1);
    table.rows.push_back(row);
  }
  table.oracle = bayes_oracle(data.config, oracle_samples);
  return table;
}

}  // namespace pgm
