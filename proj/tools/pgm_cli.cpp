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

// pgm: command-line harness over the libpgm C API.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include "pgm/pgm.h"

namespace {

struct CliError {
  std::string error_class;
  std::string message;
};

void check(pgm_status s) {
  if (s != PGM_OK) throw CliError{pgm_status_name(s), pgm_last_error()};
}

// Owns a malloc'd string from the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { pgm_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(p); }
};
using Config = Handle<pgm_config, pgm_config_destroy>;
using Dataset = Handle<pgm_dataset, pgm_dataset_destroy>;
using Model = Handle<pgm_model, pgm_model_destroy>;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CliError{"io_error", "cannot open '" + path + "' for writing"};
  os << text;
  if (!os) throw CliError{"io_error", "failed writing '" + path + "'"};
}

// Config file first, then per-key flags.
struct Settings {
  std::string config_file;
  std::map<std::string, std::string> flags;
  bool quiet = false;

  void apply(pgm_config* c) const {
    if (!config_file.empty()) check(pgm_config_load_file(c, config_file.c_str()));
    for (const auto& [k, v] : flags) check(pgm_config_set(c, k.c_str(), v.c_str()));
  }
};

void print_row(const char* row, void* user) {
  const auto* s = static_cast<const Settings*>(user);
  if (!s->quiet) std::fprintf(stderr, "%s\n", row);
}

void add_config_options(CLI::App* sub, Settings& s) {
  sub->add_option("--config", s.config_file, "key = value config file")->check(CLI::ExistingFile);
  sub->add_flag("--quiet", s.quiet, "suppress per-epoch progress on stderr");
  for (std::size_t i = 0; i < pgm_config_key_count(); ++i) {
    const std::string key = pgm_config_key_name(i);
    auto* opt = sub->add_option_function<std::string>(
        "--" + key, [&s, key](const std::string& v) { s.flags[key] = v; }, pgm_config_key_doc(i));
    opt->group("Config keys");
  }
}

void load_dataset(const std::string& path, Dataset& d) { check(pgm_dataset_load(path.c_str(), &d.p)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PgM partitioner-guided modal learning: training and benchmark harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pgm_version());

  Settings s;
  std::string data_path, out_path, checkpoint_path, curve_path, metrics_path, partition_path, split = "test",
                                                                                       methods, cells_path;
  std::size_t oracle_samples = 20000, stride = 1;
  unsigned long long gc_seed = 1;
  double eps = 1e-6, tolerance = 1e-4;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_config_options(gen, s);
  gen->add_option("--out", out_path, "dataset file")->required();

  auto* pre = app.add_subcommand("pretrain", "stage one: minimise the pretraining loss");
  add_config_options(pre, s);
  pre->add_option("--data", data_path, "dataset file")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", out_path, "checkpoint to write")->required();
  pre->add_option("--curve", curve_path, "loss-curve CSV");

  auto* train = app.add_subcommand("train", "stage two: joint training with the task loss");
  add_config_options(train, s);
  train->add_option("--data", data_path, "dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--checkpoint", checkpoint_path, "pretrained checkpoint (fresh model if omitted)")
      ->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "model to write")->required();
  train->add_option("--curve", curve_path, "loss-curve CSV");

  auto* eval = app.add_subcommand("eval", "evaluate a model (hard gates by default)");
  add_config_options(eval, s);
  eval->add_option("--data", data_path, "dataset file")->required()->check(CLI::ExistingFile);
  eval->add_option("--model", checkpoint_path, "model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "train, val or test");
  eval->add_option("--metrics", metrics_path, "metrics JSON (stdout if omitted)");
  eval->add_option("--partition", partition_path, "partition-table CSV");

  auto* bench = app.add_subcommand("benchmark", "baselines vs PgM over several seeds");
  add_config_options(bench, s);
  bench->add_option("--data", data_path, "dataset file (generated from config if omitted)")
      ->check(CLI::ExistingFile);
  bench->add_option("--methods", methods, "comma-separated methods (default: all)");
  bench->add_option("--out", out_path, "grid CSV (stdout if omitted)");
  bench->add_option("--cells", cells_path, "per-seed CSV");
  bench->add_option("--oracle-samples", oracle_samples, "Monte-Carlo samples for the Bayes oracle");

  auto* params = app.add_subcommand("report-params", "trainable parameters per module");
  add_config_options(params, s);
  params->add_option("--model", checkpoint_path, "model file (config-built model if omitted)")
      ->check(CLI::ExistingFile);
  params->add_option("--out", out_path, "CSV (stdout if omitted)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--seed", gc_seed, "input seed");
  gc->add_option("--eps", eps, "central-difference step");
  gc->add_option("--stride", stride, "check every n-th parameter coordinate end to end");
  gc->add_option("--tolerance", tolerance, "maximum accepted relative error");
  gc->add_option("--out", out_path, "report CSV (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: usage_error: %s\n", e.what());
    return 2;
  }

  try {
    Config cfg;
    check(pgm_config_create(&cfg.p));

    if (gen->parsed()) {
      s.apply(cfg.p);
      Dataset d;
      check(pgm_dataset_generate(cfg.p, &d.p));
      check(pgm_dataset_save(d.p, out_path.c_str()));
    } else if (pre->parsed()) {
      s.apply(cfg.p);
      Dataset d;
      load_dataset(data_path, d);
      Model m;
      check(pgm_model_create(cfg.p, d.p, &m.p));
      check(pgm_model_pretrain(m.p, d.p, curve_path.empty() ? nullptr : curve_path.c_str(), print_row, &s));
      check(pgm_model_save(m.p, out_path.c_str()));
    } else if (train->parsed()) {
      Dataset d;
      load_dataset(data_path, d);
      Model m;
      if (checkpoint_path.empty()) {
        s.apply(cfg.p);
        check(pgm_model_create(cfg.p, d.p, &m.p));
      } else {
        check(pgm_model_load(checkpoint_path.c_str(), &m.p));
        Owned text;
        check(pgm_model_config(m.p, &text.p));
        check(pgm_config_load_text(cfg.p, text.p));
        s.apply(cfg.p);
        check(pgm_model_update_config(m.p, cfg.p));
      }
      check(pgm_model_train(m.p, d.p, curve_path.empty() ? nullptr : curve_path.c_str(), print_row, &s));
      check(pgm_model_save(m.p, out_path.c_str()));
    } else if (eval->parsed()) {
      Dataset d;
      load_dataset(data_path, d);
      Model m;
      check(pgm_model_load(checkpoint_path.c_str(), &m.p));
      if (!s.config_file.empty() || !s.flags.empty()) {
        Owned text;
        check(pgm_model_config(m.p, &text.p));
        check(pgm_config_load_text(cfg.p, text.p));
        s.apply(cfg.p);
        check(pgm_model_update_config(m.p, cfg.p));
      }
      Owned metrics, table;
      check(pgm_model_evaluate(m.p, d.p, split.c_str(), &metrics.p, &table.p));
      if (metrics_path.empty()) {
        std::fputs(metrics.p, stdout);
      } else {
        write_file(metrics_path, metrics.str());
      }
      if (!partition_path.empty()) write_file(partition_path, table.str());
    } else if (bench->parsed()) {
      s.apply(cfg.p);
      Dataset d;
      if (data_path.empty()) {
        check(pgm_dataset_generate(cfg.p, &d.p));
      } else {
        load_dataset(data_path, d);
      }
      Owned grid, cells;
      check(pgm_benchmark(cfg.p, d.p, methods.empty() ? nullptr : methods.c_str(), oracle_samples, &grid.p,
                          &cells.p, print_row, &s));
      if (out_path.empty()) {
        std::fputs(grid.p, stdout);
      } else {
        write_file(out_path, grid.str());
      }
      if (!cells_path.empty()) write_file(cells_path, cells.str());
    } else if (params->parsed()) {
      Model m;
      if (checkpoint_path.empty()) {
        s.apply(cfg.p);
        check(pgm_model_create(cfg.p, nullptr, &m.p));
      } else {
        check(pgm_model_load(checkpoint_path.c_str(), &m.p));
      }
      Owned csv;
      check(pgm_model_param_report(m.p, &csv.p));
      if (out_path.empty()) {
        std::fputs(csv.p, stdout);
      } else {
        write_file(out_path, csv.str());
      }
    } else if (gc->parsed()) {
      Owned report;
      double worst = 0.0;
      check(pgm_gradcheck(gc_seed, eps, stride, &report.p, &worst));
      if (out_path.empty()) {
        std::fputs(report.p, stdout);
      } else {
        write_file(out_path, report.str());
      }
      if (!(worst < tolerance)) {
        std::ostringstream os;
        os << "max relative error " << worst << " exceeds tolerance " << tolerance;
        throw CliError{"gradcheck_failed", os.str()};
      }
    }
  } catch (const CliError& e) {
    std::string msg = e.message;
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "error: %s: %s\n", e.error_class.c_str(), msg.c_str());
    return 1;
  }
  return 0;
}
