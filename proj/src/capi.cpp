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

#include "pgm/pgm.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "pgm/benchmark.hpp"
#include "pgm/checks.hpp"
#include "pgm/error.hpp"
#include "pgm/train.hpp"

struct pgm_config {
  pgm::RunConfig value;
};

struct pgm_dataset {
  pgm::SynthDataset value;
};

struct pgm_model {
  pgm::RunConfig config;
  std::unique_ptr<pgm::PgmModel> model;
};

namespace {

thread_local std::string g_last_error;

pgm_status set_error(pgm_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
pgm_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return PGM_OK;
  } catch (const pgm::Error& e) {
    return set_error(static_cast<pgm_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(PGM_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return set_error(PGM_INTERNAL_ERROR, e.what());
  } catch (...) {
    return set_error(PGM_INTERNAL_ERROR, "unknown exception");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) pgm::fail(pgm::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

pgm::RunConfig with_data(const pgm::RunConfig& base, const pgm::SynthDataset& data) {
  pgm::RunConfig rc = base;
  rc.synth = data.config;
  return rc;
}

pgm::EpochCallback forward_rows(pgm_epoch_fn fn, void* user) {
  if (fn == nullptr) return {};
  return [fn, user](const pgm::LossReport& r) { fn(pgm::loss_report_csv_row(r).c_str(), user); };
}

void check_compatible(const pgm::RunConfig& current, const pgm::RunConfig& next) {
  static const char* arch[] = {"n_iters", "no_partitioner", "no_uni_learner", "no_paired_learner",
                               "no_decoder", "task", "learner_depth", "heads", "fusion", "seed"};
  for (const char* k : arch) {
    if (current.get(k) != next.get(k)) {
      pgm::fail(pgm::ErrorCode::kConfig, std::string("key '") + k + "' differs from the checkpoint (" +
                                             current.get(k) + " vs " + next.get(k) + ")");
    }
  }
}

}  // namespace

extern "C" {

const char* pgm_version(void) { return "0.1.0"; }

const char* pgm_status_name(pgm_status status) {
  if (status == PGM_OK) return "ok";
  if (status < PGM_INVALID_ARGUMENT || status > PGM_INTERNAL_ERROR) return "internal_error";
  return pgm::error_class_name(static_cast<pgm::ErrorCode>(status));
}

const char* pgm_last_error(void) { return g_last_error.c_str(); }

void pgm_string_free(char* s) { std::free(s); }

pgm_status pgm_config_create(pgm_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new pgm_config();
  });
}

void pgm_config_destroy(pgm_config* config) { delete config; }

pgm_status pgm_config_set(pgm_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    config->value.set(key, value);
  });
}

pgm_status pgm_config_get(const pgm_config* config, const char* key, char** out) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(out, "out");
    emit(out, config->value.get(key));
  });
}

pgm_status pgm_config_load_file(pgm_config* config, const char* path) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    config->value.load_file(path);
  });
}

pgm_status pgm_config_load_text(pgm_config* config, const char* text) {
  return guarded([&] {
    need(config, "config");
    need(text, "text");
    config->value.load_text(text);
  });
}

pgm_status pgm_config_to_text(const pgm_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    emit(out, config->value.to_text());
  });
}

pgm_status pgm_config_hash(const pgm_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    emit(out, config->value.hash());
  });
}

size_t pgm_config_key_count(void) { return pgm::RunConfig::keys().size(); }

const char* pgm_config_key_name(size_t index) {
  const auto& keys = pgm::RunConfig::keys();
  return index < keys.size() ? keys[index].key : nullptr;
}

const char* pgm_config_key_doc(size_t index) {
  const auto& keys = pgm::RunConfig::keys();
  return index < keys.size() ? keys[index].doc : nullptr;
}

pgm_status pgm_dataset_generate(const pgm_config* config, pgm_dataset** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    config->value.validate();
    auto d = std::make_unique<pgm_dataset>();
    d->value = pgm::generate(config->value.synth);
    *out = d.release();
  });
}

pgm_status pgm_dataset_save(const pgm_dataset* data, const char* path) {
  return guarded([&] {
    need(data, "dataset");
    need(path, "path");
    pgm::save_dataset(data->value, path);
  });
}

pgm_status pgm_dataset_load(const char* path, pgm_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto d = std::make_unique<pgm_dataset>();
    d->value = pgm::load_dataset(path);
    *out = d.release();
  });
}

void pgm_dataset_destroy(pgm_dataset* data) { delete data; }

pgm_status pgm_dataset_split_size(const pgm_dataset* data, const char* split, size_t* out) {
  return guarded([&] {
    need(data, "dataset");
    need(split, "split");
    need(out, "out");
    *out = data->value.split(split).count;
  });
}

pgm_status pgm_dataset_apply_config(const pgm_dataset* data, pgm_config* config) {
  return guarded([&] {
    need(data, "dataset");
    need(config, "config");
    config->value.synth = data->value.config;
  });
}

pgm_status pgm_dataset_oracle(const pgm_dataset* data, size_t n_mc, double* accuracy, double* std_error) {
  return guarded([&] {
    need(data, "dataset");
    const pgm::OracleEstimate o = pgm::bayes_oracle(data->value.config, n_mc);
    if (accuracy != nullptr) *accuracy = o.accuracy;
    if (std_error != nullptr) *std_error = o.std_error;
  });
}

pgm_status pgm_model_create(const pgm_config* config, const pgm_dataset* data, pgm_model** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    auto m = std::make_unique<pgm_model>();
    m->config = data != nullptr ? with_data(config->value, data->value) : config->value;
    m->config.validate();
    m->model = std::make_unique<pgm::PgmModel>(m->config.train, pgm::dims_from(m->config.synth));
    *out = m.release();
  });
}

void pgm_model_destroy(pgm_model* model) { delete model; }

pgm_status pgm_model_load(const char* path, pgm_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    pgm::Checkpoint ck = pgm::load_checkpoint(path);
    auto m = std::make_unique<pgm_model>();
    m->config = ck.config;
    m->model = std::move(ck.model);
    *out = m.release();
  });
}

pgm_status pgm_model_save(const pgm_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    pgm::save_checkpoint(*model->model, model->config, path);
  });
}

pgm_status pgm_model_update_config(pgm_model* model, const pgm_config* config) {
  return guarded([&] {
    need(model, "model");
    need(config, "config");
    pgm::RunConfig next = config->value;
    next.synth = model->config.synth;
    next.validate();
    check_compatible(model->config, next);
    model->config = next;
    model->model->mutable_config() = next.train;
  });
}

pgm_status pgm_model_config(const pgm_model* model, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    emit(out, model->config.to_text());
  });
}

namespace {

void check_data_matches(const pgm_model* model, const pgm_dataset* data) {
  const pgm::RunConfig& rc = model->config;
  const pgm::SynthConfig& sc = data->value.config;
  if (sc.n_modalities != rc.synth.n_modalities || sc.dim != rc.synth.dim || sc.seq_len != rc.synth.seq_len) {
    pgm::fail(pgm::ErrorCode::kShapeMismatch, "dataset dimensions do not match the model");
  }
}

}  // namespace

pgm_status pgm_model_pretrain(pgm_model* model, const pgm_dataset* data, const char* curve_path,
                              pgm_epoch_fn on_epoch, void* user) {
  return guarded([&] {
    need(model, "model");
    need(data, "dataset");
    check_data_matches(model, data);
    const auto rows = pgm::pretrain(*model->model, data->value, forward_rows(on_epoch, user));
    if (curve_path != nullptr) pgm::write_loss_curve(rows, curve_path);
  });
}

pgm_status pgm_model_train(pgm_model* model, const pgm_dataset* data, const char* curve_path,
                           pgm_epoch_fn on_epoch, void* user) {
  return guarded([&] {
    need(model, "model");
    need(data, "dataset");
    check_data_matches(model, data);
    const auto rows = pgm::train_joint(*model->model, data->value, forward_rows(on_epoch, user));
    if (curve_path != nullptr) pgm::write_loss_curve(rows, curve_path);
  });
}

pgm_status pgm_model_evaluate(const pgm_model* model, const pgm_dataset* data, const char* split,
                              char** metrics_json, char** partition_csv) {
  return guarded([&] {
    need(model, "model");
    need(data, "dataset");
    need(split, "split");
    check_data_matches(model, data);
    const pgm::MetricsReport r =
        pgm::evaluate(*model->model, data->value.split(split), split, model->config);
    emit(metrics_json, pgm::metrics_json(r));
    emit(partition_csv, pgm::partition_table_csv(r.partition_table));
  });
}

pgm_status pgm_model_param_report(const pgm_model* model, char** out_csv) {
  return guarded([&] {
    need(model, "model");
    need(out_csv, "out");
    emit(out_csv, pgm::param_report_csv(model->model->param_report()));
  });
}

pgm_status pgm_benchmark(const pgm_config* config, const pgm_dataset* data, const char* methods,
                         size_t oracle_samples, char** grid_csv, char** cells_csv, pgm_epoch_fn on_cell,
                         void* user) {
  return guarded([&] {
    need(config, "config");
    need(data, "dataset");
    const pgm::RunConfig rc = with_data(config->value, data->value);
    rc.validate();
    std::vector<std::string> list;
    if (methods == nullptr || *methods == '\0') {
      list = pgm::default_methods(rc.synth.n_modalities);
    } else {
      std::stringstream ss(methods);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) list.push_back(item);
      }
    }
    pgm::CellCallback cb;
    if (on_cell != nullptr) {
      cb = [on_cell, user](const pgm::BenchmarkCell& c) {
        pgm::BenchmarkTable one;
        one.cells.push_back(c);
        std::string row = one.cells_csv();
        row = row.substr(row.find('\n') + 1);
        if (!row.empty() && row.back() == '\n') row.pop_back();
        on_cell(row.c_str(), user);
      };
    }
    const pgm::BenchmarkTable t = pgm::run_benchmark(rc, data->value, list, oracle_samples, cb);
    emit(grid_csv, t.csv());
    emit(cells_csv, t.cells_csv());
  });
}

pgm_status pgm_gradcheck(unsigned long long seed, double eps, size_t stride, char** report_csv,
                         double* max_error) {
  return guarded([&] {
    auto entries = pgm::gradcheck_primitives(seed, eps);
    const auto e2e = pgm::gradcheck_end_to_end(seed, eps, stride);
    entries.insert(entries.end(), e2e.begin(), e2e.end());
    double worst = 0.0;
    for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
    if (max_error != nullptr) *max_error = worst;
    emit(report_csv, pgm::gradcheck_csv(entries));
  });
}

}  // extern "C"
