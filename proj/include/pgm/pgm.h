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

#ifndef PGM_PGM_H_
#define PGM_PGM_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define PGM_API __attribute__((visibility("default")))
#else
#define PGM_API
#endif

/* Status codes. Nonzero values match the error classes printed by the CLI. */
typedef enum pgm_status {
  PGM_OK = 0,
  PGM_INVALID_ARGUMENT = 1,
  PGM_SHAPE_MISMATCH = 2,
  PGM_NON_FINITE = 3,
  PGM_BAD_STATE = 4,
  PGM_IO_ERROR = 5,
  PGM_FORMAT_ERROR = 6,
  PGM_CONFIG_ERROR = 7,
  PGM_INTERNAL_ERROR = 8
} pgm_status;

typedef struct pgm_config pgm_config;
typedef struct pgm_dataset pgm_dataset;
typedef struct pgm_model pgm_model;

/* Receives one loss-curve CSV row (no newline) per finished epoch. */
typedef void (*pgm_epoch_fn)(const char* csv_row, void* user);

PGM_API const char* pgm_version(void);
/* "invalid_argument", "shape_mismatch", ... ; "ok" for PGM_OK. */
PGM_API const char* pgm_status_name(pgm_status status);
/* Message of the last failed call on this thread; "" if none. */
PGM_API const char* pgm_last_error(void);
/* Releases strings returned through char** out-parameters. */
PGM_API void pgm_string_free(char* s);

/* Configuration: flat key/value pairs. */
PGM_API pgm_status pgm_config_create(pgm_config** out);
PGM_API void pgm_config_destroy(pgm_config* config);
PGM_API pgm_status pgm_config_set(pgm_config* config, const char* key, const char* value);
PGM_API pgm_status pgm_config_get(const pgm_config* config, const char* key, char** out);
/* "key = value" lines, '#' comments. Keys not mentioned keep their values. */
PGM_API pgm_status pgm_config_load_file(pgm_config* config, const char* path);
PGM_API pgm_status pgm_config_load_text(pgm_config* config, const char* text);
PGM_API pgm_status pgm_config_to_text(const pgm_config* config, char** out);
PGM_API pgm_status pgm_config_hash(const pgm_config* config, char** out);
PGM_API size_t pgm_config_key_count(void);
/* NULL when index is out of range. */
PGM_API const char* pgm_config_key_name(size_t index);
PGM_API const char* pgm_config_key_doc(size_t index);

/* Synthetic datasets. */
PGM_API pgm_status pgm_dataset_generate(const pgm_config* config, pgm_dataset** out);
PGM_API pgm_status pgm_dataset_save(const pgm_dataset* data, const char* path);
PGM_API pgm_status pgm_dataset_load(const char* path, pgm_dataset** out);
PGM_API void pgm_dataset_destroy(pgm_dataset* data);
/* split is "train", "val" or "test". */
PGM_API pgm_status pgm_dataset_split_size(const pgm_dataset* data, const char* split, size_t* out);
/* Copies the data-generation keys of the dataset into config. */
PGM_API pgm_status pgm_dataset_apply_config(const pgm_dataset* data, pgm_config* config);
/* Monte-Carlo Bayes accuracy of the dataset's generative rule. */
PGM_API pgm_status pgm_dataset_oracle(const pgm_dataset* data, size_t n_mc, double* accuracy,
                                      double* std_error);

/* Models. Dimensions come from the dataset (or from config when data is NULL);
   training keys from config. */
PGM_API pgm_status pgm_model_create(const pgm_config* config, const pgm_dataset* data, pgm_model** out);
PGM_API void pgm_model_destroy(pgm_model* model);
PGM_API pgm_status pgm_model_load(const char* path, pgm_model** out);
PGM_API pgm_status pgm_model_save(const pgm_model* model, const char* path);
/* Replaces the model's training keys (epochs, rates, ...) with those in config.
   Keys that change the architecture must match. */
PGM_API pgm_status pgm_model_update_config(pgm_model* model, const pgm_config* config);
PGM_API pgm_status pgm_model_config(const pgm_model* model, char** out);

/* curve_path may be NULL; on_epoch may be NULL. */
PGM_API pgm_status pgm_model_pretrain(pgm_model* model, const pgm_dataset* data, const char* curve_path,
                                      pgm_epoch_fn on_epoch, void* user);
PGM_API pgm_status pgm_model_train(pgm_model* model, const pgm_dataset* data, const char* curve_path,
                                   pgm_epoch_fn on_epoch, void* user);
/* metrics_json and partition_csv may each be NULL. */
PGM_API pgm_status pgm_model_evaluate(const pgm_model* model, const pgm_dataset* data, const char* split,
                                      char** metrics_json, char** partition_csv);
/* "module,parameters" CSV. */
PGM_API pgm_status pgm_model_param_report(const pgm_model* model, char** out_csv);

/* methods: comma-separated list, or NULL for the default set. Either output
   may be NULL. on_cell receives "method,seed,accuracy,weighted_f1" rows. */
PGM_API pgm_status pgm_benchmark(const pgm_config* config, const pgm_dataset* data, const char* methods,
                                 size_t oracle_samples, char** grid_csv, char** cells_csv,
                                 pgm_epoch_fn on_cell, void* user);

/* Finite-difference check of all primitives and the end-to-end losses.
   report_csv may be NULL. */
PGM_API pgm_status pgm_gradcheck(unsigned long long seed, double eps, size_t stride, char** report_csv,
                                 double* max_error);

#ifdef __cplusplus
}
#endif

#endif /* PGM_PGM_H_ */
