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

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "pgm/pgm.h"

static int failures = 0;

#define CHECK(cond)                                               \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: check failed: %s (%s)\n", __FILE__, \
              __LINE__, #cond, pgm_last_error());                 \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static void count_rows(const char* row, void* user) {
  (void)row;
  ++*(int*)user;
}

static pgm_config* tiny_config(void) {
  pgm_config* c = NULL;
  CHECK(pgm_config_create(&c) == PGM_OK);
  CHECK(pgm_config_load_text(c,
                             "dim = 8\nd_uni = 4\nd_paired = 4\nseq_len = 4\n"
                             "n_train = 48\nn_val = 16\nn_test = 16\nheads = 2\n"
                             "learner_depth = 1\npretrain_epochs = 1\njoint_epochs = 2\n"
                             "batch_size = 16\n") == PGM_OK);
  return c;
}

static void test_config(void) {
  pgm_config* c = tiny_config();
  char* v = NULL;
  CHECK(pgm_config_get(c, "dim", &v) == PGM_OK && strcmp(v, "8") == 0);
  pgm_string_free(v);
  CHECK(pgm_config_set(c, "dim", "abc") == PGM_CONFIG_ERROR);
  CHECK(strstr(pgm_last_error(), "dim") != NULL);
  CHECK(pgm_config_set(c, "no_such_key", "1") == PGM_CONFIG_ERROR);
  CHECK(pgm_config_set(NULL, "dim", "8") == PGM_INVALID_ARGUMENT);
  CHECK(pgm_config_key_count() > 30);
  CHECK(strcmp(pgm_config_key_name(0), "n_modalities") == 0);
  CHECK(pgm_config_key_name(100000) == NULL);
  CHECK(strcmp(pgm_status_name(PGM_FORMAT_ERROR), "format_error") == 0);
  char* h = NULL;
  CHECK(pgm_config_hash(c, &h) == PGM_OK && strlen(h) == 16);
  pgm_string_free(h);
  pgm_config_destroy(c);
}

static void test_pipeline(void) {
  pgm_config* c = tiny_config();
  pgm_dataset* d = NULL;
  size_t n = 0;
  CHECK(pgm_dataset_generate(c, &d) == PGM_OK);
  CHECK(pgm_dataset_split_size(d, "train", &n) == PGM_OK && n == 48);
  CHECK(pgm_dataset_split_size(d, "dev", &n) == PGM_INVALID_ARGUMENT);

  const char* data_path = "capi_test_data.bin";
  CHECK(pgm_dataset_save(d, data_path) == PGM_OK);
  pgm_dataset* d2 = NULL;
  CHECK(pgm_dataset_load(data_path, &d2) == PGM_OK);
  CHECK(pgm_dataset_load("/nonexistent/file.bin", &d2) == PGM_IO_ERROR);
  remove(data_path);

  pgm_model* m = NULL;
  int rows = 0;
  CHECK(pgm_model_create(c, d2, &m) == PGM_OK);
  CHECK(pgm_model_pretrain(m, d2, NULL, count_rows, &rows) == PGM_OK);
  CHECK(pgm_model_train(m, d2, NULL, count_rows, &rows) == PGM_OK);
  CHECK(rows == 3);

  char* metrics = NULL;
  char* table = NULL;
  CHECK(pgm_model_evaluate(m, d2, "test", &metrics, &table) == PGM_OK);
  CHECK(metrics != NULL && strstr(metrics, "\"accuracy\"") != NULL);
  CHECK(table != NULL && strncmp(table, "modality,percent_uni", 20) == 0);

  const char* ckpt = "capi_test_model.ckpt";
  CHECK(pgm_model_save(m, ckpt) == PGM_OK);
  pgm_model* m2 = NULL;
  CHECK(pgm_model_load(ckpt, &m2) == PGM_OK);
  char* metrics2 = NULL;
  CHECK(pgm_model_evaluate(m2, d2, "test", &metrics2, NULL) == PGM_OK);
  CHECK(metrics2 != NULL && metrics != NULL && strcmp(metrics, metrics2) == 0);
  remove(ckpt);

  pgm_config* arch = tiny_config();
  CHECK(pgm_config_set(arch, "n_iters", "5") == PGM_OK);
  CHECK(pgm_model_update_config(m2, arch) == PGM_CONFIG_ERROR);
  pgm_config_destroy(arch);

  char* params = NULL;
  CHECK(pgm_model_param_report(m, &params) == PGM_OK);
  CHECK(params != NULL && strstr(params, "modal_encoder,0\n") != NULL);

  pgm_config* other = tiny_config();
  CHECK(pgm_config_set(other, "dim", "12") == PGM_OK);
  CHECK(pgm_config_set(other, "d_uni", "6") == PGM_OK);
  CHECK(pgm_config_set(other, "d_paired", "6") == PGM_OK);
  pgm_dataset* wide = NULL;
  CHECK(pgm_dataset_generate(other, &wide) == PGM_OK);
  CHECK(pgm_model_evaluate(m, wide, "test", NULL, NULL) != PGM_OK);
  pgm_dataset_destroy(wide);
  pgm_config_destroy(other);

  pgm_string_free(metrics);
  pgm_string_free(metrics2);
  pgm_string_free(table);
  pgm_string_free(params);
  pgm_model_destroy(m);
  pgm_model_destroy(m2);
  pgm_dataset_destroy(d);
  pgm_dataset_destroy(d2);
  pgm_config_destroy(c);
}

static void test_benchmark(void) {
  pgm_config* c = tiny_config();
  CHECK(pgm_config_set(c, "bench_seeds", "2") == PGM_OK);
  pgm_dataset* d = NULL;
  CHECK(pgm_dataset_generate(c, &d) == PGM_OK);
  char* grid = NULL;
  int cells = 0;
  CHECK(pgm_benchmark(c, d, "uni:A,concat", 10000, &grid, NULL, count_rows, &cells) == PGM_OK);
  CHECK(cells == 4);
  CHECK(grid != NULL && strstr(grid, "bayes_oracle") != NULL);
  CHECK(pgm_benchmark(c, d, "stack", 10000, NULL, NULL, NULL, NULL) == PGM_INVALID_ARGUMENT);
  pgm_string_free(grid);
  pgm_dataset_destroy(d);
  pgm_config_destroy(c);
}

int main(void) {
  CHECK(pgm_version() != NULL);
  test_config();
  test_pipeline();
  test_benchmark();
  if (failures != 0) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
