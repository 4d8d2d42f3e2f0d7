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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pgm/error.hpp"
#include "pgm/synth.hpp"

namespace pgm {
namespace {

SynthConfig small(std::size_t n_train = 200) {
  SynthConfig c;
  c.n_train = n_train;
  c.n_val = 50;
  c.n_test = 50;
  return c;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Label rule written out independently of the generator.
int label_from_latent(const SynthConfig& c, const std::vector<Tensor>& w, const Tensor& lat, std::size_t i) {
  const std::size_t base = i * c.n_modalities * c.dim;
  double score = 0.0;
  for (std::size_t m = 0; m < c.n_modalities; ++m)
    for (std::size_t j = 0; j < c.d_uni; ++j) score += c.beta_uni * w[m][j] * lat[base + m * c.dim + j];
  for (std::size_t j = c.d_uni; j < c.dim; ++j) {
    double prod = c.beta_paired;
    for (std::size_t m = 0; m < c.n_modalities; ++m) prod *= lat[base + m * c.dim + j];
    score += prod;
  }
  return score > 0.0 ? 1 : 0;
}

TEST(Synth, ShapesAndLabelsFollowTheLatents) {
  const SynthConfig c = small();
  const SynthDataset d = generate(c);
  ASSERT_EQ(d.train.inputs.size(), 2u);
  EXPECT_EQ(d.train.inputs[0].shape(), (Shape{200, 8, 16}));
  EXPECT_EQ(d.test.count, 50u);
  for (std::size_t i = 0; i < d.train.count; ++i) {
    EXPECT_EQ(d.train.labels[i], label_from_latent(c, d.directions, d.train.latents, i));
  }
  for (const Tensor& w : d.directions) {
    double n = 0.0;
    for (double v : w.data()) n += v * v;
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
}

TEST(Synth, NoiselessRowsRepeatTheLatent) {
  SynthConfig c = small(20);
  c.noise_sigma = 0.0;
  const SynthDataset d = generate(c);
  for (std::size_t m = 0; m < 2; ++m) {
    const Tensor& x = d.train.inputs[m];
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t s = 0; s < 8; ++s)
        for (std::size_t j = 0; j < 16; ++j)
          EXPECT_EQ(x[(i * 8 + s) * 16 + j], d.train.latents[(i * 2 + m) * 16 + j]);
  }
}

TEST(Synth, ClassesAreBalanced) {
  SynthConfig c = small(10000);
  const SynthDataset d = generate(c);
  double pos = 0.0;
  for (int y : d.train.labels) pos += y;
  EXPECT_GT(pos / 10000.0, 0.48);
  EXPECT_LT(pos / 10000.0, 0.52);
}

TEST(Synth, WithoutUniTermOneModalityIsAtChance) {
  SynthConfig c = small(10000);
  c.beta_uni = 0.0;
  const SynthDataset d = generate(c);
  // Best guess from modality A alone when the label only depends on cross products.
  for (std::size_t m = 0; m < 2; ++m) {
    std::size_t agree = 0;
    for (std::size_t i = 0; i < d.train.count; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c.d_uni; ++j) s += d.directions[m][j] * d.train.latents[(i * 2 + m) * 16 + j];
      agree += (s > 0.0 ? 1 : 0) == d.train.labels[i];
    }
    EXPECT_NEAR(static_cast<double>(agree) / 10000.0, 0.5, 0.02);
  }
}

TEST(Synth, SameSeedSameBytesOtherSeedDiffers) {
  const SynthDataset a = generate(small());
  const SynthDataset b = generate(small());
  EXPECT_EQ(a.train.inputs[1], b.train.inputs[1]);
  EXPECT_EQ(a.test.labels, b.test.labels);
  SynthConfig c = small();
  c.seed = 8;
  EXPECT_NE(generate(c).train.inputs[0], a.train.inputs[0]);
}

TEST(Synth, EntangledInputsAreRotations) {
  SynthConfig c = small(10);
  c.entangle = true;
  c.noise_sigma = 0.0;
  const SynthDataset d = generate(c);
  ASSERT_EQ(d.mixing.size(), 2u);
  const Tensor& q = d.mixing[0];
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 16; ++k) dot += q[k * 16 + a] * q[k * 16 + b];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
    }
  // Rotation keeps the norm of each row.
  double n_in = 0.0, n_out = 0.0;
  for (std::size_t j = 0; j < 16; ++j) {
    n_in += d.train.latents[j] * d.train.latents[j];
    n_out += d.train.inputs[0][j] * d.train.inputs[0][j];
  }
  EXPECT_NEAR(n_in, n_out, 1e-10);
}

TEST(Synth, SaveLoadRoundTrip) {
  SynthConfig c = small(30);
  c.entangle = true;
  const SynthDataset d = generate(c);
  const std::string path = temp_path("pgm_synth_roundtrip.bin");
  save_dataset(d, path);
  const SynthDataset e = load_dataset(path);
  EXPECT_EQ(e.train.inputs[0], d.train.inputs[0]);
  EXPECT_EQ(e.val.labels, d.val.labels);
  EXPECT_EQ(e.test.scores, d.test.scores);
  EXPECT_EQ(e.mixing[1], d.mixing[1]);
  EXPECT_EQ(e.config.seed, c.seed);
  std::filesystem::remove(path);
}

TEST(Synth, LoadRejectsForeignAndTruncatedFiles) {
  const std::string path = temp_path("pgm_synth_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTADATASETFILE";
  }
  try {
    load_dataset(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
  save_dataset(generate(small(10)), path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
  EXPECT_THROW(load_dataset(path), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(load_dataset(path), Error);
}

TEST(Oracle, NoiselessIsPerfect) {
  SynthConfig c = small();
  c.noise_sigma = 0.0;
  EXPECT_EQ(bayes_oracle(c, 10000).accuracy, 1.0);
  EXPECT_THROW(bayes_oracle(c, 100), Error);
}

TEST(Oracle, AgreesWithAnIndependentPlugInEstimate) {
  SynthConfig c = small(20000);
  const SynthDataset d = generate(c);
  // Plug the per-modality sequence mean into the label rule.
  std::size_t correct_all = 0, correct_a = 0;
  Tensor est(Shape{d.train.count, 2, 16});
  for (std::size_t i = 0; i < d.train.count; ++i) {
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t j = 0; j < 16; ++j) {
        double acc = 0.0;
        for (std::size_t s = 0; s < 8; ++s) acc += d.train.inputs[m][(i * 8 + s) * 16 + j];
        est[(i * 2 + m) * 16 + j] = acc / 8.0;
      }
    correct_all += label_from_latent(c, d.directions, est, i) == d.train.labels[i];
    double a = 0.0;
    for (std::size_t j = 0; j < c.d_uni; ++j) a += d.directions[0][j] * est[i * 32 + j];
    correct_a += (a > 0.0 ? 1 : 0) == d.train.labels[i];
  }
  const double plug_in = correct_all / 20000.0;
  const OracleEstimate o = bayes_oracle(c, 20000);
  const double se = std::sqrt(o.std_error * o.std_error + plug_in * (1 - plug_in) / 20000.0);
  EXPECT_NEAR(o.accuracy, plug_in, 4.0 * se);
  EXPECT_GT(o.accuracy, correct_a / 20000.0 + 0.1);
}

TEST(Batches, GatherRowsAndPool) {
  const SynthDataset d = generate(small(10));
  const std::vector<std::size_t> idx{3, 0};
  const Batch b = make_batch(d.train, idx);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(b.labels[0], d.train.labels[3]);
  EXPECT_EQ(b.inputs[1][5], d.train.inputs[1][3 * 128 + 5]);
  const std::vector<std::size_t> bad{10};
  EXPECT_THROW(make_batch(d.train, bad), Error);
  const std::vector<Tensor> p = pooled_inputs(d.train);
  double acc = 0.0;
  for (std::size_t s = 0; s < 8; ++s) acc += d.train.inputs[0][(2 * 8 + s) * 16 + 4];
  EXPECT_NEAR(p[0][2 * 16 + 4], acc / 8.0, 1e-15);
}

TEST(Synth, ConfigValidation) {
  SynthConfig c = small();
  c.d_uni = 10;
  EXPECT_THROW(generate(c), Error);
  c = small();
  c.n_modalities = 1;
  EXPECT_THROW(generate(c), Error);
}

}  // namespace
}  // namespace pgm
