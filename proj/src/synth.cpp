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

#include "pgm/synth.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "pgm/error.hpp"
#include "pgm/rng.hpp"

namespace pgm {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'M', 'S', 'Y', 'N', '\0', '\x01'};
constexpr std::uint32_t kFormatVersion = 1;

enum Stream : std::uint64_t {
  kStreamDirections = 1,
  kStreamMixing = 2,
  kStreamTrain = 10,
  kStreamVal = 11,
  kStreamTest = 12,
  kStreamOracle = 20,
};

// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
Tensor random_rotation(std::size_t d, Rng& rng) {
  std::vector<std::vector<double>> cols;
  while (cols.size() < d) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    for (const auto& c : cols) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += v[i] * c[i];
      for (std::size_t i = 0; i < d; ++i) v[i] -= dot * c[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    cols.push_back(std::move(v));
  }
  Tensor m(Shape{d, d});
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) m[r * d + c] = cols[c][r];
  return m;
}

struct Fixed {
  std::vector<Tensor> directions;
  std::vector<Tensor> mixing;
};

Fixed fixed_structure(const SynthConfig& cfg) {
  Fixed f;
  Rng dir_rng = Rng::stream(cfg.seed, kStreamDirections);
  for (std::size_t m = 0; m < cfg.n_modalities; ++m) {
    Tensor w(Shape{cfg.d_uni});
    double norm = 0.0;
    while (norm < 1e-6) {
      norm = 0.0;
      for (double& x : w.data()) {
        x = dir_rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
    }
    for (double& x : w.data()) x /= norm;
    f.directions.push_back(std::move(w));
  }
  if (cfg.entangle) {
    Rng mix_rng = Rng::stream(cfg.seed, kStreamMixing);
    for (std::size_t m = 0; m < cfg.n_modalities; ++m) {
      f.mixing.push_back(random_rotation(cfg.dim, mix_rng));
    }
  }
  return f;
}

// Draws latents and the noisy observation of one sample into the given buffers.
void draw_sample(const SynthConfig& cfg, const Fixed& fixed, Rng& rng, double* latent,
                 std::vector<double>& observed) {
  const std::size_t n_mod = cfg.n_modalities, d = cfg.dim, s = cfg.seq_len;
  for (std::size_t i = 0; i < n_mod * d; ++i) latent[i] = rng.normal();
  observed.assign(n_mod * s * d, 0.0);
  std::vector<double> row(d);
  for (std::size_t m = 0; m < n_mod; ++m) {
    for (std::size_t p = 0; p < s; ++p) {
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = latent[m * d + j] + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0);
      }
      double* out = observed.data() + (m * s + p) * d;
      if (cfg.entangle) {
        const Tensor& mix = fixed.mixing[m];
        for (std::size_t c = 0; c < d; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += row[j] * mix[j * d + c];
          out[c] = acc;
        }
      } else {
        for (std::size_t j = 0; j < d; ++j) out[j] = row[j];
      }
    }
  }
}

SynthSplit make_split(const SynthConfig& cfg, const Fixed& fixed, std::size_t count,
                      std::uint64_t stream) {
  const std::size_t n_mod = cfg.n_modalities, d = cfg.dim, s = cfg.seq_len;
  SynthSplit split;
  split.count = count;
  for (std::size_t m = 0; m < n_mod; ++m) split.inputs.emplace_back(Shape{count, s, d});
  split.labels.resize(count);
  split.scores.resize(count);
  split.latents = Tensor(Shape{count, n_mod, d});
  std::vector<double> observed;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::stream(cfg.seed, stream, i);
    double* latent = split.latents.data().data() + i * n_mod * d;
    draw_sample(cfg, fixed, rng, latent, observed);
    for (std::size_t m = 0; m < n_mod; ++m) {
      std::memcpy(split.inputs[m].data().data() + i * s * d, observed.data() + m * s * d,
                  s * d * sizeof(double));
    }
    split.scores[i] = generative_score(cfg, fixed.directions, {latent, n_mod * d});
    split.labels[i] = split.scores[i] > 0.0 ? 1 : 0;
  }
  return split;
}

}  // namespace

const SynthSplit& SynthDataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  fail(ErrorCode::kInvalidArgument, "unknown split '" + name + "' (train|val|test)");
}

double generative_score(const SynthConfig& cfg, const std::vector<Tensor>& directions,
                        std::span<const double> latent) {
  const std::size_t d = cfg.dim;
  double uni = 0.0;
  for (std::size_t m = 0; m < cfg.n_modalities; ++m) {
    for (std::size_t j = 0; j < cfg.d_uni; ++j) uni += directions[m][j] * latent[m * d + j];
  }
  double paired = 0.0;
  for (std::size_t j = cfg.d_uni; j < d; ++j) {
    double prod = 1.0;
    for (std::size_t m = 0; m < cfg.n_modalities; ++m) prod *= latent[m * d + j];
    paired += prod;
  }
  return cfg.beta_uni * uni + cfg.beta_paired * paired;
}

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  SynthDataset data;
  data.config = config;
  Fixed fixed = fixed_structure(config);
  data.train = make_split(config, fixed, config.n_train, kStreamTrain);
  data.val = make_split(config, fixed, config.n_val, kStreamVal);
  data.test = make_split(config, fixed, config.n_test, kStreamTest);
  data.directions = std::move(fixed.directions);
  data.mixing = std::move(fixed.mixing);
  return data;
}

OracleEstimate bayes_oracle(const SynthConfig& config, std::size_t n_mc) {
  config.validate();
  if (n_mc < 10000) fail(ErrorCode::kInvalidArgument, "bayes_oracle needs n_mc >= 10000");
  const Fixed fixed = fixed_structure(config);
  const std::size_t n_mod = config.n_modalities, d = config.dim, s = config.seq_len;
  std::vector<double> latent(n_mod * d), estimate(n_mod * d), observed;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    Rng rng = Rng::stream(config.seed, kStreamOracle, i);
    draw_sample(config, fixed, rng, latent.data(), observed);
    for (std::size_t m = 0; m < n_mod; ++m) {
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < s; ++p) {
          const double* row = observed.data() + (m * s + p) * d;
          if (config.entangle) {
            // Rotation inverse is its transpose.
            const Tensor& mix = fixed.mixing[m];
            double v = 0.0;
            for (std::size_t c = 0; c < d; ++c) v += row[c] * mix[j * d + c];
            acc += v;
          } else {
            acc += row[j];
          }
        }
        estimate[m * d + j] = acc / static_cast<double>(s);
      }
    }
    const bool truth = generative_score(config, fixed.directions, latent) > 0.0;
    const bool guess = generative_score(config, fixed.directions, estimate) > 0.0;
    correct += truth == guess;
  }
  OracleEstimate est;
  est.accuracy = static_cast<double>(correct) / static_cast<double>(n_mc);
  est.std_error = std::sqrt(est.accuracy * (1.0 - est.accuracy) / static_cast<double>(n_mc));
  return est;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorCode::kFormat, "dataset file truncated");
  return v;
}

void put_doubles(std::ofstream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

void take_doubles(std::ifstream& in, std::span<double> v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  if (!in) fail(ErrorCode::kFormat, "dataset file truncated");
}

std::string synth_config_text(const SynthConfig& c) {
  RunConfig rc;
  rc.synth = c;
  std::string out;
  for (const char* key : {"n_modalities", "dim", "seq_len", "d_uni", "d_paired", "beta_uni",
                          "beta_paired", "noise_sigma", "n_train", "n_val", "n_test", "data_seed",
                          "entangle"}) {
    out += std::string(key) + " = " + rc.get(key) + "\n";
  }
  return out;
}

}  // namespace

void save_dataset(const SynthDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write dataset file '" + path + "'");
  const SynthConfig& c = data.config;
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kFormatVersion);
  const std::string text = synth_config_text(c);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, c.n_modalities);
  put<std::uint64_t>(out, c.seq_len);
  put<std::uint64_t>(out, c.dim);
  put<std::uint64_t>(out, c.d_uni);
  for (const Tensor& w : data.directions) put_doubles(out, w.data());
  put<std::uint8_t>(out, c.entangle ? 1 : 0);
  for (const Tensor& m : data.mixing) put_doubles(out, m.data());
  for (const SynthSplit* s : {&data.train, &data.val, &data.test}) {
    put<std::uint64_t>(out, s->count);
    for (const Tensor& x : s->inputs) put_doubles(out, x.data());
    for (int y : s->labels) put<std::int32_t>(out, y);
    put_doubles(out, s->scores);
    put_doubles(out, s->latents.data());
  }
  if (!out) fail(ErrorCode::kIo, "failed writing dataset file '" + path + "'");
}

SynthDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open dataset file '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    fail(ErrorCode::kFormat, "'" + path + "' is not a PgM dataset file");
  }
  const auto version = take<std::uint32_t>(in);
  if (version != kFormatVersion) {
    fail(ErrorCode::kFormat, "unsupported dataset format version " + std::to_string(version));
  }
  const auto text_len = take<std::uint32_t>(in);
  std::string text(text_len, '\0');
  in.read(text.data(), text_len);
  if (!in) fail(ErrorCode::kFormat, "dataset file truncated");
  RunConfig rc;
  rc.load_text(text);
  SynthDataset data;
  data.config = rc.synth;
  data.config.validate();
  const SynthConfig& c = data.config;
  const auto n_mod = take<std::uint64_t>(in);
  const auto s = take<std::uint64_t>(in);
  const auto d = take<std::uint64_t>(in);
  const auto d_uni = take<std::uint64_t>(in);
  if (n_mod != c.n_modalities || s != c.seq_len || d != c.dim || d_uni != c.d_uni) {
    fail(ErrorCode::kFormat, "dataset header disagrees with its config echo");
  }
  for (std::size_t m = 0; m < n_mod; ++m) {
    Tensor w(Shape{d_uni});
    take_doubles(in, w.data());
    data.directions.push_back(std::move(w));
  }
  const bool entangled = take<std::uint8_t>(in) != 0;
  if (entangled != c.entangle) fail(ErrorCode::kFormat, "dataset entangle flag mismatch");
  if (entangled) {
    for (std::size_t m = 0; m < n_mod; ++m) {
      Tensor mix(Shape{d, d});
      take_doubles(in, mix.data());
      data.mixing.push_back(std::move(mix));
    }
  }
  for (SynthSplit* sp : {&data.train, &data.val, &data.test}) {
    sp->count = take<std::uint64_t>(in);
    for (std::size_t m = 0; m < n_mod; ++m) {
      Tensor x(Shape{sp->count, s, d});
      take_doubles(in, x.data());
      sp->inputs.push_back(std::move(x));
    }
    sp->labels.resize(sp->count);
    for (int& y : sp->labels) y = take<std::int32_t>(in);
    sp->scores.resize(sp->count);
    take_doubles(in, sp->scores);
    sp->latents = Tensor(Shape{sp->count, n_mod, d});
    take_doubles(in, sp->latents.data());
  }
  return data;
}

Batch make_batch(const SynthSplit& split, std::span<const std::size_t> indices) {
  Batch b;
  const std::size_t n = indices.size();
  for (const Tensor& x : split.inputs) {
    const std::size_t s = x.shape()[1], d = x.shape()[2];
    Tensor t(Shape{n, s, d});
    for (std::size_t i = 0; i < n; ++i) {
      if (indices[i] >= split.count) fail(ErrorCode::kInvalidArgument, "batch index out of range");
      std::memcpy(t.data().data() + i * s * d, x.data().data() + indices[i] * s * d,
                  s * d * sizeof(double));
    }
    b.inputs.push_back(std::move(t));
  }
  for (std::size_t i : indices) {
    b.labels.push_back(split.labels[i]);
    b.targets.push_back(split.scores[i]);
  }
  return b;
}

std::vector<Tensor> pooled_inputs(const SynthSplit& split) {
  std::vector<Tensor> out;
  for (const Tensor& x : split.inputs) {
    const std::size_t n = x.shape()[0], s = x.shape()[1], d = x.shape()[2];
    Tensor p(Shape{n, d});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < s; ++t)
        for (std::size_t j = 0; j < d; ++j) p[i * d + j] += x[(i * s + t) * d + j];
      for (std::size_t j = 0; j < d; ++j) p[i * d + j] /= static_cast<double>(s);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace pgm
