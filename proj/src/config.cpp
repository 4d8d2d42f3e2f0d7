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

#include "pgm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "pgm/error.hpp"

namespace pgm {

void SynthConfig::validate() const {
  if (n_modalities < 2 || n_modalities > 3) {
    fail(ErrorCode::kConfig, "n_modalities must be 2 or 3");
  }
  if (d_uni == 0 || d_paired == 0 || d_uni + d_paired != dim) {
    fail(ErrorCode::kConfig, "invalid widths: d_uni + d_paired must equal dim, both >= 1");
  }
  if (seq_len == 0 || n_train == 0 || n_val == 0 || n_test == 0) {
    fail(ErrorCode::kConfig, "seq_len and split sizes must be >= 1");
  }
  if (!(noise_sigma >= 0.0) || !(beta_uni >= 0.0) || !(beta_paired >= 0.0)) {
    fail(ErrorCode::kConfig, "noise_sigma, beta_uni and beta_paired must be >= 0");
  }
}

AblationFlags AblationFlags::effective() const {
  AblationFlags f = *this;
  if (f.no_partitioner) f.no_uni_learner = f.no_paired_learner = f.no_decoder = true;
  return f;
}

void TrainConfig::validate() const {
  if (n_iters < 1) fail(ErrorCode::kConfig, "n_iters must be >= 1");
  if (pretrain_epochs < 0 || joint_epochs < 0) fail(ErrorCode::kConfig, "epochs must be >= 0");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) fail(ErrorCode::kConfig, "alpha and beta must be >= 0");
  if (!(lr_overall > 0.0) || !(lr_learners > 0.0) || !(lr_decoder > 0.0)) {
    fail(ErrorCode::kConfig, "learning rates must be > 0");
  }
  if (batch_size == 0) fail(ErrorCode::kConfig, "batch_size must be >= 1");
  if (!(theta > 0.0 && theta < 1.0)) fail(ErrorCode::kConfig, "theta must lie in (0, 1)");
  if (learner_depth == 0 || heads == 0) fail(ErrorCode::kConfig, "learner_depth and heads must be >= 1");
  if (bench_seeds == 0) fail(ErrorCode::kConfig, "bench_seeds must be >= 1");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T out{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    fail(ErrorCode::kConfig, "bad value '" + text + "' for key '" + key + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  // from_chars for double is missing in older toolchains; strtod is locale-free
  // enough for the "C" locale the tools run under.
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    fail(ErrorCode::kConfig, "bad value '" + text + "' for key '" + key + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(ErrorCode::kConfig, "bad boolean '" + text + "' for key '" + key + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

GateMode parse_gate_mode(const std::string& key, const std::string& text) {
  if (text == "soft") return GateMode::kSoft;
  if (text == "hard") return GateMode::kHard;
  if (text == "ste") return GateMode::kStraightThrough;
  fail(ErrorCode::kConfig, "bad gate mode '" + text + "' for key '" + key + "' (soft|hard|ste)");
}

const char* gate_mode_name(GateMode m) {
  switch (m) {
    case GateMode::kSoft: return "soft";
    case GateMode::kHard: return "hard";
    case GateMode::kStraightThrough: return "ste";
  }
  return "soft";
}

struct Field {
  RunConfig::KeyInfo info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PGM_SIZE_FIELD(KEY, MEMBER, DOC)                                                        Field {                                                                                         {KEY, DOC}, [](RunConfig& c, const std::string& v) {                                            c.MEMBER = parse_number<std::size_t>(KEY, v);                                               },                                                                                                [](const RunConfig& c) { return std::to_string(c.MEMBER); }                             }
#define PGM_INT_FIELD(KEY, MEMBER, DOC)                                                         Field {                                                                                         {KEY, DOC}, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_number<int>(KEY, v); },         [](const RunConfig& c) { return std::to_string(c.MEMBER); }                             }
#define PGM_U64_FIELD(KEY, MEMBER, DOC)                                                         Field {                                                                                         {KEY, DOC}, [](RunConfig& c, const std::string& v) {                                            c.MEMBER = parse_number<std::uint64_t>(KEY, v);                                             },                                                                                                [](const RunConfig& c) { return std::to_string(c.MEMBER); }                             }
#define PGM_DOUBLE_FIELD(KEY, MEMBER, DOC)                                                      Field {                                                                                         {KEY, DOC}, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); },          [](const RunConfig& c) { return fmt_double(c.MEMBER); }                                 }
#define PGM_BOOL_FIELD(KEY, MEMBER, DOC)                                                        Field {                                                                                         {KEY, DOC}, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); },            [](const RunConfig& c) { return fmt_bool(c.MEMBER); }                                   }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      // Synthetic data.
      PGM_SIZE_FIELD("n_modalities", synth.n_modalities, "number of modalities (2 or 3)"),
      PGM_SIZE_FIELD("dim", synth.dim, "feature width D of each modal representation"),
      PGM_SIZE_FIELD("seq_len", synth.seq_len, "sequence length S"),
      PGM_SIZE_FIELD("d_uni", synth.d_uni, "planted uni-modal block width"),
      PGM_SIZE_FIELD("d_paired", synth.d_paired, "planted paired-modal block width"),
      PGM_DOUBLE_FIELD("beta_uni", synth.beta_uni, "weight of the uni-modal label signal"),
      PGM_DOUBLE_FIELD("beta_paired", synth.beta_paired, "weight of the paired label signal"),
      PGM_DOUBLE_FIELD("noise_sigma", synth.noise_sigma, "per-position observation noise"),
      PGM_SIZE_FIELD("n_train", synth.n_train, "training samples"),
      PGM_SIZE_FIELD("n_val", synth.n_val, "validation samples"),
      PGM_SIZE_FIELD("n_test", synth.n_test, "test samples"),
      PGM_U64_FIELD("data_seed", synth.seed, "dataset seed"),
      PGM_BOOL_FIELD("entangle", synth.entangle, "mix channels with a fixed random rotation"),
      // Training.
      PGM_INT_FIELD("n_iters", train.n_iters, "partitioner iterations N"),
      PGM_DOUBLE_FIELD("alpha", train.alpha, "weight of the pretraining loss in joint training"),
      PGM_DOUBLE_FIELD("beta", train.beta, "weight of the task loss in joint training"),
      PGM_INT_FIELD("pretrain_epochs", train.pretrain_epochs, "first-stage epochs"),
      PGM_INT_FIELD("joint_epochs", train.joint_epochs, "second-stage epochs"),
      PGM_SIZE_FIELD("batch_size", train.batch_size, "mini-batch size"),
      PGM_DOUBLE_FIELD("lr_overall", train.lr_overall, "learning rate for all other modules"),
      PGM_DOUBLE_FIELD("lr_learners", train.lr_learners, "learning rate of the two learners"),
      PGM_DOUBLE_FIELD("lr_decoder", train.lr_decoder, "learning rate of the decoder"),
      PGM_DOUBLE_FIELD("theta", train.theta, "hard-gate threshold"),
      PGM_U64_FIELD("seed", train.seed, "initialization and shuffling seed"),
      PGM_BOOL_FIELD("no_partitioner", train.ablation.no_partitioner,
                     "ablate the partitioner (and everything built on it)"),
      PGM_BOOL_FIELD("no_uni_learner", train.ablation.no_uni_learner,
                     "ablate the uni-modal learner and its loss"),
      PGM_BOOL_FIELD("no_paired_learner", train.ablation.no_paired_learner,
                     "ablate the paired-modal learner and its loss"),
      PGM_BOOL_FIELD("no_decoder", train.ablation.no_decoder,
                     "ablate the decoder and the reconstruction loss"),
      Field{{"task", "classification or regression"},
            [](RunConfig& c, const std::string& v) { c.train.task = parse_task_kind(v); },
            [](const RunConfig& c) { return std::string(task_kind_name(c.train.task)); }},
      PGM_SIZE_FIELD("learner_depth", train.learner_depth, "Transformer blocks per learner"),
      PGM_SIZE_FIELD("heads", train.heads, "attention heads"),
      Field{{"train_gate_mode", "gating used while training (soft|hard|ste)"},
            [](RunConfig& c, const std::string& v) {
              c.train.train_gate_mode = parse_gate_mode("train_gate_mode", v);
            },
            [](const RunConfig& c) { return std::string(gate_mode_name(c.train.train_gate_mode)); }},
      Field{{"eval_gate_mode", "gating used at evaluation (soft|hard|ste)"},
            [](RunConfig& c, const std::string& v) {
              c.train.eval_gate_mode = parse_gate_mode("eval_gate_mode", v);
            },
            [](const RunConfig& c) { return std::string(gate_mode_name(c.train.eval_gate_mode)); }},
      Field{{"fusion", "downstream fusion: partitioned or concat"},
            [](RunConfig& c, const std::string& v) {
              if (v == "partitioned") c.train.fusion = FusionMode::kPartitioned;
              else if (v == "concat") c.train.fusion = FusionMode::kConcat;
              else fail(ErrorCode::kConfig, "bad fusion mode '" + v + "' (partitioned|concat)");
            },
            [](const RunConfig& c) {
              return std::string(c.train.fusion == FusionMode::kPartitioned ? "partitioned" : "concat");
            }},
      PGM_SIZE_FIELD("bench_seeds", train.bench_seeds, "seeds per benchmark cell"),
  };
  return f;
}

#undef PGM_SIZE_FIELD
#undef PGM_INT_FIELD
#undef PGM_U64_FIELD
#undef PGM_DOUBLE_FIELD
#undef PGM_BOOL_FIELD

const Field& field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.info.key) return f;
  }
  fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<RunConfig::KeyInfo>& RunConfig::keys() {
  static const std::vector<KeyInfo> k = [] {
    std::vector<KeyInfo> out;
    for (const Field& f : fields()) out.push_back(f.info);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

void RunConfig::load_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) {
    out += f.info.key;
    out += " = ";
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  if (synth.dim % train.heads != 0) {
    fail(ErrorCode::kConfig, "dim must be divisible by heads");
  }
}

}  // namespace pgm
