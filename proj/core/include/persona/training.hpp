// Copyright 2026 The Persona Dialogue Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "persona/data.hpp"
#include "persona/metrics.hpp"
#include "persona/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace persona {

/// Every knob of a training run. The key-value form (see entries()/set())
/// is what config files, CLI flags and checkpoints carry.
struct TrainConfig {
  std::string dataset = "convai2";
  PersonaMode persona_mode = PersonaMode::kOriginal;
  int hidden = 800;
  int embed_dim = 300;
  int gru_hidden = 0;
  int attn_dim = 0;
  double lr = 0.00005;
  double dropout = 0.3;
  double clip_norm = 5.0;
  int epochs = 25;
  int batch_size = 32;
  std::uint64_t seed = 1;
  bool no_style = false;
  bool no_knowledge_update = false;
  bool no_coverage = false;
  std::string gate_activation = "logistic";
  int k_max = 30;
  int l_c_max = 10;
  int l_p_max = 5;
  int min_freq = 1;
  int max_vocab = 20000;
  long max_steps = 0;  // 0: no cap
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Full-size defaults: ConvAI2 (d=800, 25 epochs) or CMUDoG (d=500, 35 epochs).
  static TrainConfig defaults_for(std::string_view dataset);

  void validate() const;
  ModelConfig model_config(int vocab_size) const;
  BatchCaps caps() const;

  /// Ordered (key, value) pairs covering every field.
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// Throws std::invalid_argument for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  static bool has_key(const std::string& key);
};

/// Parses `key = value` lines; '#' starts a comment. Throws ParseError.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Global L2 norm of all gradients.
double global_norm(std::span<const Matrix> grads);
/// Scales every gradient by max_norm / norm when the global norm exceeds
/// max_norm. Returns the norm before clipping. Non-finite entries throw.
double clip_gradients(std::span<Matrix> grads, double max_norm);
double clip_gradients(ParameterSet& params, double max_norm);

class Adam {
 public:
  Adam(const ParameterSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(ParameterSet& params);

  long steps() const { return t_; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Single id view of one example under the batch caps.
ExampleIds to_ids(const DialogueExample& ex, const Vocabulary& vocab, const BatchCaps& caps);

struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  int epoch = 0;
  double valid_loss = 0.0;
  std::unique_ptr<PersonaModel> model;
  std::optional<Adam> optimizer;
};

/// Binary container: magic, JSON header (config, vocab, array index), raw
/// little-endian doubles for every parameter and the Adam moments.
void save_checkpoint(const std::filesystem::path& path, const PersonaModel& model,
                     const TrainConfig& config, const Vocabulary& vocab, int epoch,
                     double valid_loss, const Adam* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double wall_seconds = 0.0;
};

class Trainer {
 public:
  Trainer(const TrainConfig& config, Vocabulary vocab);

  PersonaModel& model() { return *model_; }
  const PersonaModel& model() const { return *model_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TrainConfig& config() const { return config_; }
  Adam& optimizer() { return optimizer_; }
  long steps() const { return steps_; }

  /// One forward/backward/clip/Adam update over `batch`; returns the mean
  /// per-token loss measured during the forward pass.
  double train_step(std::span<const DialogueExample> batch);
  /// Mean per-token teacher-forced loss without dropout.
  double evaluate_loss(std::span<const DialogueExample> examples) const;

  /// Seeded shuffled epochs. When `out_dir` is set, writes train_log.csv and
  /// best.ckpt (lowest validation loss) there.
  std::vector<EpochLog> train(std::span<const DialogueExample> train_set,
                              std::span<const DialogueExample> valid_set,
                              const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                              const std::function<void(const EpochLog&)>& on_epoch = {});

 private:
  TrainConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<PersonaModel> model_;
  Adam optimizer_;
  std::mt19937_64 rng_;
  long steps_ = 0;
};

struct GenerationRecord {
  std::vector<Tokens> context;
  std::vector<Tokens> knowledge;
  Tokens gold;
  Tokens output;
};

struct EvaluationResult {
  EvalReport report;
  std::vector<GenerationRecord> generations;
};

/// Decodes every example (or, with `gold_as_output`, echoes the gold
/// response as the generation) and scores the corpus.
EvaluationResult evaluate(const PersonaModel& model, const Vocabulary& vocab,
                          std::span<const DialogueExample> examples, const DecodeConfig& decode,
                          const BatchCaps& caps, bool gold_as_output = false);

/// Scores the gold responses as if they were the generations. Needs no
/// model; a sanity check of the evaluation plumbing.
EvaluationResult evaluate_gold(std::span<const DialogueExample> examples);

/// Same, against a checkpoint. If `expected_vocab` is given it must match
/// the checkpoint's vocabulary.
EvaluationResult evaluate(const Checkpoint& checkpoint, std::span<const DialogueExample> examples,
                          const DecodeConfig& decode, const Vocabulary* expected_vocab = nullptr,
                          bool gold_as_output = false);

/// One JSON object per line: context, knowledge, gold, generated.
void write_generations(const std::filesystem::path& path, const EvaluationResult& result);

}  // namespace persona
