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

#include "persona/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace persona {

namespace fs = std::filesystem;

// ------------------------------------------------------------ TrainConfig

TrainConfig TrainConfig::defaults_for(std::string_view dataset) {
  TrainConfig c;
  if (dataset == "convai2") return c;
  if (dataset == "cmudog") {
    c.dataset = "cmudog";
    c.hidden = 500;
    c.epochs = 35;
    c.l_c_max = 20;
    c.l_p_max = 20;
    return c;
  }
  throw std::invalid_argument("unknown dataset: " + std::string(dataset));
}

void TrainConfig::validate() const {
  if (dataset != "convai2" && dataset != "cmudog") {
    throw std::invalid_argument("dataset must be convai2 or cmudog");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch_size must be >= 1");
  if (hidden < 1 || embed_dim < 1) throw std::invalid_argument("dimensions must be >= 1");
  if (k_max < 1 || l_c_max < 1 || l_p_max < 1) throw std::invalid_argument("caps must be >= 1");
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  if (gate_activation != "logistic" && gate_activation != "tanh") {
    throw std::invalid_argument("gate_activation must be logistic or tanh");
  }
}

ModelConfig TrainConfig::model_config(int vocab_size) const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.embed_dim = embed_dim;
  m.hidden = hidden;
  m.gru_hidden = gru_hidden;
  m.attn_dim = attn_dim;
  m.dropout = dropout;
  m.no_style = no_style;
  m.no_knowledge_update = no_knowledge_update;
  m.no_coverage = no_coverage;
  m.gate_activation =
      gate_activation == "tanh" ? GateActivation::kTanh : GateActivation::kLogistic;
  return m;
}

BatchCaps TrainConfig::caps() const { return {k_max, l_c_max, l_p_max}; }

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("bad boolean for " + key + ": '" + value + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "dataset",    "persona_mode",        "hidden",      "embed_dim",  "gru_hidden",
      "attn_dim",   "lr",                  "dropout",     "clip_norm",  "epochs",
      "batch_size", "seed",                "no_style",    "no_knowledge_update",
      "no_coverage", "gate_activation",    "k_max",       "l_c_max",    "l_p_max",
      "min_freq",   "max_vocab",           "max_steps",   "adam_beta1", "adam_beta2",
      "adam_eps"};
  return keys;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {{"dataset", dataset},
          {"persona_mode", std::string(to_string(persona_mode))},
          {"hidden", std::to_string(hidden)},
          {"embed_dim", std::to_string(embed_dim)},
          {"gru_hidden", std::to_string(gru_hidden)},
          {"attn_dim", std::to_string(attn_dim)},
          {"lr", format_double(lr)},
          {"dropout", format_double(dropout)},
          {"clip_norm", format_double(clip_norm)},
          {"epochs", std::to_string(epochs)},
          {"batch_size", std::to_string(batch_size)},
          {"seed", std::to_string(seed)},
          {"no_style", b(no_style)},
          {"no_knowledge_update", b(no_knowledge_update)},
          {"no_coverage", b(no_coverage)},
          {"gate_activation", gate_activation},
          {"k_max", std::to_string(k_max)},
          {"l_c_max", std::to_string(l_c_max)},
          {"l_p_max", std::to_string(l_p_max)},
          {"min_freq", std::to_string(min_freq)},
          {"max_vocab", std::to_string(max_vocab)},
          {"max_steps", std::to_string(max_steps)},
          {"adam_beta1", format_double(adam_beta1)},
          {"adam_beta2", format_double(adam_beta2)},
          {"adam_eps", format_double(adam_eps)}};
}

bool TrainConfig::has_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset") dataset = value;
  else if (key == "persona_mode") persona_mode = parse_persona_mode(value);
  else if (key == "hidden") hidden = parse_number<int>(key, value);
  else if (key == "embed_dim") embed_dim = parse_number<int>(key, value);
  else if (key == "gru_hidden") gru_hidden = parse_number<int>(key, value);
  else if (key == "attn_dim") attn_dim = parse_number<int>(key, value);
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "dropout") dropout = parse_number<double>(key, value);
  else if (key == "clip_norm") clip_norm = parse_number<double>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "no_style") no_style = parse_bool(key, value);
  else if (key == "no_knowledge_update") no_knowledge_update = parse_bool(key, value);
  else if (key == "no_coverage") no_coverage = parse_bool(key, value);
  else if (key == "gate_activation") gate_activation = value;
  else if (key == "k_max") k_max = parse_number<int>(key, value);
  else if (key == "l_c_max") l_c_max = parse_number<int>(key, value);
  else if (key == "l_p_max") l_p_max = parse_number<int>(key, value);
  else if (key == "min_freq") min_freq = parse_number<int>(key, value);
  else if (key == "max_vocab") max_vocab = parse_number<int>(key, value);
  else if (key == "max_steps") max_steps = parse_number<long>(key, value);
  else if (key == "adam_beta1") adam_beta1 = parse_number<double>(key, value);
  else if (key == "adam_beta2") adam_beta2 = parse_number<double>(key, value);
  else if (key == "adam_eps") adam_eps = parse_number<double>(key, value);
  else throw std::invalid_argument("unknown config key: " + key);
}

std::map<std::string, std::string> read_key_value_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected key = value", lineno);
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// --------------------------------------------------------------- Clipping

double global_norm(std::span<const Matrix> grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

double clip_gradients(std::span<Matrix> grads, double max_norm) {
  for (const auto& g : grads) {
    if (!g.allFinite()) throw TrainingError("clip_gradients: non-finite gradient");
  }
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

double clip_gradients(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].grad.allFinite()) {
      throw TrainingError("clip_gradients: non-finite gradient in " + params[i].name);
    }
    sq += params[i].grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (std::size_t i = 0; i < params.size(); ++i) params[i].grad *= scale;
  }
  return norm;
}

// ------------------------------------------------------------------- Adam

Adam::Adam(const ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
}

void Adam::step(ParameterSet& params) {
  if (params.size() != m_.size()) throw std::logic_error("Adam: parameter set changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

// ------------------------------------------------------------- Checkpoint

ExampleIds to_ids(const DialogueExample& ex, const Vocabulary& vocab, const BatchCaps& caps) {
  return encode_batch(std::span<const DialogueExample>(&ex, 1), vocab, caps).example(0);
}

namespace {

constexpr char kMagic[8] = {'P', 'D', 'C', 'K', 'P', 'T', '0', '1'};

void write_doubles(std::ofstream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

void read_doubles(std::ifstream& in, Matrix& m) {
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const fs::path& path, const PersonaModel& model, const TrainConfig& config,
                     const Vocabulary& vocab, int epoch, double valid_loss, const Adam* optimizer) {
  const ParameterSet& params = model.params();
  nlohmann::ordered_json header;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : config.entries()) cfg[k] = v;
  header["format"] = "persona-checkpoint/1";
  header["config"] = cfg;
  header["vocab"] = vocab.tokens();
  header["epoch"] = epoch;
  header["valid_loss"] = valid_loss;
  header["adam_steps"] = optimizer ? optimizer->steps() : 0;
  header["has_moments"] = optimizer != nullptr;
  nlohmann::json arrays = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    arrays.push_back({{"name", params[i].name},
                      {"rows", params[i].value.rows()},
                      {"cols", params[i].value.cols()}});
  }
  header["arrays"] = arrays;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < params.size(); ++i) write_doubles(out, params[i].value);
  if (optimizer) {
    for (const auto& m : optimizer->first_moments()) write_doubles(out, m);
    for (const auto& v : optimizer->second_moments()) write_doubles(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint header truncated");
  const auto header = nlohmann::json::parse(text);

  Checkpoint ck;
  for (const auto& [k, v] : header["config"].items()) ck.config.set(k, v.get<std::string>());
  auto tokens = header["vocab"].get<std::vector<std::string>>();
  if (tokens.size() < Vocabulary::kReserved) throw std::runtime_error("checkpoint vocab too small");
  ck.vocab = Vocabulary(std::vector<std::string>(tokens.begin() + Vocabulary::kReserved, tokens.end()));
  ck.epoch = header["epoch"].get<int>();
  ck.valid_loss = header["valid_loss"].get<double>();
  ck.model = std::make_unique<PersonaModel>(ck.config.model_config(ck.vocab.size()), ck.config.seed);

  ParameterSet& params = ck.model->params();
  const auto& arrays = header["arrays"];
  if (arrays.size() != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& a = arrays[i];
    if (a["name"].get<std::string>() != params[i].name ||
        a["rows"].get<Eigen::Index>() != params[i].value.rows() ||
        a["cols"].get<Eigen::Index>() != params[i].value.cols()) {
      throw std::runtime_error("checkpoint array mismatch at " + params[i].name);
    }
    read_doubles(in, params[i].value);
  }
  if (header["has_moments"].get<bool>()) {
    ck.optimizer.emplace(params, ck.config.lr, ck.config.adam_beta1, ck.config.adam_beta2,
                         ck.config.adam_eps);
    for (auto& m : ck.optimizer->first_moments()) read_doubles(in, m);
    for (auto& v : ck.optimizer->second_moments()) read_doubles(in, v);
    ck.optimizer->set_steps(header["adam_steps"].get<long>());
  }
  return ck;
}

// ---------------------------------------------------------------- Trainer

Trainer::Trainer(const TrainConfig& config, Vocabulary vocab)
    : config_(config),
      vocab_(std::move(vocab)),
      model_((config_.validate(),
              std::make_unique<PersonaModel>(config_.model_config(vocab_.size()), config_.seed))),
      optimizer_(model_->params(), config_.lr, config_.adam_beta1, config_.adam_beta2,
                 config_.adam_eps),
      rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {}

double Trainer::train_step(std::span<const DialogueExample> batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const Batch ids = encode_batch(batch, vocab_, config_.caps());
  long tokens = 0;
  for (int b = 0; b < ids.size(); ++b) tokens += ids.response_lengths[static_cast<std::size_t>(b)] - 1;

  ParameterSet& params = model_->params();
  params.zero_grad();
  const Dropout dropout(config_.dropout, &rng_);
  double total = 0.0;
  for (int b = 0; b < ids.size(); ++b) {
    Graph g;
    Var nll = model_->sequence_nll(g, ids.example(b), dropout);
    total += g.value(nll)(0, 0);
    g.backward(g.affine(nll, 1.0 / static_cast<double>(tokens), 0.0));
  }
  const double loss = total / static_cast<double>(tokens);
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << steps_ << " (batch of " << batch.size()
        << "); parameter norms:";
    for (std::size_t i = 0; i < params.size(); ++i) {
      msg << ' ' << params[i].name << '=' << params[i].value.norm();
    }
    throw TrainingError(msg.str());
  }
  clip_gradients(params, config_.clip_norm);
  optimizer_.step(params);
  ++steps_;
  return loss;
}

double Trainer::evaluate_loss(std::span<const DialogueExample> examples) const {
  if (examples.empty()) throw std::invalid_argument("evaluate_loss: no examples");
  double total = 0.0;
  long tokens = 0;
  for (const auto& ex : examples) {
    const ExampleIds ids = to_ids(ex, vocab_, config_.caps());
    Graph g(false);
    total += g.value(model_->sequence_nll(g, ids))(0, 0);
    tokens += static_cast<long>(ids.response.size()) - 1;
  }
  return total / static_cast<double>(tokens);
}

std::vector<EpochLog> Trainer::train(std::span<const DialogueExample> train_set,
                                     std::span<const DialogueExample> valid_set,
                                     const std::optional<fs::path>& out_dir,
                                     const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.empty() || valid_set.empty()) throw std::invalid_argument("train: empty corpus");
  std::ofstream csv;
  if (out_dir) {
    fs::create_directories(*out_dir);
    csv.open(*out_dir / "train_log.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write training log");
    csv << "epoch,train_loss,valid_loss,wall_time\n";
    csv.precision(12);
  }

  std::vector<EpochLog> history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  const auto start = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config_.batch_size)) {
      if (config_.max_steps > 0 && steps_ >= config_.max_steps) break;
      std::vector<DialogueExample> batch;
      for (std::size_t i = at; i < std::min(order.size(), at + config_.batch_size); ++i) {
        batch.push_back(train_set[order[i]]);
      }
      loss_sum += train_step(batch);
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batches ? loss_sum / batches : 0.0;
    log.valid_loss = evaluate_loss(valid_set);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.push_back(log);
    if (out_dir) {
      csv << log.epoch << ',' << log.train_loss << ',' << log.valid_loss << ','
          << log.wall_seconds << '\n';
      csv.flush();
      if (log.valid_loss < best) {
        best = log.valid_loss;
        save_checkpoint(*out_dir / "best.ckpt", *model_, config_, vocab_, epoch, log.valid_loss,
                        &optimizer_);
      }
    }
    if (on_epoch) on_epoch(log);
    if (config_.max_steps > 0 && steps_ >= config_.max_steps) break;
  }
  return history;
}

// ------------------------------------------------------------- Evaluation

EvaluationResult evaluate(const PersonaModel& model, const Vocabulary& vocab,
                          std::span<const DialogueExample> examples, const DecodeConfig& decode,
                          const BatchCaps& caps, bool gold_as_output) {
  if (model.config().vocab_size != vocab.size()) {
    throw std::invalid_argument("vocabulary size does not match the model");
  }
  EvaluationResult result;
  std::vector<Tokens> outputs, gold;
  std::vector<std::vector<Tokens>> knowledge;
  for (const auto& ex : examples) {
    GenerationRecord rec;
    rec.context = ex.context;
    rec.knowledge = ex.persona_a;
    rec.gold = ex.response;
    if (gold_as_output) {
      rec.output = ex.response;
    } else {
      const auto ids = model.generate(to_ids(ex, vocab, caps), decode);
      rec.output = vocab.decode(ids);
    }
    outputs.push_back(rec.output);
    gold.push_back(rec.gold);
    knowledge.push_back(rec.knowledge);
    result.generations.push_back(std::move(rec));
  }
  result.report = evaluate_corpus(outputs, gold, knowledge);
  return result;
}

EvaluationResult evaluate_gold(std::span<const DialogueExample> examples) {
  EvaluationResult result;
  std::vector<Tokens> outputs;
  std::vector<std::vector<Tokens>> knowledge;
  for (const auto& ex : examples) {
    result.generations.push_back({ex.context, ex.persona_a, ex.response, ex.response});
    outputs.push_back(ex.response);
    knowledge.push_back(ex.persona_a);
  }
  result.report = evaluate_corpus(outputs, outputs, knowledge);
  return result;
}

EvaluationResult evaluate(const Checkpoint& checkpoint, std::span<const DialogueExample> examples,
                          const DecodeConfig& decode, const Vocabulary* expected_vocab,
                          bool gold_as_output) {
  if (expected_vocab && !(*expected_vocab == checkpoint.vocab)) {
    throw std::invalid_argument("vocabulary does not match the checkpoint");
  }
  return evaluate(*checkpoint.model, checkpoint.vocab, examples, decode, checkpoint.config.caps(),
                  gold_as_output);
}

void write_generations(const fs::path& path, const EvaluationResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto sentences = [](const std::vector<Tokens>& block) {
    std::vector<std::string> s;
    for (const auto& t : block) s.push_back(detokenize(t));
    return s;
  };
  for (const auto& g : result.generations) {
    nlohmann::ordered_json j;
    j["context"] = sentences(g.context);
    j["knowledge"] = sentences(g.knowledge);
    j["gold"] = detokenize(g.gold);
    j["generated"] = detokenize(g.output);
    out << j.dump() << '\n';
  }
}

}  // namespace persona
