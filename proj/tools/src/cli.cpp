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

#include "persona_cli/cli.hpp"

#include "persona/serve.hpp"
#include "persona/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace persona::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
  bool boolean = false;
};

// Command-line spelling of every training config key.
const std::vector<FlagSpec>& train_flags() {
  static const std::vector<FlagSpec> flags = {
      {"--dataset", "dataset", "convai2 or cmudog"},
      {"--persona-mode", "persona_mode", "original or revised (ConvAI2)"},
      {"--hidden", "hidden", "hidden size d"},
      {"--embed-dim", "embed_dim", "word embedding size"},
      {"--gru-hidden", "gru_hidden", "per-direction encoder GRU size (0: d)"},
      {"--attn-dim", "attn_dim", "attention projection size (0: d)"},
      {"--lr", "lr", "Adam learning rate"},
      {"--dropout", "dropout", "dropout rate"},
      {"--clip", "clip_norm", "global gradient norm cap"},
      {"--epochs", "epochs", "training epochs"},
      {"--batch-size", "batch_size", "examples per update"},
      {"--seed", "seed", "random seed"},
      {"--no-style", "no_style", "disable the speaking-style vector", true},
      {"--no-knowledge-update", "no_knowledge_update", "freeze persona states across turns", true},
      {"--no-coverage", "no_coverage", "drop coverage from the attention score", true},
      {"--gate-activation", "gate_activation", "logistic or tanh"},
      {"--k-max", "k_max", "max tokens per sentence"},
      {"--l-c-max", "l_c_max", "max context turns"},
      {"--l-p-max", "l_p_max", "max persona sentences"},
      {"--min-freq", "min_freq", "vocabulary frequency cutoff"},
      {"--max-vocab", "max_vocab", "vocabulary size cap (reserved tokens included)"},
      {"--max-steps", "max_steps", "stop after this many updates (0: no cap)"},
  };
  return flags;
}

// Values captured from config flags. Map nodes stay put, so CLI11 can bind
// to them directly.
struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app) {
    for (const auto& f : train_flags()) {
      if (f.boolean) {
        options[f.key] = app.add_flag(f.flag, switches[f.key], f.help);
      } else {
        options[f.key] = app.add_option(f.flag, values[f.key], f.help);
      }
    }
  }

  std::map<std::string, std::string> given() const {
    std::map<std::string, std::string> out;
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      auto sw = switches.find(key);
      out[key] = sw != switches.end() ? (sw->second ? "true" : "false") : values.at(key);
    }
    return out;
  }
};

struct DecodeFlags {
  int beam_size = 1;
  int max_len = 30;
  CLI::Option* beam_opt = nullptr;
  CLI::Option* len_opt = nullptr;

  void attach(CLI::App& app) {
    beam_opt = app.add_option("--beam-size", beam_size, "beam width (1: greedy)")
                   ->check(CLI::PositiveNumber);
    len_opt = app.add_option("--max-len", max_len, "max generated tokens")
                  ->check(CLI::PositiveNumber);
  }
  DecodeConfig config() const { return {beam_size, max_len}; }
};

struct ResolvedConfig {
  TrainConfig config;
  DecodeConfig decode;
  std::map<std::string, std::string> source;  // key -> default/file/flag
};

// Defaults (chosen by dataset), then the config file, then flags.
ResolvedConfig resolve_config(const std::string& config_path, const ConfigFlags& flags,
                              const DecodeFlags& decode) {
  std::map<std::string, std::string> file;
  if (!config_path.empty()) file = read_key_value_file(config_path);
  const auto given = flags.given();

  std::string dataset = "convai2";
  if (auto it = file.find("dataset"); it != file.end()) dataset = it->second;
  if (auto it = given.find("dataset"); it != given.end()) dataset = it->second;

  ResolvedConfig r;
  try {
    r.config = TrainConfig::defaults_for(dataset);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  r.decode = decode.config();
  for (const auto& [key, value] : r.config.entries()) r.source[key] = "default";
  r.source["beam_size"] = "default";
  r.source["max_len"] = "default";

  auto apply = [&](const std::string& key, const std::string& value, const char* origin) {
    try {
      if (key == "beam_size" || key == "max_len") {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size() || v < 1) throw std::invalid_argument("bad value for " + key);
        (key == "beam_size" ? r.decode.beam_size : r.decode.max_len) = v;
      } else {
        r.config.set(key, value);
      }
    } catch (const std::exception& e) {
      throw UsageError(std::string(origin) + ": " + e.what());
    }
    r.source[key] = origin;
  };
  for (const auto& [key, value] : file) apply(key, value, "file");
  for (const auto& [key, value] : given) apply(key, value, "flag");
  if (decode.beam_opt->count()) apply("beam_size", std::to_string(decode.beam_size), "flag");
  if (decode.len_opt->count()) apply("max_len", std::to_string(decode.max_len), "flag");
  try {
    r.config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return r;
}

void write_manifest(const fs::path& dir, const std::string& command, const ResolvedConfig& r,
                    const json& inputs) {
  json config = json::object();
  auto record = [&](const std::string& key, const std::string& value) {
    config[key] = {{"value", value}, {"source", r.source.at(key)}};
  };
  for (const auto& [key, value] : r.config.entries()) record(key, value);
  record("beam_size", std::to_string(r.decode.beam_size));
  record("max_len", std::to_string(r.decode.max_len));
  std::ofstream out(dir / "run_manifest.json");
  if (!out) throw std::runtime_error("cannot write run manifest in " + dir.string());
  out << json{{"command", command}, {"config", config}, {"inputs", inputs}}.dump(2) << '\n';
}

std::vector<DialogueExample> load_dataset(const std::string& dataset, PersonaMode mode,
                                          const fs::path& path) {
  if (dataset == "convai2") return load_convai2(path, mode);
  if (dataset == "cmudog") return load_cmudog(path);
  throw UsageError("unknown dataset: " + dataset);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  return out.str();
}

// ---------------------------------------------------------------- commands

struct TrainArgs {
  std::string config_path, train_path, valid_path, out_dir, embeddings;
  ConfigFlags flags;
  DecodeFlags decode;
};

int cmd_train(TrainArgs& a, std::ostream& out) {
  const ResolvedConfig r = resolve_config(a.config_path, a.flags, a.decode);
  const auto train = load_dataset(r.config.dataset, r.config.persona_mode, a.train_path);
  const auto valid = load_dataset(r.config.dataset, r.config.persona_mode, a.valid_path);
  if (train.empty() || valid.empty()) throw std::runtime_error("training or validation set is empty");

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  write_manifest(dir, "train", r,
                 {{"train", a.train_path}, {"valid", a.valid_path}, {"embeddings", a.embeddings}});

  Vocabulary vocab = build_vocab(train, r.config.min_freq, static_cast<std::size_t>(r.config.max_vocab));
  Trainer trainer(r.config, vocab);
  if (!a.embeddings.empty()) {
    trainer.model().embedding().value =
        load_pretrained_embeddings(a.embeddings, vocab, r.config.embed_dim, r.config.seed);
  }
  out << "examples train=" << train.size() << " valid=" << valid.size()
      << " vocab=" << vocab.size() << " params=" << trainer.model().params().scalar_count() << '\n';
  trainer.train(train, valid, dir, [&](const EpochLog& log) {
    out << "epoch=" << log.epoch << " train_loss=" << std::setprecision(6) << log.train_loss
        << " valid_loss=" << log.valid_loss << " steps=" << trainer.steps() << '\n'
        << std::flush;
  });
  out << "checkpoint=" << (dir / "best.ckpt").string() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, data, out_dir, dataset, persona_mode;
  bool gold = false;
  DecodeFlags decode;
};

int cmd_eval(EvalArgs& a, std::ostream& out) {
  if (a.checkpoint.empty() && !a.gold) {
    throw UsageError("--checkpoint is required unless --gold-as-generations is set");
  }
  std::optional<Checkpoint> ck;
  if (!a.checkpoint.empty()) ck.emplace(load_checkpoint(a.checkpoint));
  std::string dataset = ck ? ck->config.dataset : "convai2";
  PersonaMode mode = ck ? ck->config.persona_mode : PersonaMode::kOriginal;
  if (!a.dataset.empty()) dataset = a.dataset;
  try {
    if (!a.persona_mode.empty()) mode = parse_persona_mode(a.persona_mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto examples = load_dataset(dataset, mode, a.data);
  if (examples.empty()) throw std::runtime_error("no examples in " + a.data);

  const EvaluationResult result =
      ck ? evaluate(*ck, examples, a.decode.config(), nullptr, a.gold) : evaluate_gold(examples);
  out << result.report.to_key_value();
  if (!a.out_dir.empty()) {
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    write_report(result.report, dir / "report.txt", dir / "report.json");
    write_generations(dir / "generations.jsonl", result);
  }
  return kExitOk;
}

struct GenerateArgs {
  std::string checkpoint, input, output;
  DecodeFlags decode;
};

int cmd_generate(GenerateArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::ifstream in(a.input);
  if (!in) throw std::runtime_error("cannot open " + a.input);
  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + a.output);
  }
  std::ostream& sink = a.output.empty() ? out : file;
  auto block = [](const json& j, const char* key) {
    std::vector<Tokens> b;
    if (j.contains(key)) {
      for (const auto& s : j.at(key)) b.push_back(tokenize(s.get<std::string>()));
    }
    return b;
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    DialogueExample ex;
    try {
      j = json::parse(line);
      ex.persona_a = block(j, "persona_a");
      ex.persona_b = block(j, "persona_b");
      ex.context = block(j, "context");
    } catch (const json::exception& e) {
      throw ParseError(a.input + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    if (ex.persona_a.empty() || ex.context.empty()) {
      throw ParseError(a.input + ":" + std::to_string(lineno) +
                           ": persona_a and context must be non-empty lists",
                       lineno);
    }
    const auto ids = ck.model->generate(to_ids(ex, ck.vocab, ck.config.caps()), a.decode.config());
    j["generated"] = detokenize(ck.vocab.decode(ids));
    sink << j.dump() << '\n';
  }
  return kExitOk;
}

struct ChatArgs {
  std::string checkpoint, persona_file;
  std::vector<std::string> persona_a, persona_b;
  DecodeFlags decode;
};

int cmd_chat(ChatArgs& a, std::istream& in, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::vector<std::string> persona = a.persona_a;
  if (!a.persona_file.empty()) {
    for (auto& s : read_lines(a.persona_file)) persona.push_back(std::move(s));
  }
  SessionManager sessions(*ck.model, ck.vocab, ck.config.caps());
  std::string id;
  try {
    id = sessions.create(persona, a.persona_b, a.decode.config());
  } catch (const ServeError& e) {
    throw UsageError(e.what());
  }
  out << "persona:\n";
  for (std::size_t i = 0; i < persona.size(); ++i) out << "  [" << i << "] " << persona[i] << '\n';
  out << "type a message, /state to show coverage, /quit to leave\n";
  std::string line;
  while (out << "> " << std::flush, std::getline(in, line)) {
    if (line == "/quit") break;
    if (line == "/state") {
      out << "coverage: " << join(sessions.get(id).coverage) << '\n';
      continue;
    }
    try {
      const ChatReply r = sessions.post(id, line);
      out << "bot: " << r.reply << '\n' << "coverage: " << join(r.coverage) << '\n';
    } catch (const ServeError& e) {
      out << "error: " << e.what() << '\n';
    }
  }
  out << '\n';
  return kExitOk;
}

struct ServeArgs {
  std::string checkpoint, host = "127.0.0.1", ui_dir, transcripts;
  int port = 8080;
};

int cmd_serve(ServeArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::optional<fs::path> transcripts;
  if (!a.transcripts.empty()) transcripts = a.transcripts;
  SessionManager sessions(*ck.model, ck.vocab, ck.config.caps(), transcripts);
  std::optional<fs::path> ui;
  if (!a.ui_dir.empty()) ui = a.ui_dir;
  HttpService service(sessions, ui);
  const int port = service.bind(a.host, a.port);
  out << "listening on http://" << a.host << ':' << port << '\n' << std::flush;
  service.listen();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Persona-aware dialogue generation: train, evaluate and chat."};
  app.name("persona");
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoints");
  train_cmd->add_option("--config", train.config_path, "flat key = value config file")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--train", train.train_path, "training data")->required();
  train_cmd->add_option("--valid", train.valid_path, "validation data")->required();
  train_cmd->add_option("--out", train.out_dir, "output directory")->required();
  train_cmd->add_option("--embeddings", train.embeddings, "pretrained word vectors (text format)");
  train.flags.attach(*train_cmd);
  train.decode.attach(*train_cmd);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "decode a dataset and print metrics");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file");
  eval_cmd->add_option("--data", eval.data, "evaluation data")->required();
  eval_cmd->add_option("--out", eval.out_dir, "write report and generations here");
  eval_cmd->add_option("--dataset", eval.dataset, "convai2 or cmudog (default: checkpoint's)");
  eval_cmd->add_option("--persona-mode", eval.persona_mode, "original or revised");
  eval_cmd->add_flag("--gold-as-generations", eval.gold, "score gold responses as the output");
  eval.decode.attach(*eval_cmd);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "decode replies for a JSONL file of contexts");
  gen_cmd->add_option("--checkpoint", gen.checkpoint, "checkpoint file")->required();
  gen_cmd->add_option("--input", gen.input, "JSONL with persona_a, persona_b, context")->required();
  gen_cmd->add_option("--output", gen.output, "output JSONL (default: stdout)");
  gen.decode.attach(*gen_cmd);

  ChatArgs chat;
  auto* chat_cmd = app.add_subcommand("chat", "interactive terminal conversation");
  chat_cmd->add_option("--checkpoint", chat.checkpoint, "checkpoint file")->required();
  chat_cmd->add_option("--persona-a", chat.persona_a, "persona sentence of the bot (repeatable)");
  chat_cmd->add_option("--persona-b", chat.persona_b, "persona sentence of the user (repeatable)");
  chat_cmd->add_option("--persona-file", chat.persona_file, "bot persona, one sentence per line");
  chat.decode.attach(*chat_cmd);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP chat service");
  serve_cmd->add_option("--checkpoint", serve.checkpoint, "checkpoint file")->required();
  serve_cmd->add_option("--host", serve.host, "bind address");
  serve_cmd->add_option("--port", serve.port, "port (0: any free port)");
  serve_cmd->add_option("--ui-dir", serve.ui_dir, "static files served under /ui");
  serve_cmd->add_option("--transcripts", serve.transcripts, "append-only session transcripts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*gen_cmd) return cmd_generate(gen, out);
    if (*chat_cmd) return cmd_chat(chat, in, out);
    if (*serve_cmd) return cmd_serve(serve, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace persona::cli
