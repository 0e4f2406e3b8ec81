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

#include "persona/model.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace persona;

ModelConfig config(int hidden) {
  ModelConfig c;
  c.vocab_size = 2000;
  c.hidden = hidden;
  c.embed_dim = 64;
  c.dropout = 0.0;
  return c;
}

std::vector<int> sentence(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> pick(Vocabulary::kReserved, 1999);
  std::vector<int> s(static_cast<std::size_t>(n));
  for (auto& t : s) t = pick(rng);
  return s;
}

ExampleIds example(std::mt19937_64& rng, int l_p, int l_c) {
  ExampleIds ex;
  for (int i = 0; i < l_p; ++i) ex.persona_a.push_back(sentence(rng, 12));
  ex.persona_b = ex.persona_a;
  for (int i = 0; i < l_c; ++i) ex.context.push_back(sentence(rng, 15));
  ex.response = sentence(rng, 12);
  ex.response.insert(ex.response.begin(), Vocabulary::kSos);
  ex.response.push_back(Vocabulary::kEos);
  return ex;
}

void BM_EncodeSentence(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const PersonaModel model(config(static_cast<int>(state.range(0))), 1);
  const auto s = sentence(rng, 20);
  for (auto _ : state) {
    Graph g(false);
    benchmark::DoNotOptimize(g.value(model.encoder().encode(g, s).pooled).data());
  }
}
BENCHMARK(BM_EncodeSentence)->Arg(64)->Arg(256);

void BM_InteractionStep(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const PersonaModel model(config(static_cast<int>(state.range(0))), 2);
  const int d = static_cast<int>(state.range(0));
  const Matrix persona = Matrix::Random(d, 5), turn = Matrix::Random(d, 1);
  for (auto _ : state) {
    Graph g(false);
    const auto st = model.interaction().initial_state(g, g.constant(persona));
    benchmark::DoNotOptimize(g.value(model.interaction().step(g, st, g.constant(turn)).next.coverage).data());
  }
}
BENCHMARK(BM_InteractionStep)->Arg(64)->Arg(256);

void BM_TrainingStep(benchmark::State& state) {
  std::mt19937_64 rng(3);
  PersonaModel model(config(64), 3);
  const ExampleIds ex = example(rng, 5, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    model.params().zero_grad();
    Graph g;
    g.backward(model.sequence_nll(g, ex));
  }
}
BENCHMARK(BM_TrainingStep)->Arg(1)->Arg(6);

void BM_Decode(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const PersonaModel model(config(64), 4);
  const auto snap = model.snapshot(example(rng, 5, 4));
  const int beam = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.decoder().beam_decode(snap.context, snap.style, beam, 20));
  }
}
BENCHMARK(BM_Decode)->Arg(1)->Arg(5);

}  // namespace
