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

#include "persona/metrics.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace persona;

std::vector<Tokens> corpus(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 499), len(5, 20);
  std::vector<Tokens> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.resize(static_cast<std::size_t>(len(rng)));
    for (auto& t : s) t = "w" + std::to_string(word(rng));
  }
  return out;
}

void BM_Bleu2(benchmark::State& state) {
  const auto hyps = corpus(1, static_cast<int>(state.range(0)));
  const auto refs = corpus(2, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bleu_n(hyps, refs, 2));
}
BENCHMARK(BM_Bleu2)->Arg(1000)->Arg(8000);

void BM_Distinct2(benchmark::State& state) {
  const auto hyps = corpus(3, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(distinct_n(hyps, 2));
}
BENCHMARK(BM_Distinct2)->Arg(1000)->Arg(8000);

void BM_KnowledgeF1(benchmark::State& state) {
  const auto hyps = corpus(4, 200);
  const auto know = corpus(5, 5);
  for (auto _ : state) {
    for (const auto& h : hyps) benchmark::DoNotOptimize(knowledge_rpf1(h, know));
  }
}
BENCHMARK(BM_KnowledgeF1);

}  // namespace
