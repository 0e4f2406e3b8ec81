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

#include "persona/layers.hpp"

namespace persona {

/// Shape and switches of the network. Zero for gru_hidden/attn_dim means
/// "same as hidden".
struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 300;
  int hidden = 800;
  int gru_hidden = 0;
  int attn_dim = 0;
  double dropout = 0.3;

  // ablations
  bool no_style = false;
  bool no_knowledge_update = false;
  bool no_coverage = false;

  GateActivation gate_activation = GateActivation::kLogistic;

  int direction_hidden() const { return gru_hidden > 0 ? gru_hidden : hidden; }
  int attention_dim() const { return attn_dim > 0 ? attn_dim : hidden; }

  void validate() const;
};

}  // namespace persona
