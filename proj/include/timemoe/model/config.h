/* Copyright 2026 The TimeMoE Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace timemoe::model {

struct ModelConfig {
  int num_layers = 2;
  int num_heads = 2;
  int num_experts = 4;   // routed experts N
  int top_k = 2;         // K
  int d_model = 32;      // D
  int d_ff = 128;        // hidden size of the dense (use_moe = false) FFN
  int d_expert = 32;     // hidden size of each routed and the shared expert
  std::vector<int> head_horizons{1, 8, 32, 64};
  int max_context = 4096;
  double rope_base = 10000.0;
  bool use_moe = true;
  bool shared_expert = true;
  double init_std = 0.02;
  // The point embedding has fan-in 1; see README "Initialization".
  double embed_init_std = 1.0;

  int d_head() const { return d_model / num_heads; }
  int max_horizon() const { return head_horizons.back(); }

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Missing keys keep their defaults; the result is validated.
void from_json(const nlohmann::json& j, ModelConfig& c);

// The three published configurations (base, large, ultra).
ModelConfig base_config();
ModelConfig large_config();
ModelConfig ultra_config();

}  // namespace timemoe::model
