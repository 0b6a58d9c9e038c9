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

#include "timemoe/model/config.h"

#include <algorithm>

#include "timemoe/error.h"

namespace timemoe::model {

namespace {

void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("invalid model config: " + message);
}

}  // namespace

void ModelConfig::validate() const {
  check(num_layers >= 1, "num_layers must be positive");
  check(num_heads >= 1, "num_heads must be positive");
  check(d_model >= 1, "d_model must be positive");
  check(d_model % num_heads == 0, "d_model must be divisible by num_heads");
  check(d_head() % 2 == 0, "head dimension must be even for rotary embeddings");
  check(num_experts >= 1, "num_experts must be at least 1");
  check(top_k >= 1 && top_k <= num_experts, "top_k must lie in [1, num_experts]");
  check(d_ff >= 1, "d_ff must be positive");
  check(d_expert >= 1, "d_expert must be positive");
  check(!head_horizons.empty(), "head_horizons must not be empty");
  check(head_horizons.front() == 1, "head_horizons must start with 1");
  for (std::size_t i = 1; i < head_horizons.size(); ++i) {
    check(head_horizons[i] > head_horizons[i - 1],
          "head_horizons must be strictly ascending");
  }
  check(max_context >= 1, "max_context must be positive");
  check(rope_base > 0.0, "rope_base must be positive");
  check(init_std > 0.0 && embed_init_std > 0.0, "init std must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},
                     {"num_experts", c.num_experts},
                     {"top_k", c.top_k},
                     {"d_model", c.d_model},
                     {"d_ff", c.d_ff},
                     {"d_expert", c.d_expert},
                     {"head_horizons", c.head_horizons},
                     {"max_context", c.max_context},
                     {"rope_base", c.rope_base},
                     {"use_moe", c.use_moe},
                     {"shared_expert", c.shared_expert},
                     {"init_std", c.init_std},
                     {"embed_init_std", c.embed_init_std}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const char* kKnown[] = {
      "num_layers", "num_heads",  "num_experts", "top_k",
      "d_model",    "d_ff",       "d_expert",    "head_horizons",
      "max_context", "rope_base", "use_moe",     "shared_expert",
      "init_std",   "embed_init_std"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) ==
        std::end(kKnown)) {
      throw ConfigError("unknown model config key '" + key + "'");
    }
  }
  try {
    c.num_layers = j.value("num_layers", c.num_layers);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.num_experts = j.value("num_experts", c.num_experts);
    c.top_k = j.value("top_k", c.top_k);
    c.d_model = j.value("d_model", c.d_model);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.d_expert = j.value("d_expert", c.d_expert);
    c.head_horizons = j.value("head_horizons", c.head_horizons);
    c.max_context = j.value("max_context", c.max_context);
    c.rope_base = j.value("rope_base", c.rope_base);
    c.use_moe = j.value("use_moe", c.use_moe);
    c.shared_expert = j.value("shared_expert", c.shared_expert);
    c.init_std = j.value("init_std", c.init_std);
    c.embed_init_std = j.value("embed_init_std", c.embed_init_std);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
}

ModelConfig base_config() {
  ModelConfig c;
  c.num_layers = 12;
  c.num_heads = 12;
  c.num_experts = 8;
  c.top_k = 2;
  c.d_model = 384;
  c.d_ff = 1536;
  c.d_expert = 192;
  return c;
}

ModelConfig large_config() {
  ModelConfig c = base_config();
  c.d_model = 768;
  c.d_ff = 3072;
  c.d_expert = 384;
  return c;
}

ModelConfig ultra_config() {
  ModelConfig c = base_config();
  c.num_layers = 36;
  c.num_heads = 16;
  c.d_model = 1024;
  c.d_ff = 4096;
  c.d_expert = 512;
  return c;
}

}  // namespace timemoe::model
