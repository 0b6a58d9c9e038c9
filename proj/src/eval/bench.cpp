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

#include "timemoe/eval/bench.h"

#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include "timemoe/data/store.h"
#include "timemoe/data/synthetic.h"
#include "timemoe/error.h"

namespace timemoe::eval {

using nlohmann::json;

void BenchPair::validate() const {
  moe.validate();
  dense.validate();
  train.validate();
  if (!moe.use_moe) throw ConfigError("bench: the sparse config must set use_moe");
  if (dense.use_moe) throw ConfigError("bench: the dense config must not set use_moe");
  if (seeds.empty()) throw ConfigError("bench: need at least one seed");
  if (corpus_size < 3 || series_length < 2) throw ConfigError("bench: corpus too small");
  if (eval_batches < 1) throw ConfigError("bench: eval_batches must be >= 1");
  if (flops_context < 1) throw ConfigError("bench: flops_context must be >= 1");
}

void to_json(json& j, const BenchPair& p) {
  j = json{{"moe", p.moe},
           {"dense", p.dense},
           {"train", p.train},
           {"seeds", p.seeds},
           {"corpus_size", p.corpus_size},
           {"series_length", p.series_length},
           {"eval_batches", p.eval_batches},
           {"flops_context", p.flops_context}};
}

void from_json(const json& j, BenchPair& p) {
  static const std::set<std::string> known = {
      "moe", "dense", "train", "seeds", "corpus_size", "series_length",
      "eval_batches", "flops_context"};
  if (!j.is_object()) throw ConfigError("bench pair must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown bench key '" + key + "'");
  }
  BenchPair out;
  try {
    out.moe = j.at("moe").get<model::ModelConfig>();
    out.dense = j.at("dense").get<model::ModelConfig>();
    if (j.contains("train")) out.train = j.at("train").get<train::TrainConfig>();
    out.seeds = j.value("seeds", out.seeds);
    out.corpus_size = j.value("corpus_size", out.corpus_size);
    out.series_length = j.value("series_length", out.series_length);
    out.eval_batches = j.value("eval_batches", out.eval_batches);
    out.flops_context = j.value("flops_context", out.flops_context);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bench pair: ") + e.what());
  }
  out.validate();
  p = std::move(out);
}

int BenchReport::moe_wins() const {
  int wins = 0;
  for (const auto& r : runs) wins += r.moe_loss <= r.dense_loss;
  return wins;
}

void to_json(json& j, const BenchReport& r) {
  json runs = json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"seed", run.seed},
                    {"moe_loss", run.moe_loss},
                    {"dense_loss", run.dense_loss},
                    {"moe_seconds", run.moe_seconds},
                    {"dense_seconds", run.dense_seconds}});
  }
  j = json{{"moe_params", {{"total", r.moe_params.total}, {"activated", r.moe_params.activated}}},
           {"dense_params",
            {{"total", r.dense_params.total}, {"activated", r.dense_params.activated}}},
           {"activated_gap", r.activated_gap},
           {"moe_flops_per_token", r.moe_flops},
           {"dense_flops_per_token", r.dense_flops},
           {"moe_wins", r.moe_wins()},
           {"runs", runs}};
}

void from_json(const json& j, BenchReport& r) {
  BenchReport out;
  try {
    out.moe_params = {j.at("moe_params").at("total").get<std::int64_t>(),
                      j.at("moe_params").at("activated").get<std::int64_t>()};
    out.dense_params = {j.at("dense_params").at("total").get<std::int64_t>(),
                        j.at("dense_params").at("activated").get<std::int64_t>()};
    out.activated_gap = j.at("activated_gap").get<double>();
    out.moe_flops = j.at("moe_flops_per_token").get<double>();
    out.dense_flops = j.at("dense_flops_per_token").get<double>();
    for (const auto& run : j.at("runs")) {
      out.runs.push_back({run.at("seed").get<std::uint64_t>(),
                          run.at("moe_loss").get<double>(),
                          run.at("dense_loss").get<double>(),
                          run.at("moe_seconds").get<double>(),
                          run.at("dense_seconds").get<double>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bench report: ") + e.what());
  }
  r = std::move(out);
}

BenchReport bench_accounting(const BenchPair& pair) {
  pair.validate();
  BenchReport report;
  report.moe_params = model::count_params(pair.moe);
  report.dense_params = model::count_params(pair.dense);
  report.activated_gap =
      std::abs(static_cast<double>(report.moe_params.activated - report.dense_params.activated)) /
      static_cast<double>(report.dense_params.activated);
  report.moe_flops = model::flops_per_token(pair.moe, pair.flops_context);
  report.dense_flops = model::flops_per_token(pair.dense, pair.flops_context);
  return report;
}

namespace {

data::SequenceStore regime_store(const std::filesystem::path& dir, std::uint64_t seed,
                                 std::size_t count, std::size_t length) {
  std::mt19937_64 rng(seed);
  const auto corpus = data::synthetic_corpus(rng, count, length, /*regimes=*/true);
  std::vector<data::StoreInput> inputs;
  for (const auto& s : corpus) inputs.push_back({s.values, s.domain});
  return data::write_store(dir, inputs);
}

struct Outcome {
  double loss = 0.0;
  double seconds = 0.0;
};

Outcome train_and_score(const model::ModelConfig& config, const train::TrainConfig& tc,
                        std::uint64_t seed, const data::SequenceStore& train_store,
                        const data::SequenceStore& eval_store, std::size_t eval_batches) {
  train::TrainConfig run = tc;
  run.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  train::Trainer<float> trainer(model::Model<float>::initialized(config, seed), run);
  trainer.run(train_store);
  Outcome out;
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // Identical held-out batches for both models of a seed.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t b = 0; b < eval_batches; ++b) {
    const auto batch = data::sample_batch(eval_store, rng, run.batch, run.context);
    out.loss += train::evaluate_loss(trainer.model(), batch.stream(), 0.0, run.delta).loss_ar;
  }
  out.loss /= static_cast<double>(eval_batches);
  return out;
}

}  // namespace

BenchReport bench_sparse_vs_dense(const BenchPair& pair,
                                  const std::filesystem::path& workdir) {
  BenchReport report = bench_accounting(pair);
  for (std::uint64_t seed : pair.seeds) {
    const auto tag = std::to_string(seed);
    const auto train_store = regime_store(workdir / ("train_" + tag), 2 * seed + 1,
                                          pair.corpus_size, pair.series_length);
    const auto eval_store = regime_store(workdir / ("eval_" + tag), 2 * seed + 2,
                                         pair.corpus_size, pair.series_length);
    const auto moe = train_and_score(pair.moe, pair.train, seed, train_store, eval_store,
                                     pair.eval_batches);
    const auto dense = train_and_score(pair.dense, pair.train, seed, train_store,
                                       eval_store, pair.eval_batches);
    report.runs.push_back({seed, moe.loss, dense.loss, moe.seconds, dense.seconds});
  }
  return report;
}

}  // namespace timemoe::eval
