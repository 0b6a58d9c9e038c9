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

#include "timemoe/eval/evaluate.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>

#include "timemoe/error.h"

namespace timemoe::eval {

using nlohmann::json;

void EvalSpec::validate() const {
  if (horizons.empty() || horizons.size() != contexts.size()) {
    throw ConfigError("eval spec needs as many contexts as horizons (" +
                      std::to_string(horizons.size()) + " vs " +
                      std::to_string(contexts.size()) + ")");
  }
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] < 1 || contexts[i] < 1) {
      throw ConfigError("eval horizons and contexts must be positive");
    }
  }
  if (stride < 1) throw ConfigError("eval stride must be >= 1");
}

void to_json(json& j, const EvalSpec& s) {
  j = json{{"dataset", s.dataset},
           {"name", s.name},
           {"horizons", s.horizons},
           {"contexts", s.contexts},
           {"mode", s.mode == EvalMode::kFineTune ? "fine_tune" : "zero_shot"},
           {"standardize", s.standardize},
           {"stride", s.stride},
           {"channels", s.channels},
           {"finetune", s.finetune},
           {"ensemble", s.ensemble}};
  j["split"] = s.split ? json{{"train", s.split->train},
                              {"val", s.split->val},
                              {"test", s.split->test}}
                       : json(nullptr);
}

void from_json(const json& j, EvalSpec& s) {
  static const std::set<std::string> known = {
      "dataset", "name", "horizons", "contexts", "mode", "standardize", "stride",
      "split", "channels", "finetune", "ensemble"};
  if (!j.is_object()) throw ConfigError("eval spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown eval spec key '" + key + "'");
  }
  EvalSpec out;
  try {
    out.dataset = j.value("dataset", out.dataset);
    out.name = j.value("name", out.name);
    out.horizons = j.value("horizons", out.horizons);
    out.contexts = j.value("contexts", out.contexts);
    const std::string mode = j.value("mode", std::string("zero_shot"));
    if (mode == "zero_shot") {
      out.mode = EvalMode::kZeroShot;
    } else if (mode == "fine_tune") {
      out.mode = EvalMode::kFineTune;
    } else {
      throw ConfigError("eval mode must be zero_shot or fine_tune, got '" + mode + "'");
    }
    out.standardize = j.value("standardize", out.standardize);
    out.stride = j.value("stride", out.stride);
    out.channels = j.value("channels", out.channels);
    out.ensemble = j.value("ensemble", out.ensemble);
    if (j.contains("finetune")) out.finetune = j.at("finetune").get<train::TrainConfig>();
    if (j.contains("split") && !j.at("split").is_null()) {
      const auto& sp = j.at("split");
      out.split = data::SplitProtocol{sp.at("train").get<std::size_t>(),
                                      sp.at("val").get<std::size_t>(),
                                      sp.at("test").get<std::size_t>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("eval spec: ") + e.what());
  }
  out.validate();
  s = std::move(out);
}

std::vector<WindowIndex> rolling_windows(const data::SplitIndices& split,
                                         std::size_t context, std::size_t horizon,
                                         std::size_t stride) {
  if (context < 1 || horizon < 1 || stride < 1) {
    throw UsageError("rolling_windows: context, horizon and stride must be positive");
  }
  if (context > split.test_begin) {
    throw WindowingError("context " + std::to_string(context) + " exceeds the " +
                         std::to_string(split.test_begin) +
                         " rows of history before the test split");
  }
  if (split.test_end < split.test_begin + horizon) {
    throw WindowingError("test split of " +
                         std::to_string(split.test_end - split.test_begin) +
                         " rows is shorter than horizon " + std::to_string(horizon));
  }
  std::vector<WindowIndex> out;
  for (std::size_t t = split.test_begin; t + horizon <= split.test_end; t += stride) {
    out.push_back({t - context, t, t, t + horizon});
  }
  return out;
}

std::size_t audit_windows(std::span<const WindowIndex> windows,
                          const data::SplitIndices& split) {
  std::size_t bad = 0;
  for (const auto& w : windows) {
    const bool leak = w.ctx_begin > w.ctx_end || w.ctx_end > w.tgt_begin ||
                      w.tgt_begin < split.test_begin || w.tgt_end > split.test_end ||
                      w.tgt_begin >= w.tgt_end;
    bad += leak;
  }
  return bad;
}

void EvalReport::finalize() {
  averages.clear();
  std::vector<std::size_t> counts;
  for (const auto& row : rows) {
    auto it = std::find_if(averages.begin(), averages.end(),
                           [&](const EvalAverage& a) { return a.dataset == row.dataset; });
    if (it == averages.end()) {
      averages.push_back({row.dataset, 0.0, 0.0});
      counts.push_back(0);
      it = averages.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - averages.begin());
    it->mse += row.mse;
    it->mae += row.mae;
    ++counts[k];
  }
  for (std::size_t k = 0; k < averages.size(); ++k) {
    averages[k].mse /= static_cast<double>(counts[k]);
    averages[k].mae /= static_cast<double>(counts[k]);
  }
}

void to_json(json& j, const EvalReport& r) {
  json rows = json::array(), avgs = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"dataset", row.dataset}, {"horizon", row.horizon},
                    {"context", row.context}, {"windows", row.windows},
                    {"mse", row.mse},         {"mae", row.mae}});
  }
  for (const auto& a : r.averages) {
    avgs.push_back({{"dataset", a.dataset}, {"mse", a.mse}, {"mae", a.mae}});
  }
  j = json{{"rows", rows},
           {"averages", avgs},
           {"meta",
            {{"model_hash", r.model_hash},
             {"config", r.model_config},
             {"seed", r.seed},
             {"mode", r.mode},
             {"standardized", r.standardized}}}};
}

void from_json(const json& j, EvalReport& r) {
  EvalReport out;
  try {
    for (const auto& row : j.at("rows")) {
      out.rows.push_back({row.at("dataset").get<std::string>(),
                          row.at("horizon").get<int>(), row.at("context").get<int>(),
                          row.at("windows").get<std::size_t>(),
                          row.at("mse").get<double>(), row.at("mae").get<double>()});
    }
    for (const auto& a : j.at("averages")) {
      out.averages.push_back({a.at("dataset").get<std::string>(),
                              a.at("mse").get<double>(), a.at("mae").get<double>()});
    }
    const auto& meta = j.at("meta");
    out.model_hash = meta.at("model_hash").get<std::string>();
    out.model_config = meta.at("config");
    out.seed = meta.at("seed").get<std::uint64_t>();
    out.mode = meta.at("mode").get<std::string>();
    out.standardized = meta.at("standardized").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
  r = std::move(out);
}

std::vector<std::vector<double>> LastValueForecaster::predict_heads(
    std::span<const double> context) const {
  if (context.empty()) throw UsageError("LastValueForecaster: empty context");
  std::vector<std::vector<double>> out;
  for (int p : horizons_) out.emplace_back(static_cast<std::size_t>(p), context.back());
  return out;
}

namespace {

data::SplitIndices resolve_split(const data::CsvTable& table, const EvalSpec& spec) {
  data::SplitProtocol protocol;
  if (spec.split) {
    protocol = *spec.split;
  } else if (auto preset = data::split_preset(spec.name)) {
    protocol = *preset;
  } else {
    protocol = data::ratio_split(table.rows);
  }
  return data::apply_split(table.rows, protocol);
}

data::CsvTable prepared(const data::CsvTable& table, const data::SplitIndices& split,
                        const EvalSpec& spec) {
  if (!spec.standardize) return table;
  return data::Standardizer::fit(table, split.train_begin, split.train_end).apply(table);
}

}  // namespace

EvalReport evaluate_forecaster(const heads::Forecaster& model,
                               const data::CsvTable& table, const EvalSpec& spec) {
  spec.validate();
  const auto split = resolve_split(table, spec);
  const auto values = prepared(table, split, spec);
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < values.channels(); ++c) columns.push_back(values.column(c));

  EvalReport report;
  report.standardized = spec.standardize;
  report.mode = spec.mode == EvalMode::kFineTune ? "fine_tune" : "zero_shot";
  const std::string label = spec.name.empty() ? spec.dataset : spec.name;
  heads::ForecastOptions options;
  options.ensemble = spec.ensemble;
  for (std::size_t k = 0; k < spec.horizons.size(); ++k) {
    const auto horizon = static_cast<std::size_t>(spec.horizons[k]);
    const auto context = static_cast<std::size_t>(spec.contexts[k]);
    const auto windows = rolling_windows(split, context, horizon, spec.stride);
    if (audit_windows(windows, split) != 0) {
      throw WindowingError("rolling windows leak test targets into contexts");
    }
    double sq = 0.0, ab = 0.0;
    std::size_t n = 0;
    for (const auto& w : windows) {
      for (const auto& col : columns) {
        std::span<const double> ctx(col.data() + w.ctx_begin, w.ctx_end - w.ctx_begin);
        const auto pred = heads::autoregressive_forecast(
            model, ctx, static_cast<int>(horizon), options);
        for (std::size_t h = 0; h < horizon; ++h) {
          const double d = col[w.tgt_begin + h] - pred[h];
          sq += d * d;
          ab += std::abs(d);
        }
        n += horizon;
      }
    }
    report.rows.push_back({label, static_cast<int>(horizon), static_cast<int>(context),
                           windows.size(), sq / static_cast<double>(n),
                           ab / static_cast<double>(n)});
  }
  report.finalize();
  return report;
}

template <typename T>
model::Model<T> finetune_one_epoch(const model::Model<T>& model,
                                   const data::CsvTable& table,
                                   const data::SplitIndices& split,
                                   const EvalSpec& spec) {
  const auto values = prepared(table, split, spec);
  train::TrainConfig config = spec.finetune;
  const std::size_t crop = std::min<std::size_t>(
      config.context, static_cast<std::size_t>(model.config().max_context));
  std::vector<std::vector<double>> crops;
  for (std::size_t c = 0; c < values.channels(); ++c) {
    for (std::size_t b = split.train_begin; b + 2 <= split.train_end; b += crop) {
      const std::size_t e = std::min(b + crop, split.train_end);
      std::vector<double> piece;
      for (std::size_t r = b; r < e; ++r) piece.push_back(values.at(r, c));
      crops.push_back(std::move(piece));
    }
  }
  if (crops.empty()) throw DataError("fine-tune: train split too short");
  const std::size_t steps = (crops.size() + config.batch - 1) / config.batch;
  config.steps = static_cast<std::int64_t>(steps);
  config.warmup_steps = std::min(config.warmup_steps, config.steps);
  train::Trainer<T> trainer(model.clone(), config);
  for (std::size_t s = 0; s < steps; ++s) {
    data::TokenStream stream;
    std::vector<std::int32_t> ids;
    const std::size_t end = std::min(crops.size(), (s + 1) * config.batch);
    for (std::size_t i = s * config.batch; i < end; ++i) {
      stream.values.insert(stream.values.end(), crops[i].begin(), crops[i].end());
      ids.insert(ids.end(), crops[i].size(), static_cast<std::int32_t>(i));
    }
    stream.layout = model::SegmentLayout::from_seq_ids(ids);
    trainer.step(stream);
  }
  return trainer.model().clone();
}

EvalReport eval_model(const model::Model<float>& model, const EvalSpec& spec,
                      std::uint64_t seed) {
  spec.validate();
  data::CsvSchema schema;
  schema.channels = spec.channels;
  const auto table = data::load_csv(spec.dataset, schema);
  EvalReport report;
  if (spec.mode == EvalMode::kFineTune) {
    const auto split = resolve_split(table, spec);
    auto tuned = finetune_one_epoch(model, table, split, spec);
    report = evaluate_forecaster(tuned, table, spec);
    report.model_hash = model_hash(tuned);
  } else {
    report = evaluate_forecaster(model, table, spec);
    report.model_hash = model_hash(model);
  }
  report.model_config = model.config();
  report.seed = seed;
  return report;
}

template <typename T>
std::string model_hash(const model::Model<T>& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::string doc = json(model.config()).dump();
  mix(doc.data(), doc.size());
  for (const auto& p : model.parameters()) {
    mix(p.name.data(), p.name.size());
    for (T v : p.tensor.data()) {
      const float f = static_cast<float>(v);
      mix(&f, sizeof f);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template model::Model<float> finetune_one_epoch(const model::Model<float>&,
                                                const data::CsvTable&,
                                                const data::SplitIndices&,
                                                const EvalSpec&);
template model::Model<double> finetune_one_epoch(const model::Model<double>&,
                                                 const data::CsvTable&,
                                                 const data::SplitIndices&,
                                                 const EvalSpec&);
template std::string model_hash(const model::Model<float>&);
template std::string model_hash(const model::Model<double>&);

}  // namespace timemoe::eval
