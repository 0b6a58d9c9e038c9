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

// timemoe: clean, pack, train, forecast, eval, params and bench.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "timemoe/data/clean.h"
#include "timemoe/data/csv.h"
#include "timemoe/data/store.h"
#include "timemoe/error.h"
#include "timemoe/eval/bench.h"
#include "timemoe/eval/evaluate.h"
#include "timemoe/heads/heads.h"
#include "timemoe/model/config.h"
#include "timemoe/model/model.h"
#include "timemoe/train/checkpoint.h"
#include "timemoe/train/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace timemoe;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// A model config file is either a bare ModelConfig document or an object
// with a "model" member; the names base / large / ultra select presets.
model::ModelConfig load_model_config(const std::string& arg) {
  if (arg == "base") return model::base_config();
  if (arg == "large") return model::large_config();
  if (arg == "ultra") return model::ultra_config();
  const json doc = read_json(arg);
  return (doc.contains("model") ? doc.at("model") : doc).get<model::ModelConfig>();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

struct CleanArgs {
  std::string input, output, domain = "default";
  std::size_t window = 128, min_len = 256;
  double threshold = 0.2;
};

int run_clean(const CleanArgs& a) {
  data::CleanConfig config;
  config.window_size = a.window;
  config.zero_threshold = a.threshold;
  config.min_len = a.min_len;
  config.validate();
  data::CsvSchema schema;
  schema.empty_as_nan = true;
  const auto table = data::load_csv(a.input, schema);
  std::vector<data::CleanSeries> cleaned;
  for (std::size_t c = 0; c < table.channels(); ++c) {
    data::RawSeries raw{table.column(c), a.domain, ""};
    for (auto& s : data::clean_series(raw, config, table.columns[c])) {
      cleaned.push_back(std::move(s));
    }
  }
  std::vector<data::StoreInput> inputs;
  for (const auto& s : cleaned) inputs.push_back({s.values, a.domain});
  data::StoreWriteOptions options;
  options.name = "clean";
  options.allow_empty = true;
  const auto store = data::write_store(a.output, inputs, options);
  if (store.empty()) {
    std::cerr << "warning: no sequence survived cleaning; wrote an empty store to "
              << a.output << "\n";
  }
  std::cout << json{{"sequences", store.size()}, {"points", store.total_points()}}.dump()
            << "\n";
  return 0;
}

int run_pack(const std::string& clean_dir, const std::string& out_dir,
             std::uint64_t max_points) {
  std::vector<std::vector<double>> values;
  std::vector<std::string> domains;
  std::vector<fs::path> metas;
  for (const auto& entry : fs::directory_iterator(clean_dir)) {
    const auto name = entry.path().filename().string();
    const std::string suffix = ".meta.json";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      metas.push_back(entry.path());
    }
  }
  std::sort(metas.begin(), metas.end());
  for (const auto& meta : metas) {
    const auto file = meta.filename().string();
    const auto store = data::SequenceStore::open(clean_dir, file.substr(0, file.size() - 10));
    for (std::size_t i = 0; i < store.size(); ++i) {
      const auto v = store.read(i);
      values.emplace_back(v.begin(), v.end());
      domains.push_back(store.entries()[i].domain);
    }
  }
  std::vector<data::StoreInput> inputs;
  for (std::size_t i = 0; i < values.size(); ++i) inputs.push_back({values[i], domains[i]});
  data::StoreWriteOptions options;
  options.max_points_per_file = max_points;
  options.allow_empty = true;
  const auto store = data::write_store(out_dir, inputs, options);
  if (store.empty()) std::cerr << "warning: packed store is empty\n";
  std::cout << json{{"sequences", store.size()}, {"points", store.total_points()}}.dump()
            << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& store_dir,
              const std::string& out, const std::string& resume,
              const std::string& metrics_path, std::optional<std::uint64_t> seed) {
  const json doc = read_json(config_path);
  if (!doc.contains("model")) throw ConfigError("train config needs a \"model\" member");
  const auto mc = doc.at("model").get<model::ModelConfig>();
  auto tc = doc.value("train", json::object()).get<train::TrainConfig>();
  if (seed) tc.seed = *seed;
  const auto store = data::SequenceStore::open(store_dir);
  if (store.empty()) throw DataError("store " + store_dir + " holds no sequences");

  std::optional<train::Trainer<float>> trainer;
  if (!resume.empty()) {
    auto ckpt = train::load_checkpoint<float>(resume);
    if (!(ckpt.model.config() == mc)) {
      throw CompatibilityError("model config differs from the checkpoint being resumed");
    }
    trainer.emplace(train::Trainer<float>::resume(std::move(ckpt), tc));
  } else {
    trainer.emplace(model::Model<float>::initialized(mc, tc.seed), tc);
  }
  std::ofstream metrics_file;
  if (!metrics_path.empty()) {
    metrics_file.open(metrics_path, std::ios::app);
    if (!metrics_file) throw UsageError("cannot write " + metrics_path);
  }
  std::ostream& log = metrics_path.empty() ? std::cout : metrics_file;
  trainer->run(store, [&](const train::StepMetrics& m) { log << m.to_json().dump() << "\n"; },
               out);
  return 0;
}

int run_forecast(const std::string& ckpt_path, const std::string& input, int horizon,
                 int context, bool ensemble, bool scale, const std::string& out) {
  const auto ckpt = train::load_checkpoint<float>(ckpt_path);
  const auto table = data::load_csv(input);
  if (table.rows == 0) throw DataError("forecast input has no rows");
  const std::size_t ctx = context > 0 ? std::min<std::size_t>(context, table.rows) : table.rows;
  heads::ForecastOptions options;
  options.ensemble = ensemble;
  std::vector<std::vector<double>> preds;
  for (std::size_t c = 0; c < table.channels(); ++c) {
    auto col = table.column(c);
    std::vector<double> window(col.end() - static_cast<std::ptrdiff_t>(ctx), col.end());
    // Instance normalization with the context's own statistics.
    double mean = 0.0, sd = 1.0;
    if (scale) {
      for (double v : window) mean += v;
      mean /= static_cast<double>(window.size());
      double var = 0.0;
      for (double v : window) var += (v - mean) * (v - mean);
      sd = std::sqrt(var / static_cast<double>(window.size()));
      if (!(sd > 0.0)) sd = 1.0;
      for (double& v : window) v = (v - mean) / sd;
    }
    auto p = heads::autoregressive_forecast(ckpt.model, window, horizon, options);
    for (double& v : p) v = v * sd + mean;
    preds.push_back(std::move(p));
  }
  data::CsvTable result;
  result.columns = table.columns;
  result.rows = static_cast<std::size_t>(horizon);
  for (int h = 0; h < horizon; ++h)
    for (const auto& p : preds) result.values.push_back(p[h]);
  write_text(out, data::format_csv(result));
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& spec_path,
             const std::string& out, std::uint64_t seed) {
  const auto ckpt = train::load_checkpoint<float>(ckpt_path);
  const auto spec = read_json(spec_path).get<eval::EvalSpec>();
  const auto report = eval::eval_model(ckpt.model, spec, seed);
  write_text(out, json(report).dump(2) + "\n");
  return 0;
}

int run_params(const std::string& config) {
  const auto mc = load_model_config(config);
  const auto count = model::count_params(mc);
  std::cout << "total: " << count.total << "\n"
            << "activated: " << count.activated << "\n";
  return 0;
}

int run_bench(const std::string& pair_path, const std::string& workdir,
              const std::string& out, std::optional<std::uint64_t> seed) {
  auto pair = read_json(pair_path).get<eval::BenchPair>();
  if (seed) pair.seeds = {*seed};
  const auto report = eval::bench_sparse_vs_dense(pair, workdir);
  write_text(out, json(report).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-MoE desk-scale toolkit"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Random seed (overrides config files)");

  CleanArgs clean_args;
  auto* clean = app.add_subcommand("clean", "Clean every column of a CSV into a store");
  clean->add_option("input", clean_args.input, "Raw CSV")->required()->check(CLI::ExistingFile);
  clean->add_option("output", clean_args.output, "Output directory")->required();
  clean->add_option("--window", clean_args.window, "Window size");
  clean->add_option("--threshold", clean_args.threshold, "Zero-ratio threshold");
  clean->add_option("--min-len", clean_args.min_len, "Minimum kept length");
  clean->add_option("--domain", clean_args.domain, "Domain tag for the output");

  std::string pack_in, pack_out;
  std::uint64_t pack_max = std::uint64_t{1} << 26;
  auto* pack = app.add_subcommand("pack", "Merge cleaned stores into one training store");
  pack->add_option("cleandir", pack_in, "Directory of cleaned stores")
      ->required()
      ->check(CLI::ExistingDirectory);
  pack->add_option("store", pack_out, "Output store directory")->required();
  pack->add_option("--max-points-per-file", pack_max, "Shard size in points");

  std::string train_config, train_store, train_out, train_resume, train_metrics;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a store");
  train_cmd->add_option("--config", train_config, "JSON with model and train members")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--store", train_store, "Store directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--resume", train_resume, "Checkpoint to resume from")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--metrics", train_metrics, "Metrics log (JSON lines)");

  std::string fc_ckpt, fc_input, fc_out;
  int fc_horizon = 0, fc_context = 0;
  bool fc_ensemble = false, fc_raw = false;
  auto* forecast = app.add_subcommand("forecast", "Forecast every column of a CSV");
  forecast->add_option("--ckpt", fc_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  forecast->add_option("--input", fc_input, "Context CSV")->required()->check(CLI::ExistingFile);
  forecast->add_option("--horizon", fc_horizon, "Forecast length")
      ->required()
      ->check(CLI::PositiveNumber);
  forecast->add_option("--context", fc_context, "Use only the last N rows");
  forecast->add_flag("--ensemble", fc_ensemble, "Average overlapping heads");
  forecast->add_flag("--no-scale", fc_raw, "Skip per-window standardization");
  forecast->add_option("--out", fc_out, "Output CSV (default stdout)");

  std::string ev_ckpt, ev_spec, ev_out;
  auto* ev = app.add_subcommand("eval", "Rolling benchmark evaluation");
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--spec", ev_spec, "Eval spec JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Report path (default stdout)");

  std::string params_config;
  auto* params = app.add_subcommand("params", "Print total and activated parameters");
  params->add_option("--config", params_config, "Config JSON, or base / large / ultra")
      ->required();

  std::string bench_pair, bench_workdir = "bench_work", bench_out;
  auto* bench = app.add_subcommand("bench", "Sparse vs dense comparison");
  bench->add_option("--pair", bench_pair, "Bench pair JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--workdir", bench_workdir, "Scratch directory for corpora");
  bench->add_option("--out", bench_out, "Report path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*clean) return run_clean(clean_args);
    if (*pack) return run_pack(pack_in, pack_out, pack_max);
    if (*train_cmd) {
      return run_train(train_config, train_store, train_out, train_resume, train_metrics,
                       seed);
    }
    if (*forecast) {
      return run_forecast(fc_ckpt, fc_input, fc_horizon, fc_context, fc_ensemble, !fc_raw,
                          fc_out);
    }
    if (*ev) return run_eval(ev_ckpt, ev_spec, ev_out, seed.value_or(0));
    if (*params) return run_params(params_config);
    if (*bench) return run_bench(bench_pair, bench_workdir, bench_out, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
