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

#include "timemoe/train/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "timemoe/error.h"

namespace timemoe::train {

namespace {

template <typename U>
void put_le(std::ostream& os, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
bool get_le(std::istream& is, U& value) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    value |= static_cast<U>(bytes[i]) << (8 * i);
  return true;
}

std::string optim_name(const char* which, const std::string& param) {
  return std::string("optim.") + which + "." + param;
}

}  // namespace

void write_checkpoint_file(const std::filesystem::path& path,
                           const CheckpointFile& file) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 4);
  put_le<std::uint32_t>(os, kCheckpointVersion);
  const std::string doc = file.document.dump();
  put_le<std::uint64_t>(os, doc.size());
  os.write(doc.data(), static_cast<std::streamsize>(doc.size()));
  for (const auto& t : file.tensors) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_le<std::uint64_t>(os, d);
    for (float v : t.values) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw FormatError("failed writing checkpoint " + path.string());
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a checkpoint (bad magic)");
  }
  std::uint32_t version = 0;
  if (!get_le(is, version) || version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint64_t doc_len = 0;
  if (!get_le(is, doc_len)) throw FormatError("truncated checkpoint header");
  std::string doc(doc_len, '\0');
  if (!is.read(doc.data(), static_cast<std::streamsize>(doc_len))) {
    throw FormatError("truncated checkpoint document");
  }
  CheckpointFile file;
  try {
    file.document = nlohmann::json::parse(doc);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint document: ") + e.what());
  }
  while (true) {
    std::uint32_t name_len = 0;
    if (!get_le(is, name_len)) break;  // clean EOF
    StoredTensor t;
    t.name.resize(name_len);
    std::uint32_t rank = 0;
    if (!is.read(t.name.data(), name_len) || !get_le(is, rank)) {
      throw FormatError("truncated tensor record header");
    }
    std::uint64_t count = 1;
    t.dims.resize(rank);
    for (auto& d : t.dims) {
      if (!get_le(is, d)) throw FormatError("truncated dims for " + t.name);
      count *= d;
    }
    t.values.resize(count);
    for (auto& v : t.values) {
      std::uint32_t bits = 0;
      if (!get_le(is, bits)) throw FormatError("truncated payload for " + t.name);
      v = std::bit_cast<float>(bits);
    }
    file.tensors.push_back(std::move(t));
  }
  return file;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path,
                     const model::Model<T>& model,
                     const OptimizerState<T>* optimizer, std::int64_t step,
                     const nlohmann::json& train_config) {
  CheckpointFile file;
  file.document = {{"model", model.config()},
                   {"step", step},
                   {"has_optimizer", optimizer != nullptr},
                   {"optimizer_step", optimizer ? optimizer->step : 0}};
  if (!train_config.is_null()) file.document["train"] = train_config;
  auto params = model.parameters();
  auto store = [&](const std::string& name, const num::Shape& shape,
                   std::span<const T> values) {
    StoredTensor t;
    t.name = name;
    t.dims.assign(shape.begin(), shape.end());
    t.values.assign(values.begin(), values.end());
    file.tensors.push_back(std::move(t));
  };
  for (const auto& p : params) store(p.name, p.tensor.shape(), p.tensor.data());
  if (optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      store(optim_name("m", params[i].name), params[i].tensor.shape(), optimizer->m[i]);
      store(optim_name("v", params[i].name), params[i].tensor.shape(), optimizer->v[i]);
    }
  }
  write_checkpoint_file(path, file);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  CheckpointFile file = read_checkpoint_file(path);
  model::ModelConfig config;
  try {
    config = file.document.at("model").get<model::ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint model config: ") + e.what());
  }
  std::map<std::string, const StoredTensor*> by_name;
  for (const auto& t : file.tensors) by_name[t.name] = &t;

  auto fetch = [&](const std::string& name, const num::Shape& shape,
                   std::span<T> out) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing " + name);
    const StoredTensor& t = *it->second;
    if (!std::equal(t.dims.begin(), t.dims.end(), shape.begin(), shape.end())) {
      throw FormatError("checkpoint tensor " + name + " has the wrong shape");
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(t.values[i]);
  };

  Checkpoint<T> ckpt{model::Model<T>(config), std::nullopt,
                     file.document.value("step", std::int64_t{0}),
                     file.document.value("train", nlohmann::json())};
  auto params = ckpt.model.parameters();
  for (auto& p : params) fetch(p.name, p.tensor.shape(), p.tensor.mutable_data());
  if (file.document.value("has_optimizer", false)) {
    auto state = OptimizerState<T>::for_params(params);
    state.step = file.document.value("optimizer_step", std::int64_t{0});
    for (std::size_t i = 0; i < params.size(); ++i) {
      fetch(optim_name("m", params[i].name), params[i].tensor.shape(), state.m[i]);
      fetch(optim_name("v", params[i].name), params[i].tensor.shape(), state.v[i]);
    }
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

template void save_checkpoint(const std::filesystem::path&,
                              const model::Model<float>&,
                              const OptimizerState<float>*, std::int64_t,
                              const nlohmann::json&);
template void save_checkpoint(const std::filesystem::path&,
                              const model::Model<double>&,
                              const OptimizerState<double>*, std::int64_t,
                              const nlohmann::json&);
template Checkpoint<float> load_checkpoint(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace timemoe::train
