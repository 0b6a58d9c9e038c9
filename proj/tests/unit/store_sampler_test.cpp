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

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "common/test_util.h"
#include "json.hpp"
#include "timemoe/data/sampler.h"
#include "timemoe/data/store.h"
#include "timemoe/error.h"

namespace timemoe::data {
namespace {

using nlohmann::json;

std::vector<std::vector<double>> random_corpus(std::mt19937_64& rng, std::size_t count) {
  std::uniform_int_distribution<std::size_t> len(1, 300);
  std::normal_distribution<double> d(0.0, 5.0);
  std::vector<std::vector<double>> out(count);
  for (auto& s : out) {
    s.resize(len(rng));
    for (auto& x : s) x = d(rng);
  }
  return out;
}

std::vector<StoreInput> as_inputs(const std::vector<std::vector<double>>& c,
                                  const std::vector<std::string>& domains) {
  std::vector<StoreInput> in;
  for (std::size_t i = 0; i < c.size(); ++i) in.push_back({c[i], domains[i % domains.size()]});
  return in;
}

json read_meta(const std::filesystem::path& dir) {
  std::ifstream is(metafile_path(dir, "data"));
  return json::parse(is);
}

void write_meta(const std::filesystem::path& dir, const json& j) {
  std::ofstream os(metafile_path(dir, "data"));
  os << j.dump();
}

TEST(StoreTest, RoundTripIsExactAcrossShards) {
  testing::TempDir dir("store");
  std::mt19937_64 rng(1);
  const auto corpus = random_corpus(rng, 40);
  StoreWriteOptions opt;
  opt.max_points_per_file = 1000;
  auto store = write_store(dir.path(), as_inputs(corpus, {"x", "y", "z"}), opt);
  auto reopened = SequenceStore::open(dir.path());
  ASSERT_EQ(reopened.size(), 40u);
  std::uint64_t total = 0;
  std::set<std::string> files;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto v = reopened.read(i);
    ASSERT_EQ(v.size(), corpus[i].size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      ASSERT_EQ(v[k], static_cast<float>(corpus[i][k]));
    }
    total += corpus[i].size();
    files.insert(reopened.entries()[i].file);
  }
  EXPECT_EQ(reopened.total_points(), total);
  EXPECT_GT(files.size(), 1u);
  EXPECT_TRUE(files.count("data.bin"));
  EXPECT_TRUE(files.count("data_1.bin"));
  EXPECT_EQ(reopened.domains(), (std::vector<std::string>{"x", "y", "z"}));
  // Byte-level: the shard holds float32 little-endian points.
  const auto& e = reopened.entries()[0];
  std::ifstream is(dir.path() / e.file, std::ios::binary);
  is.seekg(static_cast<std::streamoff>(e.offset_points * 4));
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t{b[3]} << 24);
  EXPECT_EQ(std::bit_cast<float>(bits), static_cast<float>(corpus[0][0]));
}

TEST(StoreTest, MetafileTotalsMatch) {
  testing::TempDir dir("store");
  std::mt19937_64 rng(2);
  const auto corpus = random_corpus(rng, 10);
  write_store(dir.path(), as_inputs(corpus, {"a"}));
  const auto meta = read_meta(dir.path());
  EXPECT_EQ(meta["version"], 1);
  std::uint64_t sum = 0;
  for (const auto& s : meta["sequences"]) sum += s["length_points"].get<std::uint64_t>();
  EXPECT_EQ(sum * 4, std::filesystem::file_size(dir.path() / "data.bin"));
}

TEST(StoreTest, RangeErrors) {
  testing::TempDir dir("store");
  const std::vector<double> a = {1, 2, 3, 4, 5};
  auto store = write_store(dir.path(), std::vector<StoreInput>{{a, "d"}});
  EXPECT_THROW(store.read(1), RangeError);
  EXPECT_EQ(store.read_range(0, 1, 3), (std::vector<float>{2, 3, 4}));
  EXPECT_THROW(store.read_range(0, 3, 3), RangeError);
}

TEST(StoreTest, CorruptMetafileNamesEntry) {
  testing::TempDir dir("store");
  std::mt19937_64 rng(3);
  const auto corpus = random_corpus(rng, 4);
  write_store(dir.path(), as_inputs(corpus, {"a"}));
  const auto good = read_meta(dir.path());

  auto bad = good;
  bad["sequences"][2]["offset_points"] = 1000000;
  write_meta(dir.path(), bad);
  try {
    SequenceStore::open(dir.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
  }

  bad = good;
  bad["sequences"][1]["offset_points"] = 0;
  write_meta(dir.path(), bad);
  EXPECT_THROW(SequenceStore::open(dir.path()), FormatError);

  bad = good;
  bad["sequences"][0]["file"] = "nope.bin";
  write_meta(dir.path(), bad);
  EXPECT_THROW(SequenceStore::open(dir.path()), FormatError);

  bad = good;
  bad["version"] = 7;
  write_meta(dir.path(), bad);
  EXPECT_THROW(SequenceStore::open(dir.path()), FormatError);

  bad = good;
  bad["sequences"][0]["file"] = "../data.bin";
  write_meta(dir.path(), bad);
  EXPECT_THROW(SequenceStore::open(dir.path()), FormatError);
}

TEST(StoreTest, EmptyInputs) {
  testing::TempDir dir("store");
  EXPECT_THROW(write_store(dir.path(), std::vector<StoreInput>{}), UsageError);
  const std::vector<double> none;
  EXPECT_THROW(write_store(dir.path(), std::vector<StoreInput>{{none, "d"}}), UsageError);
  StoreWriteOptions opt;
  opt.allow_empty = true;
  auto store = write_store(dir.path(), std::vector<StoreInput>{}, opt);
  EXPECT_TRUE(SequenceStore::open(dir.path()).empty());
}

class SamplerTest : public ::testing::Test {
 protected:
  SequenceStore make(const std::vector<std::pair<std::size_t, std::string>>& spec) {
    std::vector<std::vector<double>> values;
    for (const auto& [len, _] : spec) {
      values.emplace_back(len);
      for (std::size_t i = 0; i < len; ++i) values.back()[i] = static_cast<double>(i + 1);
    }
    std::vector<StoreInput> in;
    for (std::size_t i = 0; i < spec.size(); ++i) in.push_back({values[i], spec[i].second});
    return write_store(dir_.path(), in);
  }
  testing::TempDir dir_{"sampler"};
};

TEST_F(SamplerTest, LongSequenceFillsRow) {
  auto store = make({{500, "a"}});
  std::mt19937_64 rng(1);
  auto b = sample_batch(store, rng, 1, 64);
  ASSERT_EQ(b.segments.size(), 1u);
  for (std::size_t c = 0; c < 64; ++c) EXPECT_EQ(b.id_at(0, c), 0);
  EXPECT_EQ(b.pad_count(), 0u);
  // The crop is a contiguous piece of the sequence.
  const auto crop = b.segments[0].crop_begin;
  for (std::size_t c = 0; c < 64; ++c) EXPECT_EQ(b.tokens[c], static_cast<float>(crop + c + 1));
}

TEST_F(SamplerTest, TwoShortSequencesPackIntoOneRow) {
  auto store = make({{10, "a"}, {10, "a"}});
  std::mt19937_64 rng(2);
  auto b = sample_batch(store, rng, 1, 32);
  std::vector<std::int32_t> expect(32, kPadId);
  for (std::size_t i = 0; i < 10; ++i) expect[i] = 0;
  for (std::size_t i = 10; i < 20; ++i) expect[i] = 1;
  EXPECT_EQ(b.seq_ids, expect);
  EXPECT_EQ(b.pad_count(), 12u);
  const std::vector<int> horizons = {1, 8};
  const auto masks = b.loss_masks(horizons);
  EXPECT_EQ(masks[0][8], 1);
  EXPECT_EQ(masks[0][9], 0);    // last point of a segment has no target
  EXPECT_EQ(masks[1][1], 1);
  EXPECT_EQ(masks[1][2], 0);
  EXPECT_EQ(masks[0][25], 0);   // padding
  const auto s = b.stream();
  EXPECT_EQ(s.values.size(), 20u);
  EXPECT_EQ(s.layout.positions[10], 0);
}

TEST_F(SamplerTest, SeqIdsNonDecreasingWithinRows) {
  std::vector<std::pair<std::size_t, std::string>> spec;
  for (std::size_t i = 0; i < 30; ++i) spec.push_back({1 + i * 7 % 53, i % 2 ? "a" : "b"});
  auto store = make(spec);
  std::mt19937_64 rng(3);
  auto b = sample_batch(store, rng, 16, 128);
  for (std::size_t r = 0; r < 16; ++r) {
    std::int32_t prev = 0;
    std::set<std::size_t> used;
    for (std::size_t c = 0; c < 128; ++c) {
      const auto id = b.id_at(r, c);
      if (id == kPadId) continue;
      EXPECT_GE(id, prev);
      prev = id;
    }
    for (const auto& seg : b.segments) {
      if (seg.row != r) continue;
      EXPECT_TRUE(used.insert(seg.sequence).second);
      EXPECT_GE(seg.length, 2u);
    }
  }
}

TEST_F(SamplerTest, DomainFrequenciesWithinBinomialBounds) {
  std::vector<std::pair<std::size_t, std::string>> spec;
  for (int i = 0; i < 5; ++i) spec.push_back({100, "A"});
  for (int i = 0; i < 5; ++i) spec.push_back({100, "B"});
  auto store = make(spec);
  std::mt19937_64 rng(4);
  const std::size_t n = 10000;
  auto b = sample_batch(store, rng, n, 16, {{"A", 0.9}, {"B", 0.1}});
  ASSERT_EQ(b.segments.size(), n);  // one crop per row
  std::size_t a = 0;
  for (const auto& s : b.segments) a += s.domain == "A";
  const double sigma = std::sqrt(n * 0.9 * 0.1);
  EXPECT_NEAR(static_cast<double>(a), 0.9 * n, 3 * sigma);
}

TEST_F(SamplerTest, WeightsMustCoverDomains) {
  auto store = make({{50, "A"}, {50, "B"}});
  std::mt19937_64 rng(5);
  EXPECT_THROW(sample_batch(store, rng, 1, 16, {{"A", 1.0}}), UsageError);
  EXPECT_THROW(sample_batch(store, rng, 1, 16, {{"A", 1.0}, {"B", -1.0}}), UsageError);
}

}  // namespace
}  // namespace timemoe::data
