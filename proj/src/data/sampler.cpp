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

#include "timemoe/data/sampler.h"

#include <algorithm>

#include "timemoe/error.h"

namespace timemoe::data {

std::size_t PackedBatch::pad_count() const {
  return static_cast<std::size_t>(std::count(seq_ids.begin(), seq_ids.end(), kPadId));
}

std::vector<std::vector<std::uint8_t>> PackedBatch::loss_masks(
    std::span<const int> horizons) const {
  std::vector<std::vector<std::uint8_t>> masks;
  for (int p : horizons) {
    if (p < 1) throw UsageError("loss_masks: horizons must be positive");
    std::vector<std::uint8_t> mask(rows * context, 0);
    for (const auto& s : segments) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(p) < s.length; ++i) {
        mask[s.row * context + s.start + i] = 1;
      }
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

TokenStream PackedBatch::stream() const {
  TokenStream out;
  std::vector<std::int32_t> ids;
  std::int32_t next = 0;
  for (const auto& s : segments) {
    for (std::size_t i = 0; i < s.length; ++i) {
      out.values.push_back(tokens[s.row * context + s.start + i]);
      ids.push_back(next);
    }
    ++next;
  }
  out.layout = model::SegmentLayout::from_seq_ids(ids);
  return out;
}

PackedBatch sample_batch(const SequenceStore& store, std::mt19937_64& rng,
                         std::size_t rows, std::size_t context,
                         const std::map<std::string, double>& domain_weights) {
  if (rows == 0 || context < 2) {
    throw UsageError("sample_batch: need rows >= 1 and context >= 2");
  }
  const auto domains = store.domains();
  std::vector<double> weights;
  for (const auto& d : domains) {
    if (domain_weights.empty()) {
      weights.push_back(1.0);
      continue;
    }
    auto it = domain_weights.find(d);
    if (it == domain_weights.end() || !(it->second >= 0.0)) {
      throw UsageError("sample_batch: no valid weight for domain '" + d + "'");
    }
    weights.push_back(it->second);
  }
  // Eligible sequences per domain, in store order.
  std::vector<std::vector<std::size_t>> pool(domains.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entries()[i];
    if (e.length_points < 2) continue;
    const auto d = std::lower_bound(domains.begin(), domains.end(), e.domain) -
                   domains.begin();
    pool[static_cast<std::size_t>(d)].push_back(i);
  }
  bool any = false;
  for (std::size_t d = 0; d < pool.size(); ++d) any |= (!pool[d].empty() && weights[d] > 0);
  if (!any) throw DataError("sample_batch: no sequence with >= 2 points and positive weight");

  PackedBatch batch;
  batch.rows = rows;
  batch.context = context;
  batch.tokens.assign(rows * context, 0.0f);
  batch.seq_ids.assign(rows * context, kPadId);
  for (std::size_t r = 0; r < rows; ++r) {
    auto unused = pool;
    std::size_t col = 0;
    std::int32_t id = 0;
    while (context - col >= 2) {
      std::vector<double> w(domains.size());
      bool open = false;
      for (std::size_t d = 0; d < w.size(); ++d) {
        w[d] = unused[d].empty() ? 0.0 : weights[d];
        open |= w[d] > 0.0;
      }
      if (!open) break;
      const std::size_t d = std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
      auto& candidates = unused[d];
      const std::size_t pick =
          std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
      const std::size_t seq = candidates[pick];
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));

      const std::uint64_t len = store.entries()[seq].length_points;
      const std::uint64_t crop = std::min<std::uint64_t>(len, context - col);
      const std::uint64_t begin =
          std::uniform_int_distribution<std::uint64_t>(0, len - crop)(rng);
      const auto values = store.read_range(seq, begin, crop);
      for (std::size_t i = 0; i < crop; ++i) {
        batch.tokens[r * context + col + i] = values[i];
        batch.seq_ids[r * context + col + i] = id;
      }
      batch.segments.push_back({r, col, static_cast<std::size_t>(crop), seq, begin,
                                domains[d]});
      col += crop;
      ++id;
    }
  }
  return batch;
}

}  // namespace timemoe::data
