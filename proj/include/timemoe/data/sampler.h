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

// Domain-weighted batch sampling with sequence packing.

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "timemoe/data/store.h"
#include "timemoe/model/layers.h"

namespace timemoe::data {

inline constexpr std::int32_t kPadId = -1;

struct PackedSegment {
  std::size_t row = 0;
  std::size_t start = 0;  // column of the first token in the row
  std::size_t length = 0;
  std::size_t sequence = 0;     // store index
  std::uint64_t crop_begin = 0;  // offset of the crop inside the sequence
  std::string domain;
};

// A flat token stream over all non-pad positions, row by row.
struct TokenStream {
  std::vector<double> values;
  model::SegmentLayout layout;
};

struct PackedBatch {
  std::size_t rows = 0;
  std::size_t context = 0;
  std::vector<float> tokens;          // rows * context, pads hold 0
  std::vector<std::int32_t> seq_ids;  // per row from 0; kPadId for padding
  std::vector<PackedSegment> segments;

  std::int32_t id_at(std::size_t row, std::size_t col) const {
    return seq_ids[row * context + col];
  }
  std::size_t pad_count() const;

  // masks[j][row * context + col] is 1 when the position is real and the
  // next horizons[j] points lie inside its own segment.
  std::vector<std::vector<std::uint8_t>> loss_masks(
      std::span<const int> horizons) const;

  // Each segment becomes its own sequence id in the stream.
  TokenStream stream() const;
};

// Crops that fit in `context` are packed into each row until no unused
// eligible sequence remains or fewer than 2 slots are left. Each crop:
// domain drawn by weight among domains with unused sequences, sequence
// drawn uniformly within the domain, crop length min(length, remaining) with
// a uniform start. A sequence is used at most once per row; sequences
// shorter than 2 points are never drawn.
//
// Empty `domain_weights` means equal weight per domain. Otherwise every
// domain in the store must have a non-negative weight (UsageError).
PackedBatch sample_batch(const SequenceStore& store, std::mt19937_64& rng,
                         std::size_t rows, std::size_t context,
                         const std::map<std::string, double>& domain_weights = {});

}  // namespace timemoe::data
