// Copyright 2026-present the tierq authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Sampled equi-width histograms and the estimates derived from them.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tierq/columnar.hpp"

namespace tierq {

struct HistogramOptions {
    double sample_rate = 0.01;
    size_t bins = 64;
    // Start offset of the fixed-stride sample, taken modulo the stride.
    uint64_t seed = 0;
};

// Rates inside [kMinRecommendedRate, kMaxRecommendedRate] keep the
// histogram compact while staying representative.
inline constexpr double kMinRecommendedRate = 0.005;
inline constexpr double kMaxRecommendedRate = 0.05;

struct Histogram {
    std::string column;
    size_t bins = 1;
    double lo = 0, hi = 0;
    std::vector<uint64_t> counts;
    uint64_t sampled_rows = 0; // including nulls
    uint64_t sampled_nulls = 0;
    uint64_t total_rows = 0;
    double null_fraction = 0;
    double distinct_estimate = 0;
    double sample_rate = 1;

    uint64_t non_null_samples() const { return sampled_rows - sampled_nulls; }
    bool operator==(const Histogram&) const = default;
};

// Samples rows offset, offset+stride, ... with stride = ceil(1/sample_rate).
// Throws kUnsupportedColumnType for non-numeric or list columns and
// kInvalidArgument for a rate outside (0, 1] or zero bins.
Histogram build_histogram(const Table& table, std::string_view column, const HistogramOptions& opts = {});

// Exact histogram of the integers 0..rows-1 (the virtual rowid column).
Histogram sequence_histogram(std::string_view column, uint64_t rows, size_t bins = 64);

struct RangeBound {
    double value;
    bool closed;
};

// Fraction of all rows (nulls included in the denominator) whose value
// lies in the range. A missing bound is unbounded.
double estimate_range_selectivity(const Histogram& h, std::optional<RangeBound> lo, std::optional<RangeBound> hi);

// Product of the inputs (independence across columns).
double estimate_conjunction(std::span<const double> selectivities);

// THST record: a framed stream of one frame per column histogram.
std::vector<uint8_t> serialize_histograms(std::span<const Histogram> hs);
std::vector<Histogram> deserialize_histograms(std::span<const uint8_t> bytes);

} // namespace tierq
