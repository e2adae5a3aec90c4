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

// Byte-ratio coefficients per operator and chained size inference.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tierq/plan.hpp"
#include "tierq/stats.hpp"

namespace tierq {

// What the optimizer knows about one stored object.
struct TableStats {
    uint64_t row_count = 0;
    uint64_t logical_bytes = 0;
    std::map<std::string, Histogram> histograms;
    // Average logical bytes per row, validity included.
    std::map<std::string, double> column_width;
};

// Histograms for every numeric scalar column plus per-column widths.
TableStats compute_table_stats(const Table& table, const HistogramOptions& opts = {});

enum class CoefSource { kFixed, kHistogram, kWidthRatio, kDistinctCap, kUnknown };
std::string_view coef_source_name(CoefSource s);

struct Coefficient {
    double value = 1.0;
    CoefSource source = CoefSource::kFixed;
    // The distinct cap held the value at 1; the real output is larger.
    bool capped = false;
    bool known() const { return source != CoefSource::kUnknown; }
};

// Estimates the coefficient of one node whose input columns come straight
// from the stored object. Throws kUnclassifiableOperator for Op3/Op4.
Coefficient estimate_coefficient(const PlanNode& node, const Schema& input_schema, const TableStats& stats);

struct NodeEstimate {
    Coefficient coefficient;
    std::optional<double> input_bytes;
    std::optional<double> output_bytes;
    std::optional<double> output_rows;
};

struct SizeEstimate {
    double read_bytes = 0;
    std::vector<NodeEstimate> nodes;

    // Index of the first node whose coefficient is unknown.
    std::optional<size_t> first_unknown() const;
};

struct SizeOptions {
    // Aggregates emit partial state (avg as sum and count) instead of
    // final values.
    bool partial_aggregates = false;
};

// Walks the chain from the Read. Once a coefficient is unknown, every later
// size is unknown too.
SizeEstimate propagate_sizes(const Plan& plan, double read_bytes, const TableStats& stats,
                             const SizeOptions& opts = {});

// Estimated bytes in Read's output for the object (virtual rowid included).
double estimated_read_bytes(const Plan& plan, const TableStats& stats);

} // namespace tierq
