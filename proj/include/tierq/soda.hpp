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

// Deciding where a plan splits between the array tier and the frontend.
//
// A split after node i runs nodes 0..i next to the data and ships node i's
// output up. Two strategies: coefficient-aware decomposition (CAD) picks the
// split with the smallest estimated transfer; structure-aware placement
// (SAP) pins element-access expressions to the array tier when sizes cannot
// be estimated, and lets the orchestrator push the split further at run time.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tierq/costmodel.hpp"
#include "tierq/plan.hpp"

namespace tierq {

enum class Strategy { kCad, kSap };
std::string_view strategy_name(Strategy s);

enum class BoundaryReason { kGlobalSort, kNonDecomposableMeasure };
std::string_view boundary_reason_name(BoundaryReason r);

// A node that needs every row in one place: a Sort, or an Aggregate with a
// median measure. Execution on the array tier stops before the first one.
struct BoundaryInfo {
    size_t index = 0;
    BoundaryReason reason = BoundaryReason::kGlobalSort;
};
std::vector<BoundaryInfo> find_boundaries(const Plan& plan);

struct SodaOptions {
    // Array nodes holding the object's data. With more than one, an
    // Aggregate on the array tier runs as partial state and nothing after
    // it can run below the frontend.
    size_t array_nodes = 1;
};

struct SplitDecision {
    Strategy strategy = Strategy::kCad;
    size_t split_after = 0;
    SizeEstimate estimates;
    bool partial_agg = false;
    bool lazy = false;
    std::optional<size_t> boundary_index;
    // Deepest split allowed; SAP's lazy extension never goes past it.
    size_t max_split_after = 0;
};

// Every split_after that keeps the plan's meaning on the given topology,
// in increasing order. Always contains 0.
std::vector<size_t> feasible_splits(const Plan& plan, const SodaOptions& opts = {});

// SAP when the plan reads list elements or some coefficient is unknown.
Strategy choose_strategy(const Plan& plan, const TableStats& stats);

// Throws kEstimationUnavailable when a coefficient is unknown.
SplitDecision cad_split(const Plan& plan, double read_bytes, const TableStats& stats, const SodaOptions& opts = {});

// Places the split after the last node that reads list elements. Throws
// kPlacementInfeasible when element access sits in or after a boundary.
SplitDecision sap_place(const Plan& plan, double read_bytes, const TableStats& stats, const SodaOptions& opts = {});

// choose_strategy followed by cad_split or sap_place.
SplitDecision decide_split(const Plan& plan, double read_bytes, const TableStats& stats, const SodaOptions& opts = {});

// The same decision moved to another split point (partial_agg recomputed).
// Throws kInvalidSplit when the point is not feasible.
SplitDecision move_split(const Plan& plan, const SplitDecision& decision, size_t split_after,
                         const SodaOptions& opts = {});

// Partial aggregate for the array tier and its frontend merge. Throws
// kInvalidSplit when no Aggregate lies at or before the split and
// kNonDecomposableMeasure for median.
AggregateSplit rewrite_partial_aggregate(const Plan& plan, const SplitDecision& split);

// `soda.*` key/value pairs describing the decision.
std::vector<std::pair<std::string, std::string>> decision_annotations(const SplitDecision& d);

} // namespace tierq
