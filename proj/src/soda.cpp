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

#include "tierq/soda.hpp"

#include <algorithm>

#include "tierq/error.hpp"

namespace tierq {

std::string_view strategy_name(Strategy s) { return s == Strategy::kCad ? "CAD" : "SAP"; }

std::string_view boundary_reason_name(BoundaryReason r) {
    return r == BoundaryReason::kGlobalSort ? "global_sort" : "non_decomposable_measure";
}

std::vector<BoundaryInfo> find_boundaries(const Plan& plan) {
    std::vector<BoundaryInfo> out;
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
        if (std::holds_alternative<SortNode>(plan.nodes[i])) {
            out.push_back({i, BoundaryReason::kGlobalSort});
        } else if (const auto* a = std::get_if<AggregateNode>(&plan.nodes[i])) {
            bool median = std::any_of(a->measures.begin(), a->measures.end(),
                                      [](const Measure& m) { return !is_decomposable(m.fn); });
            if (median) out.push_back({i, BoundaryReason::kNonDecomposableMeasure});
        }
    }
    return out;
}

namespace {

std::optional<size_t> first_aggregate(const Plan& plan) {
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
        if (std::holds_alternative<AggregateNode>(plan.nodes[i])) return i;
    }
    return std::nullopt;
}

std::optional<size_t> first_boundary(const Plan& plan) {
    auto b = find_boundaries(plan);
    if (b.empty()) return std::nullopt;
    return b.front().index;
}

size_t max_split(const Plan& plan, const SodaOptions& opts) {
    if (plan.nodes.empty()) throw Error(ErrorCode::kInvalidSplit, "empty plan");
    size_t limit = plan.nodes.size() - 1;
    if (auto b = first_boundary(plan)) limit = std::min(limit, *b - 1);
    if (opts.array_nodes > 1) {
        if (auto a = first_aggregate(plan)) limit = std::min(limit, *a);
    }
    return limit;
}

bool partial_at(const Plan& plan, size_t split_after, const SodaOptions& opts) {
    auto a = first_aggregate(plan);
    return opts.array_nodes > 1 && a && *a <= split_after;
}

SplitDecision make_decision(const Plan& plan, Strategy strategy, size_t split_after, SizeEstimate estimates,
                            const SodaOptions& opts) {
    SplitDecision d;
    d.strategy = strategy;
    d.split_after = split_after;
    d.estimates = std::move(estimates);
    d.partial_agg = partial_at(plan, split_after, opts);
    d.lazy = strategy == Strategy::kSap;
    d.boundary_index = first_boundary(plan);
    d.max_split_after = max_split(plan, opts);
    return d;
}

} // namespace

std::vector<size_t> feasible_splits(const Plan& plan, const SodaOptions& opts) {
    std::vector<size_t> out;
    size_t limit = max_split(plan, opts);
    for (size_t i = 0; i <= limit; ++i) out.push_back(i);
    return out;
}

Strategy choose_strategy(const Plan& plan, const TableStats& stats) {
    if (contains_array_access(plan)) return Strategy::kSap;
    SizeEstimate e = propagate_sizes(plan, 1.0, stats);
    return e.first_unknown() ? Strategy::kSap : Strategy::kCad;
}

SplitDecision cad_split(const Plan& plan, double read_bytes, const TableStats& stats, const SodaOptions& opts) {
    SizeOptions so;
    so.partial_aggregates = partial_at(plan, max_split(plan, opts), opts);
    SizeEstimate est = propagate_sizes(plan, read_bytes, stats, so);
    if (auto u = est.first_unknown()) {
        throw Error(ErrorCode::kEstimationUnavailable,
                    "no size estimate for node " + std::to_string(*u) + " (" + std::string(node_kind(plan.nodes[*u])) +
                            "); use structure-aware placement");
    }
    size_t best = 0;
    double best_bytes = *est.nodes[0].output_bytes;
    for (size_t s : feasible_splits(plan, opts)) {
        double b = *est.nodes[s].output_bytes;
        // Ties go to the deeper split; the slack absorbs rounding in width sums.
        // A capped coefficient on the way down means the tie is not real.
        bool tie = b >= best_bytes * (1 - 1e-12);
        bool hidden_growth = false;
        for (size_t i = best + 1; i <= s; ++i) hidden_growth = hidden_growth || est.nodes[i].coefficient.capped;
        if (b <= best_bytes * (1 + 1e-12) && !(tie && hidden_growth)) {
            best = s;
            best_bytes = std::min(best_bytes, b);
        }
    }
    return make_decision(plan, Strategy::kCad, best, std::move(est), opts);
}

SplitDecision sap_place(const Plan& plan, double read_bytes, const TableStats& stats, const SodaOptions& opts) {
    SizeOptions so;
    so.partial_aggregates = partial_at(plan, max_split(plan, opts), opts);
    SizeEstimate est = propagate_sizes(plan, read_bytes, stats, so);
    size_t last_array = 0;
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
        if (contains_array_access(plan.nodes[i])) last_array = i;
    }
    size_t limit = max_split(plan, opts);
    if (last_array > limit) {
        auto b = first_boundary(plan);
        std::string why = b && *b <= last_array ? "a " + std::string(node_kind(plan.nodes[*b])) + " at node " +
                                                          std::to_string(*b) + " needs every row in one place"
                                                : "aggregation before it spans several array nodes";
        throw Error(ErrorCode::kPlacementInfeasible,
                    "element access at node " + std::to_string(last_array) + " cannot run on the array tier: " + why);
    }
    return make_decision(plan, Strategy::kSap, last_array, std::move(est), opts);
}

SplitDecision decide_split(const Plan& plan, double read_bytes, const TableStats& stats, const SodaOptions& opts) {
    if (choose_strategy(plan, stats) == Strategy::kCad) return cad_split(plan, read_bytes, stats, opts);
    return sap_place(plan, read_bytes, stats, opts);
}

SplitDecision move_split(const Plan& plan, const SplitDecision& decision, size_t split_after, const SodaOptions& opts) {
    if (split_after > max_split(plan, opts)) {
        throw Error(ErrorCode::kInvalidSplit, "split after node " + std::to_string(split_after) +
                                                      " is not feasible (deepest is " +
                                                      std::to_string(max_split(plan, opts)) + ")");
    }
    SplitDecision d = decision;
    d.split_after = split_after;
    d.partial_agg = partial_at(plan, split_after, opts);
    d.max_split_after = max_split(plan, opts);
    return d;
}

AggregateSplit rewrite_partial_aggregate(const Plan& plan, const SplitDecision& split) {
    auto a = first_aggregate(plan);
    if (!a || *a > split.split_after) {
        throw Error(ErrorCode::kInvalidSplit, "no aggregate at or before node " + std::to_string(split.split_after));
    }
    return split_aggregate(std::get<AggregateNode>(plan.nodes[*a]));
}

std::vector<std::pair<std::string, std::string>> decision_annotations(const SplitDecision& d) {
    std::vector<std::pair<std::string, std::string>> out = {
            {"soda.strategy", std::string(strategy_name(d.strategy))},
            {"soda.split_after", std::to_string(d.split_after)},
            {"soda.max_split_after", std::to_string(d.max_split_after)},
            {"soda.partial_agg", d.partial_agg ? "true" : "false"},
            {"soda.lazy", d.lazy ? "true" : "false"},
            {"soda.boundary", d.boundary_index ? std::to_string(*d.boundary_index) : "none"},
    };
    std::string bytes = "unknown";
    if (d.split_after < d.estimates.nodes.size()) {
        if (const auto& b = d.estimates.nodes[d.split_after].output_bytes) bytes = format_double(*b);
    }
    out.emplace_back("soda.estimated_transfer_bytes", bytes);
    return out;
}

} // namespace tierq
