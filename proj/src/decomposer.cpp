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

#include "tierq/decomposer.hpp"

#include "tierq/error.hpp"

namespace tierq {

namespace {

// 0 -> a, 25 -> z, 26 -> aa, 27 -> ab, ...
std::string letters(size_t n) {
    std::string s;
    ++n;
    while (n > 0) {
        --n;
        s.insert(s.begin(), static_cast<char>('a' + n % 26));
        n /= 26;
    }
    return s;
}

std::string rename_one(const std::string& name, const NameMapping& m) {
    for (const auto& [from, to] : m) {
        if (from == name) return to;
    }
    return name;
}

Expr rename(const Expr& e, const NameMapping& m) { return m.empty() || !e ? e : rename_columns(e, m); }

} // namespace

NameMapping generate_temp_names(const Schema& schema, const std::set<std::string>& reserved) {
    NameMapping out;
    size_t next = 0;
    for (const auto& f : schema.fields()) {
        std::string candidate;
        do {
            candidate = "t_" + letters(next++);
        } while (schema.index_of(candidate) || reserved.count(candidate));
        out.emplace_back(f.name, candidate);
    }
    return out;
}

Schema infer_intermediate_schema(const Plan& array_plan) { return output_schema(array_plan); }

DecomposedPlans decompose(const Plan& plan, const SplitDecision& split, const std::string& intermediate_ref) {
    const size_t s = split.split_after;
    if (plan.nodes.empty() || s >= plan.nodes.size()) {
        throw Error(ErrorCode::kInvalidSplit,
                    "split after node " + std::to_string(s) + " in a plan of " + std::to_string(plan.nodes.size()));
    }
    std::optional<AggregateSplit> agg_split;
    if (split.partial_agg) {
        agg_split = rewrite_partial_aggregate(plan, split);
        if (!std::holds_alternative<AggregateNode>(plan.nodes[s])) {
            throw Error(ErrorCode::kInvalidSplit, "partial aggregation needs the split right after the aggregate");
        }
    }

    DecomposedPlans out;
    Plan& array = out.array_plan;
    array.nodes.assign(plan.nodes.begin(), plan.nodes.begin() + static_cast<std::ptrdiff_t>(s + 1));
    if (agg_split) array.nodes[s] = agg_split->partial;

    // Names already used anywhere in the plan stay off the temp list.
    std::set<std::string> reserved;
    for (const auto& sch : node_schemas(plan)) {
        for (const auto& n : sch.names()) reserved.insert(n);
    }
    Schema raw = node_schemas(array).back();
    out.temp_names = generate_temp_names(raw, reserved);
    for (const auto& [from, to] : out.temp_names) array.emit_names.push_back(to);
    out.intermediate_schema = infer_intermediate_schema(array);

    Plan& fe = out.fe_plan;
    fe.nodes.push_back(ReadNode{intermediate_ref, out.intermediate_schema, false, {}});
    NameMapping scope = out.temp_names;
    for (size_t i = s + 1; i <= plan.nodes.size(); ++i) {
        // The merge half of a partial aggregate comes first on the frontend.
        if (i == s + 1 && agg_split) {
            AggregateNode fin = agg_split->final;
            for (auto& g : fin.groupings) g = rename_one(g, scope);
            for (auto& m : fin.measures) {
                for (auto& a : m.args) a = rename(a, scope);
            }
            NameMapping keys;
            const auto& orig = std::get<AggregateNode>(plan.nodes[s]);
            for (size_t k = 0; k < orig.groupings.size(); ++k) keys.emplace_back(orig.groupings[k], fin.groupings[k]);
            fe.nodes.push_back(std::move(fin));
            scope = std::move(keys);
        }
        if (i == plan.nodes.size()) break;
        PlanNode node = plan.nodes[i];
        NameMapping next = scope;
        std::visit(
                [&](auto& n) {
                    using T = std::decay_t<decltype(n)>;
                    if constexpr (std::is_same_v<T, FilterNode>) {
                        n.predicate = rename(n.predicate, scope);
                    } else if constexpr (std::is_same_v<T, ProjectNode>) {
                        for (auto& item : n.items) item.expr = rename(item.expr, scope);
                        next.clear();
                    } else if constexpr (std::is_same_v<T, AggregateNode>) {
                        NameMapping keys;
                        for (auto& g : n.groupings) {
                            std::string renamed = rename_one(g, scope);
                            if (renamed != g) keys.emplace_back(g, renamed);
                            g = renamed;
                        }
                        for (auto& m : n.measures) {
                            for (auto& a : m.args) a = rename(a, scope);
                        }
                        next = std::move(keys);
                    } else if constexpr (std::is_same_v<T, SortNode>) {
                        for (auto& k : n.keys) k.expr = rename(k.expr, scope);
                    } else if constexpr (std::is_same_v<T, ReadNode>) {
                        throw Error(ErrorCode::kInvalidSplit, "read after the first node");
                    }
                },
                node);
        fe.nodes.push_back(std::move(node));
        scope = std::move(next);
    }
    fe.emit_names = output_schema(plan).names();

    auto annotations = decision_annotations(split);
    array.annotations = annotations;
    array.annotations.emplace_back("fragment", "array");
    fe.annotations = annotations;
    fe.annotations.emplace_back("fragment", "frontend");
    fe.annotations.emplace_back("intermediate", intermediate_ref);
    return out;
}

} // namespace tierq
