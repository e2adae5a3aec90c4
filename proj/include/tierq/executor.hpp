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

// Batch-at-a-time plan evaluation.
//
// Semantics in brief: a Filter keeps rows whose predicate is true; And/Or
// are three-valued; arithmetic and comparisons propagate nulls; integer `/`
// and `%` truncate toward zero; division or modulo by zero, sqrt of a
// negative and any NaN function result are null; element access is 1-based
// and out-of-range gives null. Aggregates ignore null inputs, emit groups in
// first-appearance order and treat null keys as equal; median is the lower
// median. Sort is stable with nulls last in both directions.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tierq/columnar.hpp"
#include "tierq/plan.hpp"

namespace tierq {

struct TableInput {
    std::shared_ptr<const Table> table;
    // Value of the virtual rowid on the table's first row.
    uint64_t rowid_base = 0;
};

struct ExecContext {
    std::map<std::string, TableInput> tables;
    size_t batch_rows = 65536;

    void add_table(const std::string& ref, Table table, uint64_t rowid_base = 0);
};

// Rows and logical bytes entering and leaving one node.
struct NodeTrace {
    uint64_t input_rows = 0;
    uint64_t input_bytes = 0;
    uint64_t output_rows = 0;
    uint64_t output_bytes = 0;
};

// Throws kExecError (naming the node) when the input does not fit the plan,
// kNonDecomposableMeasure for a partial median. With `trace`, one entry per
// node is appended.
Table execute(const Plan& plan, const ExecContext& ctx, std::vector<NodeTrace>* trace = nullptr);

// Evaluates a type-checked expression over every row of the batch. Boolean
// results come back as a kBool column.
Column evaluate_expr(const Expr& expr, const ColumnBatch& batch);

Table execute_aggregate(const AggregateNode& node, const Table& input);
// Runs the partial half of a full aggregate.
Table execute_partial_aggregate(const AggregateNode& full, const Table& input);
// Merges partial states (concatenated in any number of pieces) into the
// values the full aggregate would produce.
Table execute_final_aggregate(const AggregateNode& full, const Table& partials);

} // namespace tierq
