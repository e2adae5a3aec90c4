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

// Relational plan IR: expression trees and single-input operator chains.

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tierq/columnar.hpp"

namespace tierq {

// ---- expressions ---------------------------------------------------------

enum class CmpOp { kEq, kNe, kLt, kLe, kGt, kGe };
enum class ArithOp { kAdd, kSub, kMul, kDiv, kMod };
enum class FuncName { kSqrt, kCosh, kCos, kAbs };

std::string_view cmp_symbol(CmpOp op);
std::string_view arith_symbol(ArithOp op);
std::string_view func_name(FuncName fn);
std::optional<FuncName> func_from_name(std::string_view name);

struct ExprNode;

/// Immutable, shared expression tree. Equality is structural.
class Expr {
public:
    Expr() = default;
    explicit Expr(std::shared_ptr<const ExprNode> node) : _node(std::move(node)) {}

    const ExprNode& node() const { return *_node; }
    const ExprNode* operator->() const { return _node.get(); }
    explicit operator bool() const { return _node != nullptr; }

    bool operator==(const Expr& other) const;

private:
    std::shared_ptr<const ExprNode> _node;
};

struct ColumnRef {
    std::string name;
    bool operator==(const ColumnRef&) const = default;
};

// A monostate value is a typed null.
struct Literal {
    Value value;
    TypeKind type = TypeKind::kInt64;
    bool operator==(const Literal&) const = default;
};

// 1-based element access on a list column.
struct ArrayIndex {
    std::string column;
    int64_t index = 1;
    bool operator==(const ArrayIndex&) const = default;
};

struct Cmp {
    CmpOp op;
    Expr lhs, rhs;
    bool operator==(const Cmp&) const = default;
};

struct Arith {
    ArithOp op;
    Expr lhs, rhs;
    bool operator==(const Arith&) const = default;
};

struct Func {
    FuncName fn;
    std::vector<Expr> args;
    bool operator==(const Func&) const = default;
};

struct And {
    std::vector<Expr> terms;
    bool operator==(const And&) const = default;
};

struct Or {
    std::vector<Expr> terms;
    bool operator==(const Or&) const = default;
};

// Inclusive on both ends.
struct Between {
    Expr value, lo, hi;
    bool operator==(const Between&) const = default;
};

struct IsNotNull {
    Expr value;
    bool operator==(const IsNotNull&) const = default;
};

struct ExprNode {
    std::variant<ColumnRef, Literal, ArrayIndex, Cmp, Arith, Func, And, Or, Between, IsNotNull> v;
    bool operator==(const ExprNode&) const = default;
};

namespace ex {
Expr col(std::string name);
Expr lit(int64_t v);
Expr lit(double v);
Expr lit(std::string v);
Expr null_lit(TypeKind type);
Expr typed_lit(Value v, TypeKind type);
Expr idx(std::string column, int64_t index);
Expr cmp(CmpOp op, Expr lhs, Expr rhs);
Expr arith(ArithOp op, Expr lhs, Expr rhs);
Expr func(FuncName fn, std::vector<Expr> args);
Expr and_(std::vector<Expr> terms);
Expr or_(std::vector<Expr> terms);
Expr between(Expr value, Expr lo, Expr hi);
Expr is_not_null(Expr value);
} // namespace ex

bool contains_array_access(const Expr& e);
void collect_columns(const Expr& e, std::set<std::string>& out);
void collect_functions(const Expr& e, std::set<FuncName>& out);

// Replaces column names (ColumnRef and ArrayIndex) through the mapping;
// names absent from it are kept.
Expr rename_columns(const Expr& e, const std::vector<std::pair<std::string, std::string>>& mapping);

// Result type of an expression over a schema. Throws kValidation with a
// message naming the offending column or operator.
TypeKind infer_type(const Expr& e, const Schema& input);

// S-expression form used by the plan text format.
std::string expr_to_text(const Expr& e);

// ---- plan nodes ----------------------------------------------------------

struct ReadNode {
    std::string table_ref;
    Schema base_schema;
    // Appends a virtual Int64 `rowid` column (0-based ingestion order).
    bool with_rowid = false;
    Expr filter; // optional inline filter
    bool operator==(const ReadNode&) const = default;
};

struct FilterNode {
    Expr predicate;
    bool operator==(const FilterNode&) const = default;
};

struct ProjectItem {
    Expr expr;
    std::string name;
    bool operator==(const ProjectItem&) const = default;
};

struct ProjectNode {
    std::vector<ProjectItem> items;
    bool operator==(const ProjectNode&) const = default;
};

enum class AggFn { kMin, kMax, kSum, kCount, kAvg, kMedian };
std::string_view agg_name(AggFn fn);
std::optional<AggFn> agg_from_name(std::string_view name);
bool is_decomposable(AggFn fn);

// kPartial emits mergeable state (avg becomes <name>$sum and <name>$count);
// kFinal consumes those columns. Final avg takes (sum, count) arguments.
enum class AggPhase { kFull, kPartial, kFinal };
std::string_view phase_name(AggPhase p);

struct Measure {
    AggFn fn;
    std::vector<Expr> args; // empty for count(*)
    std::string name;
    bool operator==(const Measure&) const = default;
};

struct AggregateNode {
    std::vector<std::string> groupings;
    std::vector<Measure> measures;
    AggPhase phase = AggPhase::kFull;
    bool operator==(const AggregateNode&) const = default;
};

struct AggregateSplit {
    AggregateNode partial;
    AggregateNode final;
};

// Partial state on the lower tier, merge by group key above: min of mins,
// sum of sums and counts, avg as total sum over total count.
// Throws kNonDecomposableMeasure for median.
AggregateSplit split_aggregate(const AggregateNode& full);

struct SortKey {
    Expr expr;
    bool ascending = true;
    bool operator==(const SortKey&) const = default;
};

// Stable; nulls sort last in either direction.
struct SortNode {
    std::vector<SortKey> keys;
    bool operator==(const SortNode&) const = default;
};

// Operators that are recognized for classification but never executed.
enum class OtherRelKind { kExpand, kJoin, kSet };

struct OtherNode {
    OtherRelKind kind;
    bool operator==(const OtherNode&) const = default;
};

using PlanNode = std::variant<ReadNode, FilterNode, ProjectNode, AggregateNode, SortNode, OtherNode>;

std::string_view node_kind(const PlanNode& node);

// Single-input chain stored child-first: nodes[0] is the Read.
struct Plan {
    std::vector<PlanNode> nodes;
    // When non-empty, the plan's output columns are relabelled to these names.
    std::vector<std::string> emit_names;
    std::vector<std::pair<std::string, std::string>> annotations;

    size_t size() const { return nodes.size(); }
    const ReadNode& read() const;
    std::optional<std::string> annotation(std::string_view key) const;

    bool operator==(const Plan&) const = default;
};

enum class OpClass { kOp1, kOp2, kOp3, kOp4 };
std::string_view op_class_name(OpClass c);
OpClass classify(const PlanNode& node);

bool contains_array_access(const PlanNode& node);
bool contains_array_access(const Plan& plan);

// Output schema of one node given its input schema (ignored for Read).
// Throws kValidation on type errors and kNonDecomposableMeasure for a
// partial median.
Schema node_output_schema(const PlanNode& node, const Schema& input);
// Output schema after every node, in order; emit_names is not applied.
std::vector<Schema> node_schemas(const Plan& plan);
// Final output schema with emit_names applied.
Schema output_schema(const Plan& plan);

struct Diagnostic {
    size_t node_index = 0;
    std::string message;
};

// Empty iff the chain shape holds and every node type-checks.
std::vector<Diagnostic> validate(const Plan& plan);
// Throws kValidation joining every diagnostic.
void validate_or_throw(const Plan& plan);

// ---- text form -----------------------------------------------------------

std::string plan_to_text(const Plan& plan);
// Throws kGrammarError (with line:column) or kUnknownFunction.
Plan text_to_plan(std::string_view text);

} // namespace tierq
