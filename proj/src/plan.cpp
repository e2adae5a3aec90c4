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

#include "tierq/plan.hpp"

#include <algorithm>
#include <unordered_set>

#include "tierq/error.hpp"

namespace tierq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Expr make(auto&& alt) {
    return Expr(std::make_shared<const ExprNode>(ExprNode{std::forward<decltype(alt)>(alt)}));
}

[[noreturn]] void type_error(const std::string& msg) { throw Error(ErrorCode::kValidation, msg); }

} // namespace

std::string_view cmp_symbol(CmpOp op) {
    switch (op) {
    case CmpOp::kEq: return "=";
    case CmpOp::kNe: return "!=";
    case CmpOp::kLt: return "<";
    case CmpOp::kLe: return "<=";
    case CmpOp::kGt: return ">";
    case CmpOp::kGe: return ">=";
    }
    return "?";
}

std::string_view arith_symbol(ArithOp op) {
    switch (op) {
    case ArithOp::kAdd: return "+";
    case ArithOp::kSub: return "-";
    case ArithOp::kMul: return "*";
    case ArithOp::kDiv: return "/";
    case ArithOp::kMod: return "%";
    }
    return "?";
}

std::string_view func_name(FuncName fn) {
    switch (fn) {
    case FuncName::kSqrt: return "sqrt";
    case FuncName::kCosh: return "cosh";
    case FuncName::kCos: return "cos";
    case FuncName::kAbs: return "abs";
    }
    return "?";
}

std::optional<FuncName> func_from_name(std::string_view name) {
    for (auto f : {FuncName::kSqrt, FuncName::kCosh, FuncName::kCos, FuncName::kAbs}) {
        if (func_name(f) == name) return f;
    }
    return std::nullopt;
}

bool Expr::operator==(const Expr& other) const {
    if (_node == other._node) return true;
    if (!_node || !other._node) return false;
    return *_node == *other._node;
}

namespace ex {
Expr col(std::string name) { return make(ColumnRef{std::move(name)}); }
Expr lit(int64_t v) { return make(Literal{v, TypeKind::kInt64}); }
Expr lit(double v) { return make(Literal{v, TypeKind::kFloat64}); }
Expr lit(std::string v) { return make(Literal{std::move(v), TypeKind::kUtf8}); }
Expr null_lit(TypeKind type) { return make(Literal{std::monostate{}, type}); }
Expr typed_lit(Value v, TypeKind type) { return make(Literal{std::move(v), type}); }
Expr idx(std::string column, int64_t index) { return make(ArrayIndex{std::move(column), index}); }
Expr cmp(CmpOp op, Expr lhs, Expr rhs) { return make(Cmp{op, std::move(lhs), std::move(rhs)}); }
Expr arith(ArithOp op, Expr lhs, Expr rhs) { return make(Arith{op, std::move(lhs), std::move(rhs)}); }
Expr func(FuncName fn, std::vector<Expr> args) { return make(Func{fn, std::move(args)}); }
Expr and_(std::vector<Expr> terms) { return make(And{std::move(terms)}); }
Expr or_(std::vector<Expr> terms) { return make(Or{std::move(terms)}); }
Expr between(Expr value, Expr lo, Expr hi) { return make(Between{std::move(value), std::move(lo), std::move(hi)}); }
Expr is_not_null(Expr value) { return make(IsNotNull{std::move(value)}); }
} // namespace ex

bool contains_array_access(const Expr& e) {
    if (!e) return false;
    return std::visit(
            overloaded{
                    [](const ColumnRef&) { return false; },
                    [](const Literal&) { return false; },
                    [](const ArrayIndex&) { return true; },
                    [](const Cmp& c) { return contains_array_access(c.lhs) || contains_array_access(c.rhs); },
                    [](const Arith& a) { return contains_array_access(a.lhs) || contains_array_access(a.rhs); },
                    [](const Func& f) {
                        return std::any_of(f.args.begin(), f.args.end(),
                                           [](const Expr& x) { return contains_array_access(x); });
                    },
                    [](const And& a) {
                        return std::any_of(a.terms.begin(), a.terms.end(),
                                           [](const Expr& x) { return contains_array_access(x); });
                    },
                    [](const Or& o) {
                        return std::any_of(o.terms.begin(), o.terms.end(),
                                           [](const Expr& x) { return contains_array_access(x); });
                    },
                    [](const Between& b) {
                        return contains_array_access(b.value) || contains_array_access(b.lo) ||
                               contains_array_access(b.hi);
                    },
                    [](const IsNotNull& n) { return contains_array_access(n.value); },
            },
            e->v);
}

namespace {

template <typename Fn>
void for_each_child(const Expr& e, Fn&& fn) {
    std::visit(overloaded{
                       [](const ColumnRef&) {},
                       [](const Literal&) {},
                       [](const ArrayIndex&) {},
                       [&](const Cmp& c) { fn(c.lhs), fn(c.rhs); },
                       [&](const Arith& a) { fn(a.lhs), fn(a.rhs); },
                       [&](const Func& f) { std::for_each(f.args.begin(), f.args.end(), fn); },
                       [&](const And& a) { std::for_each(a.terms.begin(), a.terms.end(), fn); },
                       [&](const Or& o) { std::for_each(o.terms.begin(), o.terms.end(), fn); },
                       [&](const Between& b) { fn(b.value), fn(b.lo), fn(b.hi); },
                       [&](const IsNotNull& n) { fn(n.value); },
               },
               e->v);
}

} // namespace

void collect_columns(const Expr& e, std::set<std::string>& out) {
    if (!e) return;
    if (const auto* c = std::get_if<ColumnRef>(&e->v)) out.insert(c->name);
    if (const auto* a = std::get_if<ArrayIndex>(&e->v)) out.insert(a->column);
    for_each_child(e, [&out](const Expr& child) { collect_columns(child, out); });
}

void collect_functions(const Expr& e, std::set<FuncName>& out) {
    if (!e) return;
    if (const auto* f = std::get_if<Func>(&e->v)) out.insert(f->fn);
    for_each_child(e, [&out](const Expr& child) { collect_functions(child, out); });
}

Expr rename_columns(const Expr& e, const std::vector<std::pair<std::string, std::string>>& mapping) {
    if (!e) return e;
    auto lookup = [&mapping](const std::string& name) {
        for (const auto& [from, to] : mapping) {
            if (from == name) return to;
        }
        return name;
    };
    auto r = [&mapping](const Expr& x) { return rename_columns(x, mapping); };
    auto rl = [&r](const std::vector<Expr>& xs) {
        std::vector<Expr> out;
        for (const auto& x : xs) out.push_back(r(x));
        return out;
    };
    return std::visit(overloaded{
                              [&](const ColumnRef& c) { return ex::col(lookup(c.name)); },
                              [&](const Literal&) { return e; },
                              [&](const ArrayIndex& a) { return ex::idx(lookup(a.column), a.index); },
                              [&](const Cmp& c) { return ex::cmp(c.op, r(c.lhs), r(c.rhs)); },
                              [&](const Arith& a) { return ex::arith(a.op, r(a.lhs), r(a.rhs)); },
                              [&](const Func& f) { return ex::func(f.fn, rl(f.args)); },
                              [&](const And& a) { return ex::and_(rl(a.terms)); },
                              [&](const Or& o) { return ex::or_(rl(o.terms)); },
                              [&](const Between& b) { return ex::between(r(b.value), r(b.lo), r(b.hi)); },
                              [&](const IsNotNull& n) { return ex::is_not_null(r(n.value)); },
                      },
                      e->v);
}

TypeKind infer_type(const Expr& e, const Schema& input) {
    if (!e) type_error("missing expression");
    return std::visit(
            overloaded{
                    [&](const ColumnRef& c) {
                        auto i = input.index_of(c.name);
                        if (!i) type_error("unknown column '" + c.name + "' in " + input.to_string());
                        return input.field(*i).type;
                    },
                    [&](const Literal& l) {
                        if (l.type == TypeKind::kBool || is_list(l.type)) type_error("unsupported literal type");
                        return l.type;
                    },
                    [&](const ArrayIndex& a) {
                        auto i = input.index_of(a.column);
                        if (!i) type_error("unknown column '" + a.column + "' in " + input.to_string());
                        TypeKind t = input.field(*i).type;
                        if (!is_list(t)) {
                            type_error("element access on non-list column '" + a.column + "' of type " +
                                       std::string(type_name(t)));
                        }
                        if (a.index < 1) type_error("element index must be 1-based, got " + std::to_string(a.index));
                        return element_type(t);
                    },
                    [&](const Cmp& c) {
                        TypeKind l = infer_type(c.lhs, input);
                        TypeKind r = infer_type(c.rhs, input);
                        bool ok = (is_numeric(l) && is_numeric(r)) || (l == TypeKind::kUtf8 && r == TypeKind::kUtf8);
                        if (!ok) {
                            type_error("cannot compare " + std::string(type_name(l)) + " " +
                                       std::string(cmp_symbol(c.op)) + " " + std::string(type_name(r)));
                        }
                        return TypeKind::kBool;
                    },
                    [&](const Arith& a) {
                        TypeKind l = infer_type(a.lhs, input);
                        TypeKind r = infer_type(a.rhs, input);
                        if (!is_numeric(l) || !is_numeric(r)) {
                            type_error("arithmetic " + std::string(arith_symbol(a.op)) + " on " +
                                       std::string(type_name(l)) + " and " + std::string(type_name(r)));
                        }
                        return (l == TypeKind::kFloat64 || r == TypeKind::kFloat64) ? TypeKind::kFloat64
                                                                                    : TypeKind::kInt64;
                    },
                    [&](const Func& f) {
                        if (f.args.size() != 1) type_error(std::string(func_name(f.fn)) + " takes one argument");
                        TypeKind t = infer_type(f.args[0], input);
                        if (!is_numeric(t)) {
                            type_error(std::string(func_name(f.fn)) + " of " + std::string(type_name(t)));
                        }
                        if (f.fn == FuncName::kAbs && is_integer(t)) return TypeKind::kInt64;
                        return TypeKind::kFloat64;
                    },
                    [&](const And& a) {
                        if (a.terms.empty()) type_error("empty AND");
                        for (const auto& t : a.terms) {
                            if (infer_type(t, input) != TypeKind::kBool) type_error("AND over non-boolean term");
                        }
                        return TypeKind::kBool;
                    },
                    [&](const Or& o) {
                        if (o.terms.empty()) type_error("empty OR");
                        for (const auto& t : o.terms) {
                            if (infer_type(t, input) != TypeKind::kBool) type_error("OR over non-boolean term");
                        }
                        return TypeKind::kBool;
                    },
                    [&](const Between& b) {
                        TypeKind v = infer_type(b.value, input);
                        TypeKind lo = infer_type(b.lo, input);
                        TypeKind hi = infer_type(b.hi, input);
                        bool numeric = is_numeric(v) && is_numeric(lo) && is_numeric(hi);
                        bool text = v == TypeKind::kUtf8 && lo == TypeKind::kUtf8 && hi == TypeKind::kUtf8;
                        if (!numeric && !text) type_error("BETWEEN over mismatched types");
                        return TypeKind::kBool;
                    },
                    [&](const IsNotNull& n) {
                        infer_type(n.value, input);
                        return TypeKind::kBool;
                    },
            },
            e->v);
}

// ---- nodes ---------------------------------------------------------------

std::string_view agg_name(AggFn fn) {
    switch (fn) {
    case AggFn::kMin: return "min";
    case AggFn::kMax: return "max";
    case AggFn::kSum: return "sum";
    case AggFn::kCount: return "count";
    case AggFn::kAvg: return "avg";
    case AggFn::kMedian: return "median";
    }
    return "?";
}

std::optional<AggFn> agg_from_name(std::string_view name) {
    for (auto f : {AggFn::kMin, AggFn::kMax, AggFn::kSum, AggFn::kCount, AggFn::kAvg, AggFn::kMedian}) {
        if (agg_name(f) == name) return f;
    }
    return std::nullopt;
}

bool is_decomposable(AggFn fn) { return fn != AggFn::kMedian; }

AggregateSplit split_aggregate(const AggregateNode& full) {
    if (full.phase != AggPhase::kFull) {
        throw Error(ErrorCode::kInvalidArgument, "only a full aggregate can be split");
    }
    AggregateSplit out;
    out.partial = full;
    out.partial.phase = AggPhase::kPartial;
    out.final.groupings = full.groupings;
    out.final.phase = AggPhase::kFinal;
    for (const auto& m : full.measures) {
        if (!is_decomposable(m.fn)) {
            throw Error(ErrorCode::kNonDecomposableMeasure, "median '" + m.name + "' cannot be computed partially");
        }
        if (m.fn == AggFn::kAvg) {
            out.final.measures.push_back(
                    Measure{AggFn::kAvg, {ex::col(m.name + "$sum"), ex::col(m.name + "$count")}, m.name});
        } else {
            out.final.measures.push_back(Measure{m.fn, {ex::col(m.name)}, m.name});
        }
    }
    return out;
}

std::string_view phase_name(AggPhase p) {
    switch (p) {
    case AggPhase::kFull: return "full";
    case AggPhase::kPartial: return "partial";
    case AggPhase::kFinal: return "final";
    }
    return "?";
}

std::string_view node_kind(const PlanNode& node) {
    return std::visit(overloaded{
                              [](const ReadNode&) { return std::string_view("read"); },
                              [](const FilterNode&) { return std::string_view("filter"); },
                              [](const ProjectNode&) { return std::string_view("project"); },
                              [](const AggregateNode&) { return std::string_view("aggregate"); },
                              [](const SortNode&) { return std::string_view("sort"); },
                              [](const OtherNode& o) {
                                  switch (o.kind) {
                                  case OtherRelKind::kExpand: return std::string_view("expand");
                                  case OtherRelKind::kJoin: return std::string_view("join");
                                  case OtherRelKind::kSet: return std::string_view("set");
                                  }
                                  return std::string_view("?");
                              },
                      },
                      node);
}

const ReadNode& Plan::read() const {
    if (nodes.empty() || !std::holds_alternative<ReadNode>(nodes[0])) {
        throw Error(ErrorCode::kValidation, "plan does not start with a read");
    }
    return std::get<ReadNode>(nodes[0]);
}

std::optional<std::string> Plan::annotation(std::string_view key) const {
    for (const auto& [k, v] : annotations) {
        if (k == key) return v;
    }
    return std::nullopt;
}

std::string_view op_class_name(OpClass c) {
    switch (c) {
    case OpClass::kOp1: return "Op1";
    case OpClass::kOp2: return "Op2";
    case OpClass::kOp3: return "Op3";
    case OpClass::kOp4: return "Op4";
    }
    return "?";
}

OpClass classify(const PlanNode& node) {
    return std::visit(overloaded{
                              [](const ReadNode&) { return OpClass::kOp1; },
                              [](const SortNode&) { return OpClass::kOp1; },
                              [](const FilterNode&) { return OpClass::kOp2; },
                              [](const ProjectNode&) { return OpClass::kOp2; },
                              [](const AggregateNode&) { return OpClass::kOp2; },
                              [](const OtherNode& o) {
                                  return o.kind == OtherRelKind::kExpand ? OpClass::kOp3 : OpClass::kOp4;
                              },
                      },
                      node);
}

bool contains_array_access(const PlanNode& node) {
    return std::visit(overloaded{
                              [](const ReadNode& r) { return contains_array_access(r.filter); },
                              [](const FilterNode& f) { return contains_array_access(f.predicate); },
                              [](const ProjectNode& p) {
                                  return std::any_of(p.items.begin(), p.items.end(), [](const ProjectItem& i) {
                                      return contains_array_access(i.expr);
                                  });
                              },
                              [](const AggregateNode& a) {
                                  for (const auto& m : a.measures) {
                                      for (const auto& arg : m.args) {
                                          if (contains_array_access(arg)) return true;
                                      }
                                  }
                                  return false;
                              },
                              [](const SortNode& s) {
                                  return std::any_of(s.keys.begin(), s.keys.end(), [](const SortKey& k) {
                                      return contains_array_access(k.expr);
                                  });
                              },
                              [](const OtherNode&) { return false; },
                      },
                      node);
}

bool contains_array_access(const Plan& plan) {
    return std::any_of(plan.nodes.begin(), plan.nodes.end(),
                       [](const PlanNode& n) { return contains_array_access(n); });
}

namespace {

bool nullable_of(const Expr& e, const Schema& input) {
    if (const auto* c = std::get_if<ColumnRef>(&e->v)) {
        if (auto i = input.index_of(c->name)) return input.field(*i).nullable;
    }
    return true;
}

Schema read_output_schema(const ReadNode& r) {
    auto fields = r.base_schema.fields();
    if (r.with_rowid) {
        if (r.base_schema.index_of("rowid")) type_error("base schema already has a 'rowid' column");
        fields.push_back(Field{"rowid", TypeKind::kInt64, false});
    }
    Schema out(std::move(fields));
    if (r.filter && infer_type(r.filter, out) != TypeKind::kBool) type_error("read filter is not boolean");
    return out;
}

std::vector<Field> measure_fields(const Measure& m, AggPhase phase, const Schema& input) {
    auto arg_type = [&](size_t i) { return infer_type(m.args.at(i), input); };
    auto expect_args = [&](size_t n) {
        if (m.args.size() != n) {
            type_error(std::string(agg_name(m.fn)) + " '" + m.name + "' expects " + std::to_string(n) +
                       " argument(s)");
        }
    };
    auto numeric_arg = [&]() {
        expect_args(1);
        TypeKind t = arg_type(0);
        if (!is_numeric(t)) type_error(std::string(agg_name(m.fn)) + " over " + std::string(type_name(t)));
        return t;
    };
    auto scalar_arg = [&]() {
        expect_args(1);
        TypeKind t = arg_type(0);
        if (!is_numeric(t) && t != TypeKind::kUtf8) {
            type_error(std::string(agg_name(m.fn)) + " over " + std::string(type_name(t)));
        }
        return t;
    };
    auto sum_type = [](TypeKind t) { return is_integer(t) ? TypeKind::kInt64 : TypeKind::kFloat64; };

    if (phase == AggPhase::kFinal) {
        switch (m.fn) {
        case AggFn::kMin:
        case AggFn::kMax: return {Field{m.name, scalar_arg(), true}};
        case AggFn::kSum: return {Field{m.name, sum_type(numeric_arg()), true}};
        case AggFn::kCount:
            if (numeric_arg() != TypeKind::kInt64) type_error("final count expects an Int64 partial count");
            return {Field{m.name, TypeKind::kInt64, false}};
        case AggFn::kAvg:
            expect_args(2);
            if (arg_type(0) != TypeKind::kFloat64 || arg_type(1) != TypeKind::kInt64) {
                type_error("final avg expects (Float64 sum, Int64 count)");
            }
            return {Field{m.name, TypeKind::kFloat64, true}};
        case AggFn::kMedian: break;
        }
        throw Error(ErrorCode::kNonDecomposableMeasure, "median '" + m.name + "' has no final form");
    }

    switch (m.fn) {
    case AggFn::kMin:
    case AggFn::kMax: return {Field{m.name, scalar_arg(), true}};
    case AggFn::kSum: return {Field{m.name, sum_type(numeric_arg()), true}};
    case AggFn::kCount:
        if (m.args.size() > 1) type_error("count takes at most one argument");
        if (m.args.size() == 1) arg_type(0);
        return {Field{m.name, TypeKind::kInt64, false}};
    case AggFn::kAvg:
        numeric_arg();
        if (phase == AggPhase::kPartial) {
            return {Field{m.name + "$sum", TypeKind::kFloat64, true}, Field{m.name + "$count", TypeKind::kInt64, false}};
        }
        return {Field{m.name, TypeKind::kFloat64, true}};
    case AggFn::kMedian:
        if (phase == AggPhase::kPartial) {
            throw Error(ErrorCode::kNonDecomposableMeasure, "median '" + m.name + "' cannot be computed partially");
        }
        return {Field{m.name, numeric_arg(), true}};
    }
    return {};
}

} // namespace

Schema node_output_schema(const PlanNode& node, const Schema& input) {
    return std::visit(
            overloaded{
                    [](const ReadNode& r) { return read_output_schema(r); },
                    [&](const FilterNode& f) {
                        if (infer_type(f.predicate, input) != TypeKind::kBool) type_error("filter predicate is not boolean");
                        return input;
                    },
                    [&](const ProjectNode& p) {
                        if (p.items.empty()) type_error("empty projection");
                        std::vector<Field> fields;
                        for (const auto& item : p.items) {
                            TypeKind t = infer_type(item.expr, input);
                            if (t == TypeKind::kBool) type_error("boolean projection '" + item.name + "' is not supported");
                            fields.push_back(Field{item.name, t, nullable_of(item.expr, input)});
                        }
                        return Schema(std::move(fields));
                    },
                    [&](const AggregateNode& a) {
                        std::vector<Field> fields;
                        for (const auto& g : a.groupings) {
                            auto i = input.index_of(g);
                            if (!i) type_error("unknown grouping column '" + g + "' in " + input.to_string());
                            const Field& f = input.field(*i);
                            if (is_list(f.type)) type_error("cannot group by list column '" + g + "'");
                            fields.push_back(f);
                        }
                        for (const auto& m : a.measures) {
                            for (auto& f : measure_fields(m, a.phase, input)) fields.push_back(std::move(f));
                        }
                        if (fields.empty()) type_error("aggregate without keys or measures");
                        return Schema(std::move(fields));
                    },
                    [&](const SortNode& s) {
                        if (s.keys.empty()) type_error("sort without keys");
                        for (const auto& k : s.keys) {
                            TypeKind t = infer_type(k.expr, input);
                            if (is_list(t) || t == TypeKind::kBool) {
                                type_error("cannot sort by " + std::string(type_name(t)));
                            }
                        }
                        return input;
                    },
                    [&](const OtherNode& o) -> Schema {
                        throw Error(ErrorCode::kValidation, std::string(node_kind(PlanNode(o))) + " is not supported");
                    },
            },
            node);
}

std::vector<Schema> node_schemas(const Plan& plan) {
    std::vector<Schema> out;
    Schema current;
    for (const auto& node : plan.nodes) {
        current = node_output_schema(node, current);
        out.push_back(current);
    }
    return out;
}

Schema output_schema(const Plan& plan) {
    auto schemas = node_schemas(plan);
    if (schemas.empty()) throw Error(ErrorCode::kValidation, "empty plan");
    if (plan.emit_names.empty()) return schemas.back();
    return schemas.back().renamed(plan.emit_names);
}

std::vector<Diagnostic> validate(const Plan& plan) {
    std::vector<Diagnostic> diags;
    if (plan.nodes.empty()) {
        diags.push_back({0, "empty plan"});
        return diags;
    }
    if (!std::holds_alternative<ReadNode>(plan.nodes[0])) diags.push_back({0, "plan must start with a read"});
    for (size_t i = 1; i < plan.nodes.size(); ++i) {
        if (std::holds_alternative<ReadNode>(plan.nodes[i])) diags.push_back({i, "read may only appear first"});
    }
    if (!diags.empty()) return diags;

    Schema current;
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
        try {
            current = node_output_schema(plan.nodes[i], current);
        } catch (const Error& e) {
            diags.push_back({i, e.what()});
            return diags;
        }
    }
    if (!plan.emit_names.empty()) {
        try {
            current.renamed(plan.emit_names);
        } catch (const Error& e) {
            diags.push_back({plan.nodes.size() - 1, std::string("emit names: ") + e.what()});
        }
    }
    return diags;
}

void validate_or_throw(const Plan& plan) {
    auto diags = validate(plan);
    if (diags.empty()) return;
    std::string msg;
    for (const auto& d : diags) {
        if (!msg.empty()) msg += "; ";
        msg += "node " + std::to_string(d.node_index) + ": " + d.message;
    }
    throw Error(ErrorCode::kValidation, msg);
}

} // namespace tierq
