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

#include "support/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace tierq::testing {
namespace {

using Row = std::vector<Value>;

struct Frame {
    std::vector<std::string> names;
    std::vector<Row> rows;

    size_t col(const std::string& name) const {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw std::runtime_error("reference: no column " + name);
        return static_cast<size_t>(it - names.begin());
    }
};

bool null(const Value& v) { return std::holds_alternative<std::monostate>(v); }
bool is_int(const Value& v) { return std::holds_alternative<int64_t>(v); }
double as_double(const Value& v) { return is_int(v) ? static_cast<double>(std::get<int64_t>(v)) : std::get<double>(v); }

// Truth values are int64 0/1; null is unknown.
Value truth(bool b) { return int64_t{b ? 1 : 0}; }

Value eval(const Expr& e, const Frame& f, const Row& row);

Value eval_cmp(CmpOp op, const Value& a, const Value& b) {
    if (null(a) || null(b)) return {};
    int c;
    if (std::holds_alternative<std::string>(a)) {
        const auto& x = std::get<std::string>(a);
        const auto& y = std::get<std::string>(b);
        c = x < y ? -1 : (x == y ? 0 : 1);
    } else if (is_int(a) && is_int(b)) {
        int64_t x = std::get<int64_t>(a), y = std::get<int64_t>(b);
        c = x < y ? -1 : (x == y ? 0 : 1);
    } else {
        double x = as_double(a), y = as_double(b);
        if (std::isnan(x) || std::isnan(y)) return truth(op == CmpOp::kNe);
        c = x < y ? -1 : (x == y ? 0 : 1);
    }
    switch (op) {
    case CmpOp::kEq: return truth(c == 0);
    case CmpOp::kNe: return truth(c != 0);
    case CmpOp::kLt: return truth(c < 0);
    case CmpOp::kLe: return truth(c <= 0);
    case CmpOp::kGt: return truth(c > 0);
    case CmpOp::kGe: return truth(c >= 0);
    }
    return {};
}

Value eval_arith(ArithOp op, const Value& a, const Value& b) {
    if (null(a) || null(b)) return {};
    if (is_int(a) && is_int(b)) {
        // Two's-complement wraparound, computed in unsigned arithmetic.
        auto x = static_cast<uint64_t>(std::get<int64_t>(a)), y = static_cast<uint64_t>(std::get<int64_t>(b));
        int64_t sx = std::get<int64_t>(a), sy = std::get<int64_t>(b);
        switch (op) {
        case ArithOp::kAdd: return static_cast<int64_t>(x + y);
        case ArithOp::kSub: return static_cast<int64_t>(x - y);
        case ArithOp::kMul: return static_cast<int64_t>(x * y);
        case ArithOp::kDiv:
            if (sy == 0) return {};
            if (sy == -1) return static_cast<int64_t>(0 - x);
            return sx / sy;
        case ArithOp::kMod:
            if (sy == 0) return {};
            if (sy == -1) return int64_t{0};
            return sx % sy;
        }
    }
    double x = as_double(a), y = as_double(b);
    switch (op) {
    case ArithOp::kAdd: return x + y;
    case ArithOp::kSub: return x - y;
    case ArithOp::kMul: return x * y;
    case ArithOp::kDiv: return y == 0 ? Value{} : Value{x / y};
    case ArithOp::kMod: return y == 0 ? Value{} : Value{std::fmod(x, y)};
    }
    return {};
}

Value logic(const std::vector<Expr>& terms, bool is_and, const Frame& f, const Row& row) {
    bool unknown = false;
    for (const auto& t : terms) {
        Value v = eval(t, f, row);
        if (null(v)) {
            unknown = true;
        } else if ((std::get<int64_t>(v) != 0) != is_and) {
            return truth(!is_and);
        }
    }
    if (unknown) return {};
    return truth(is_and);
}

Value eval(const Expr& e, const Frame& f, const Row& row) {
    const auto& v = e->v;
    if (const auto* c = std::get_if<ColumnRef>(&v)) return row[f.col(c->name)];
    if (const auto* l = std::get_if<Literal>(&v)) return l->value;
    if (const auto* a = std::get_if<ArrayIndex>(&v)) {
        const Value& list = row[f.col(a->column)];
        if (null(list) || a->index < 1) return {};
        auto at = static_cast<size_t>(a->index - 1);
        if (const auto* d = std::get_if<ListF64>(&list)) return at < d->size() ? Value{(*d)[at]} : Value{};
        const auto& i = std::get<ListI32>(list);
        return at < i.size() ? Value{static_cast<int64_t>(i[at])} : Value{};
    }
    if (const auto* c = std::get_if<Cmp>(&v)) return eval_cmp(c->op, eval(c->lhs, f, row), eval(c->rhs, f, row));
    if (const auto* a = std::get_if<Arith>(&v)) return eval_arith(a->op, eval(a->lhs, f, row), eval(a->rhs, f, row));
    if (const auto* fn = std::get_if<Func>(&v)) {
        Value x = eval(fn->args.at(0), f, row);
        if (null(x)) return {};
        if (fn->fn == FuncName::kAbs && is_int(x)) {
            int64_t i = std::get<int64_t>(x);
            return i < 0 ? static_cast<int64_t>(0 - static_cast<uint64_t>(i)) : i;
        }
        double d = as_double(x), r = 0;
        switch (fn->fn) {
        case FuncName::kSqrt: r = std::sqrt(d); break;
        case FuncName::kCosh: r = std::cosh(d); break;
        case FuncName::kCos: r = std::cos(d); break;
        case FuncName::kAbs: r = std::fabs(d); break;
        }
        return std::isnan(r) ? Value{} : Value{r};
    }
    if (const auto* a = std::get_if<And>(&v)) return logic(a->terms, true, f, row);
    if (const auto* o = std::get_if<Or>(&v)) return logic(o->terms, false, f, row);
    if (const auto* b = std::get_if<Between>(&v)) {
        Value x = eval(b->value, f, row);
        Value ge = eval_cmp(CmpOp::kGe, x, eval(b->lo, f, row));
        Value le = eval_cmp(CmpOp::kLe, x, eval(b->hi, f, row));
        if ((!null(ge) && std::get<int64_t>(ge) == 0) || (!null(le) && std::get<int64_t>(le) == 0)) return truth(false);
        if (null(ge) || null(le)) return {};
        return truth(true);
    }
    if (const auto* n = std::get_if<IsNotNull>(&v)) return truth(!null(eval(n->value, f, row)));
    throw std::runtime_error("reference: unhandled expression");
}

bool is_true(const Value& v) { return !null(v) && std::get<int64_t>(v) != 0; }

Value aggregate(const Measure& m, AggPhase phase, const Frame& f, const std::vector<size_t>& members, bool partial_sum) {
    std::vector<Value> xs;
    for (size_t r : members) xs.push_back(m.args.empty() ? Value{int64_t{1}} : eval(m.args[0], f, f.rows[r]));
    std::vector<Value> present;
    for (auto& x : xs) {
        if (!null(x)) present.push_back(x);
    }
    switch (m.fn) {
    case AggFn::kCount: {
        if (phase != AggPhase::kFinal) return static_cast<int64_t>(present.size());
        int64_t n = 0;
        for (auto& x : present) n += std::get<int64_t>(x);
        return n;
    }
    case AggFn::kSum: {
        if (present.empty()) return {};
        if (is_int(present[0])) {
            uint64_t s = 0;
            for (auto& x : present) s += static_cast<uint64_t>(std::get<int64_t>(x));
            return static_cast<int64_t>(s);
        }
        double s = 0;
        for (auto& x : present) s += std::get<double>(x);
        return s;
    }
    case AggFn::kMin:
    case AggFn::kMax: {
        Value best;
        for (auto& x : present) {
            if (std::holds_alternative<double>(x) && std::isnan(std::get<double>(x))) continue;
            if (null(best)) {
                best = x;
                continue;
            }
            bool less = std::holds_alternative<std::string>(x) ? std::get<std::string>(x) < std::get<std::string>(best)
                        : is_int(x) ? std::get<int64_t>(x) < std::get<int64_t>(best)
                                    : std::get<double>(x) < std::get<double>(best);
            bool greater = std::holds_alternative<std::string>(x) ? std::get<std::string>(best) < std::get<std::string>(x)
                           : is_int(x) ? std::get<int64_t>(best) < std::get<int64_t>(x)
                                       : std::get<double>(best) < std::get<double>(x);
            if (m.fn == AggFn::kMin ? less : greater) best = x;
        }
        return best;
    }
    case AggFn::kAvg: {
        if (phase == AggPhase::kFinal) {
            double s = 0;
            int64_t n = 0;
            for (size_t r : members) {
                Value sv = eval(m.args[0], f, f.rows[r]), nv = eval(m.args[1], f, f.rows[r]);
                if (!null(sv)) s += std::get<double>(sv);
                if (!null(nv)) n += std::get<int64_t>(nv);
            }
            return n == 0 ? Value{} : Value{s / static_cast<double>(n)};
        }
        double s = 0;
        for (auto& x : present) s += as_double(x);
        if (partial_sum) return present.empty() ? Value{} : Value{s};
        return present.empty() ? Value{} : Value{s / static_cast<double>(present.size())};
    }
    case AggFn::kMedian: {
        if (present.empty()) return {};
        std::sort(present.begin(), present.end(), [](const Value& a, const Value& b) {
            if (is_int(a)) return std::get<int64_t>(a) < std::get<int64_t>(b);
            double x = std::get<double>(a), y = std::get<double>(b);
            return std::isnan(y) ? !std::isnan(x) : x < y;
        });
        return present[(present.size() - 1) / 2];
    }
    }
    return {};
}

Frame run_aggregate(const AggregateNode& a, const Frame& in) {
    std::vector<size_t> key_cols;
    for (const auto& g : a.groupings) key_cols.push_back(in.col(g));
    std::map<Row, size_t> index;
    std::vector<Row> keys;
    std::vector<std::vector<size_t>> members;
    if (key_cols.empty()) {
        index.emplace(Row{}, 0);
        keys.emplace_back();
        members.emplace_back();
    }
    for (size_t r = 0; r < in.rows.size(); ++r) {
        Row key;
        for (size_t c : key_cols) {
            Value v = in.rows[r][c];
            if (std::holds_alternative<double>(v) && std::get<double>(v) == 0) v = 0.0;
            key.push_back(v);
        }
        auto [it, inserted] = index.emplace(key, keys.size());
        if (inserted) {
            keys.push_back(key);
            members.emplace_back();
        }
        members[it->second].push_back(r);
    }
    Frame out;
    out.names = a.groupings;
    for (const auto& m : a.measures) {
        if (m.fn == AggFn::kAvg && a.phase == AggPhase::kPartial) {
            out.names.push_back(m.name + "$sum");
            out.names.push_back(m.name + "$count");
        } else {
            out.names.push_back(m.name);
        }
    }
    for (size_t g = 0; g < keys.size(); ++g) {
        Row row;
        for (size_t k = 0; k < key_cols.size(); ++k) row.push_back(in.rows[members[g].front()][key_cols[k]]);
        for (const auto& m : a.measures) {
            if (m.fn == AggFn::kAvg && a.phase == AggPhase::kPartial) {
                row.push_back(aggregate(m, a.phase, in, members[g], true));
                Measure count{AggFn::kCount, m.args, m.name};
                row.push_back(aggregate(count, AggPhase::kFull, in, members[g], false));
            } else {
                row.push_back(aggregate(m, a.phase, in, members[g], false));
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

// Negative, zero or positive; nulls last regardless of direction.
int order(const Value& a, const Value& b, bool ascending) {
    if (null(a) || null(b)) return null(a) == null(b) ? 0 : (null(a) ? 1 : -1);
    int c;
    if (const auto* s = std::get_if<std::string>(&a)) {
        c = s->compare(std::get<std::string>(b));
    } else if (is_int(a)) {
        int64_t x = std::get<int64_t>(a), y = std::get<int64_t>(b);
        c = x < y ? -1 : (x > y ? 1 : 0);
    } else {
        double x = std::get<double>(a), y = std::get<double>(b);
        if (std::isnan(x) || std::isnan(y)) {
            c = std::isnan(x) == std::isnan(y) ? 0 : (std::isnan(x) ? 1 : -1);
        } else {
            c = x < y ? -1 : (x > y ? 1 : 0);
        }
    }
    return ascending ? c : -c;
}

} // namespace

Table reference_execute(const Plan& plan, const Table& table, uint64_t rowid_base) {
    Frame f;
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
        const PlanNode& node = plan.nodes[i];
        if (const auto* r = std::get_if<ReadNode>(&node)) {
            f.names = r->base_schema.names();
            if (r->with_rowid) f.names.push_back("rowid");
            ColumnBatch all = table.combined();
            for (size_t row = 0; row < all.num_rows(); ++row) {
                Row values;
                for (size_t c = 0; c < all.num_columns(); ++c) values.push_back(all.column(c).value(row));
                if (r->with_rowid) values.push_back(static_cast<int64_t>(rowid_base + row));
                if (!r->filter || is_true(eval(r->filter, f, values))) f.rows.push_back(std::move(values));
            }
        } else if (const auto* fl = std::get_if<FilterNode>(&node)) {
            std::vector<Row> kept;
            for (auto& row : f.rows) {
                if (is_true(eval(fl->predicate, f, row))) kept.push_back(std::move(row));
            }
            f.rows = std::move(kept);
        } else if (const auto* p = std::get_if<ProjectNode>(&node)) {
            Frame out;
            for (const auto& item : p->items) out.names.push_back(item.name);
            for (const auto& row : f.rows) {
                Row o;
                for (const auto& item : p->items) o.push_back(eval(item.expr, f, row));
                out.rows.push_back(std::move(o));
            }
            f = std::move(out);
        } else if (const auto* a = std::get_if<AggregateNode>(&node)) {
            f = run_aggregate(*a, f);
        } else if (const auto* s = std::get_if<SortNode>(&node)) {
            std::vector<std::pair<Row, Row>> keyed;
            for (auto& row : f.rows) {
                Row k;
                for (const auto& key : s->keys) k.push_back(eval(key.expr, f, row));
                keyed.emplace_back(std::move(k), std::move(row));
            }
            std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& x, const auto& y) {
                for (size_t k = 0; k < s->keys.size(); ++k) {
                    int c = order(x.first[k], y.first[k], s->keys[k].ascending);
                    if (c != 0) return c < 0;
                }
                return false;
            });
            f.rows.clear();
            for (auto& [k, row] : keyed) f.rows.push_back(std::move(row));
        } else {
            throw std::runtime_error("reference: unsupported node");
        }
    }
    Schema schema = output_schema(plan);
    std::vector<ColumnBuilder> builders;
    for (const auto& field : schema.fields()) builders.emplace_back(field.type);
    for (const auto& row : f.rows) {
        for (size_t c = 0; c < row.size(); ++c) builders[c].append_value(row[c]);
    }
    std::vector<Column> cols;
    for (auto& b : builders) cols.push_back(b.finish());
    if (f.rows.empty()) return Table(schema);
    return Table(schema, {ColumnBatch(schema, std::move(cols))});
}

} // namespace tierq::testing
