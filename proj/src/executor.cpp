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

#include "tierq/executor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "tierq/error.hpp"

namespace tierq {

void ExecContext::add_table(const std::string& ref, Table table, uint64_t rowid_base) {
    tables[ref] = TableInput{std::make_shared<const Table>(std::move(table)), rowid_base};
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using ColumnPtr = std::shared_ptr<const Column>;

Column fixed_column(TypeKind t, size_t n) {
    Column c;
    c.type = t;
    c.valid.assign(n, 0);
    switch (t) {
    case TypeKind::kInt32:
    case TypeKind::kBool: c.i32.assign(n, 0); break;
    case TypeKind::kInt64: c.i64.assign(n, 0); break;
    case TypeKind::kFloat64: c.f64.assign(n, 0.0); break;
    default: throw Error(ErrorCode::kExecError, "not a fixed-width type: " + std::string(type_name(t)));
    }
    return c;
}

int64_t int_at(const Column& c, size_t r) {
    return c.type == TypeKind::kInt64 ? c.i64[r] : static_cast<int64_t>(c.i32[r]);
}

double num_at(const Column& c, size_t r) {
    switch (c.type) {
    case TypeKind::kInt32: return c.i32[r];
    case TypeKind::kInt64: return static_cast<double>(c.i64[r]);
    default: return c.f64[r];
    }
}

ColumnPtr eval(const Expr& e, const ColumnBatch& batch);

ColumnPtr eval_literal(const Literal& l, size_t n) {
    if (is_variable_width(l.type)) {
        ColumnBuilder b(l.type, n);
        for (size_t r = 0; r < n; ++r) b.append_value(l.value);
        return std::make_shared<Column>(b.finish());
    }
    Column c = fixed_column(l.type, n);
    if (is_null(l.value)) return std::make_shared<Column>(std::move(c));
    std::fill(c.valid.begin(), c.valid.end(), 1);
    switch (l.type) {
    case TypeKind::kInt32: std::fill(c.i32.begin(), c.i32.end(), static_cast<int32_t>(std::get<int64_t>(l.value))); break;
    case TypeKind::kInt64: std::fill(c.i64.begin(), c.i64.end(), std::get<int64_t>(l.value)); break;
    default: {
        double v = std::holds_alternative<double>(l.value) ? std::get<double>(l.value)
                                                           : static_cast<double>(std::get<int64_t>(l.value));
        std::fill(c.f64.begin(), c.f64.end(), v);
    }
    }
    return std::make_shared<Column>(std::move(c));
}

ColumnPtr eval_index(const ArrayIndex& a, const ColumnBatch& batch) {
    auto idx = batch.schema().index_of(a.column);
    if (!idx) throw Error(ErrorCode::kValidation, "unknown column '" + a.column + "'");
    const Column& list = batch.column(*idx);
    if (!is_list(list.type)) throw Error(ErrorCode::kValidation, "element access on non-list '" + a.column + "'");
    size_t n = list.size();
    Column c = fixed_column(element_type(list.type), n);
    for (size_t r = 0; r < n; ++r) {
        if (!list.valid[r] || a.index < 1 || static_cast<size_t>(a.index) > list.list_size(r)) continue;
        size_t at = list.offsets[r] + static_cast<size_t>(a.index - 1);
        c.valid[r] = 1;
        if (list.type == TypeKind::kListFloat64) {
            c.f64[r] = list.f64[at];
        } else {
            c.i32[r] = list.i32[at];
        }
    }
    return std::make_shared<Column>(std::move(c));
}

template <class T>
bool compare(CmpOp op, const T& a, const T& b) {
    switch (op) {
    case CmpOp::kEq: return a == b;
    case CmpOp::kNe: return a != b;
    case CmpOp::kLt: return a < b;
    case CmpOp::kLe: return a <= b;
    case CmpOp::kGt: return a > b;
    case CmpOp::kGe: return a >= b;
    }
    return false;
}

Column compare_columns(CmpOp op, const Column& l, const Column& r) {
    size_t n = l.size();
    Column c = fixed_column(TypeKind::kBool, n);
    bool text = l.type == TypeKind::kUtf8;
    bool ints = is_integer(l.type) && is_integer(r.type);
    if (text != (r.type == TypeKind::kUtf8) || (!text && !(is_numeric(l.type) && is_numeric(r.type)))) {
        throw Error(ErrorCode::kValidation, "cannot compare " + std::string(type_name(l.type)) + " with " +
                                                    std::string(type_name(r.type)));
    }
    for (size_t i = 0; i < n; ++i) {
        if (!l.valid[i] || !r.valid[i]) continue;
        c.valid[i] = 1;
        bool v;
        if (text) {
            v = compare(op, l.str(i), r.str(i));
        } else if (ints) {
            v = compare(op, int_at(l, i), int_at(r, i));
        } else {
            v = compare(op, num_at(l, i), num_at(r, i));
        }
        c.i32[i] = v ? 1 : 0;
    }
    return c;
}

int64_t wrap(uint64_t v) {
    int64_t out;
    std::memcpy(&out, &v, sizeof out);
    return out;
}

ColumnPtr eval_arith(const Arith& a, const ColumnBatch& batch) {
    ColumnPtr lp = eval(a.lhs, batch), rp = eval(a.rhs, batch);
    const Column &l = *lp, &r = *rp;
    if (!is_numeric(l.type) || !is_numeric(r.type)) throw Error(ErrorCode::kValidation, "arithmetic on non-numeric");
    size_t n = l.size();
    if (is_integer(l.type) && is_integer(r.type)) {
        Column c = fixed_column(TypeKind::kInt64, n);
        for (size_t i = 0; i < n; ++i) {
            if (!l.valid[i] || !r.valid[i]) continue;
            int64_t x = int_at(l, i), y = int_at(r, i);
            auto ux = static_cast<uint64_t>(x), uy = static_cast<uint64_t>(y);
            int64_t v = 0;
            switch (a.op) {
            case ArithOp::kAdd: v = wrap(ux + uy); break;
            case ArithOp::kSub: v = wrap(ux - uy); break;
            case ArithOp::kMul: v = wrap(ux * uy); break;
            case ArithOp::kDiv:
                if (y == 0) continue;
                v = y == -1 ? wrap(0 - ux) : x / y;
                break;
            case ArithOp::kMod:
                if (y == 0) continue;
                v = y == -1 ? 0 : x % y;
                break;
            }
            c.valid[i] = 1;
            c.i64[i] = v;
        }
        return std::make_shared<Column>(std::move(c));
    }
    Column c = fixed_column(TypeKind::kFloat64, n);
    for (size_t i = 0; i < n; ++i) {
        if (!l.valid[i] || !r.valid[i]) continue;
        double x = num_at(l, i), y = num_at(r, i);
        double v = 0;
        switch (a.op) {
        case ArithOp::kAdd: v = x + y; break;
        case ArithOp::kSub: v = x - y; break;
        case ArithOp::kMul: v = x * y; break;
        case ArithOp::kDiv:
            if (y == 0) continue;
            v = x / y;
            break;
        case ArithOp::kMod:
            if (y == 0) continue;
            v = std::fmod(x, y);
            break;
        }
        c.valid[i] = 1;
        c.f64[i] = v;
    }
    return std::make_shared<Column>(std::move(c));
}

ColumnPtr eval_func(const Func& f, const ColumnBatch& batch) {
    if (f.args.size() != 1) throw Error(ErrorCode::kValidation, std::string(func_name(f.fn)) + " takes one argument");
    ColumnPtr ap = eval(f.args[0], batch);
    const Column& a = *ap;
    size_t n = a.size();
    if (f.fn == FuncName::kAbs && is_integer(a.type)) {
        Column c = fixed_column(TypeKind::kInt64, n);
        for (size_t i = 0; i < n; ++i) {
            if (!a.valid[i]) continue;
            int64_t v = int_at(a, i);
            c.valid[i] = 1;
            c.i64[i] = v < 0 ? wrap(0 - static_cast<uint64_t>(v)) : v;
        }
        return std::make_shared<Column>(std::move(c));
    }
    Column c = fixed_column(TypeKind::kFloat64, n);
    for (size_t i = 0; i < n; ++i) {
        if (!a.valid[i]) continue;
        double x = num_at(a, i), v = 0;
        switch (f.fn) {
        case FuncName::kSqrt: v = std::sqrt(x); break;
        case FuncName::kCosh: v = std::cosh(x); break;
        case FuncName::kCos: v = std::cos(x); break;
        case FuncName::kAbs: v = std::fabs(x); break;
        }
        if (std::isnan(v)) continue;
        c.valid[i] = 1;
        c.f64[i] = v;
    }
    return std::make_shared<Column>(std::move(c));
}

// Three-valued AND (is_and) or OR over boolean columns.
Column combine(const std::vector<ColumnPtr>& terms, bool is_and, size_t n) {
    Column c = fixed_column(TypeKind::kBool, n);
    const int32_t dominant = is_and ? 0 : 1;
    for (size_t i = 0; i < n; ++i) {
        bool decided = false, unknown = false;
        for (const auto& t : terms) {
            if (!t->valid[i]) {
                unknown = true;
            } else if (t->i32[i] == dominant) {
                decided = true;
                break;
            }
        }
        if (decided) {
            c.valid[i] = 1;
            c.i32[i] = dominant;
        } else if (!unknown) {
            c.valid[i] = 1;
            c.i32[i] = 1 - dominant;
        }
    }
    return c;
}

ColumnPtr eval(const Expr& e, const ColumnBatch& batch) {
    const size_t n = batch.num_rows();
    return std::visit(
            overloaded{
                    [&](const ColumnRef& c) -> ColumnPtr {
                        auto idx = batch.schema().index_of(c.name);
                        if (!idx) throw Error(ErrorCode::kValidation, "unknown column '" + c.name + "'");
                        return batch.column_ptr(*idx);
                    },
                    [&](const Literal& l) { return eval_literal(l, n); },
                    [&](const ArrayIndex& a) { return eval_index(a, batch); },
                    [&](const Cmp& c) -> ColumnPtr {
                        ColumnPtr l = eval(c.lhs, batch), r = eval(c.rhs, batch);
                        return std::make_shared<Column>(compare_columns(c.op, *l, *r));
                    },
                    [&](const Arith& a) { return eval_arith(a, batch); },
                    [&](const Func& f) { return eval_func(f, batch); },
                    [&](const And& a) -> ColumnPtr {
                        std::vector<ColumnPtr> terms;
                        for (const auto& t : a.terms) terms.push_back(eval(t, batch));
                        return std::make_shared<Column>(combine(terms, true, n));
                    },
                    [&](const Or& o) -> ColumnPtr {
                        std::vector<ColumnPtr> terms;
                        for (const auto& t : o.terms) terms.push_back(eval(t, batch));
                        return std::make_shared<Column>(combine(terms, false, n));
                    },
                    [&](const Between& b) -> ColumnPtr {
                        ColumnPtr v = eval(b.value, batch), lo = eval(b.lo, batch), hi = eval(b.hi, batch);
                        std::vector<ColumnPtr> terms = {
                                std::make_shared<Column>(compare_columns(CmpOp::kGe, *v, *lo)),
                                std::make_shared<Column>(compare_columns(CmpOp::kLe, *v, *hi))};
                        return std::make_shared<Column>(combine(terms, true, n));
                    },
                    [&](const IsNotNull& x) -> ColumnPtr {
                        ColumnPtr v = eval(x.value, batch);
                        Column c = fixed_column(TypeKind::kBool, n);
                        std::fill(c.valid.begin(), c.valid.end(), 1);
                        for (size_t i = 0; i < n; ++i) c.i32[i] = v->valid[i] ? 1 : 0;
                        return std::make_shared<Column>(std::move(c));
                    },
            },
            e->v);
}

// ---- operators -----------------------------------------------------------

ColumnBatch filter_batch(const ColumnBatch& batch, const Expr& pred) {
    ColumnPtr keep = eval(pred, batch);
    if (keep->type != TypeKind::kBool) throw Error(ErrorCode::kValidation, "filter predicate is not boolean");
    std::vector<uint32_t> rows;
    for (size_t i = 0; i < batch.num_rows(); ++i) {
        if (keep->valid[i] && keep->i32[i]) rows.push_back(static_cast<uint32_t>(i));
    }
    if (rows.size() == batch.num_rows()) return batch;
    return batch.take(rows);
}

Table from_batches(const Schema& schema, std::vector<ColumnBatch> batches) {
    std::vector<ColumnBatch> kept;
    for (auto& b : batches) {
        if (b.num_rows() > 0) kept.push_back(std::move(b));
    }
    return Table(schema, std::move(kept));
}

Table run_read(const ReadNode& r, const ExecContext& ctx) {
    auto it = ctx.tables.find(r.table_ref);
    if (it == ctx.tables.end()) throw Error(ErrorCode::kExecError, "no input table '" + r.table_ref + "'");
    const Table& src = *it->second.table;
    if (!(src.schema() == r.base_schema)) {
        throw Error(ErrorCode::kExecError, "table '" + r.table_ref + "' has schema " + src.schema().to_string() +
                                                   ", plan expects " + r.base_schema.to_string());
    }
    Table input = src.rebatched(std::max<size_t>(1, ctx.batch_rows));
    Schema out_schema = node_output_schema(PlanNode(r), Schema());
    std::vector<ColumnBatch> out;
    uint64_t next_rowid = it->second.rowid_base;
    for (const auto& b : input.batches()) {
        ColumnBatch batch = b;
        if (r.with_rowid) {
            std::vector<std::shared_ptr<const Column>> cols;
            for (size_t c = 0; c < b.num_columns(); ++c) cols.push_back(b.column_ptr(c));
            Column rowid = fixed_column(TypeKind::kInt64, b.num_rows());
            std::fill(rowid.valid.begin(), rowid.valid.end(), 1);
            std::iota(rowid.i64.begin(), rowid.i64.end(), static_cast<int64_t>(next_rowid));
            cols.push_back(std::make_shared<Column>(std::move(rowid)));
            batch = ColumnBatch(out_schema, std::move(cols));
        }
        next_rowid += b.num_rows();
        if (r.filter) batch = filter_batch(batch, r.filter);
        out.push_back(std::move(batch));
    }
    return from_batches(out_schema, std::move(out));
}

Table run_project(const ProjectNode& p, const Table& input) {
    Schema out_schema = node_output_schema(PlanNode(p), input.schema());
    std::vector<ColumnBatch> out;
    for (const auto& b : input.batches()) {
        std::vector<std::shared_ptr<const Column>> cols;
        for (const auto& item : p.items) cols.push_back(eval(item.expr, b));
        out.push_back(ColumnBatch(out_schema, std::move(cols)));
    }
    return from_batches(out_schema, std::move(out));
}

// Sort comparison for one non-null pair; NaN orders after every number.
int compare_cells(const Column& c, size_t a, size_t b) {
    switch (c.type) {
    case TypeKind::kUtf8: {
        int r = c.str(a).compare(c.str(b));
        return r < 0 ? -1 : (r > 0 ? 1 : 0);
    }
    case TypeKind::kInt32:
    case TypeKind::kInt64: {
        int64_t x = int_at(c, a), y = int_at(c, b);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    default: {
        double x = c.f64[a], y = c.f64[b];
        bool nx = std::isnan(x), ny = std::isnan(y);
        if (nx || ny) return nx == ny ? 0 : (nx ? 1 : -1);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    }
}

Table run_sort(const SortNode& s, const Table& input) {
    node_output_schema(PlanNode(s), input.schema());
    ColumnBatch all = input.combined();
    std::vector<ColumnPtr> keys;
    for (const auto& k : s.keys) keys.push_back(eval(k.expr, all));
    std::vector<uint32_t> order(all.num_rows());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        for (size_t k = 0; k < keys.size(); ++k) {
            const Column& c = *keys[k];
            bool va = c.valid[a], vb = c.valid[b];
            if (!va || !vb) {
                if (va == vb) continue;
                return va; // nulls last
            }
            int r = compare_cells(c, a, b);
            if (r != 0) return s.keys[k].ascending ? r < 0 : r > 0;
        }
        return false;
    });
    return from_batches(input.schema(), {all.take(order)});
}

// ---- aggregation ---------------------------------------------------------

void append_key(std::string& key, const Column& c, size_t r) {
    if (!c.valid[r]) {
        key.push_back('\0');
        return;
    }
    key.push_back('\1');
    switch (c.type) {
    case TypeKind::kInt32:
    case TypeKind::kInt64: {
        int64_t v = int_at(c, r);
        key.append(reinterpret_cast<const char*>(&v), sizeof v);
        break;
    }
    case TypeKind::kFloat64: {
        double v = c.f64[r];
        if (v == 0) v = 0; // -0.0 groups with 0.0
        if (std::isnan(v)) v = std::numeric_limits<double>::quiet_NaN();
        key.append(reinterpret_cast<const char*>(&v), sizeof v);
        break;
    }
    case TypeKind::kUtf8: {
        auto s = c.str(r);
        auto len = static_cast<uint32_t>(s.size());
        key.append(reinterpret_cast<const char*>(&len), sizeof len);
        key.append(s);
        break;
    }
    default: throw Error(ErrorCode::kValidation, "cannot group by " + std::string(type_name(c.type)));
    }
}

// Running state of one measure across every group.
class Accumulator {
public:
    Accumulator(const Measure& m, AggPhase phase, const Schema& input) : _m(m), _phase(phase) {
        if (!m.args.empty()) _arg_type = infer_type(m.args[0], input);
    }

    void resize(size_t groups) {
        _has.resize(groups, 0);
        _i.resize(groups, 0);
        _d.resize(groups, 0.0);
        _n.resize(groups, 0);
        if (_arg_type == TypeKind::kUtf8) _s.resize(groups);
        if (_m.fn == AggFn::kMedian) {
            _values.resize(groups);
            _ints.resize(groups);
        }
    }

    void add_batch(const ColumnBatch& batch, const std::vector<uint32_t>& group_of) {
        std::vector<ColumnPtr> args;
        for (const auto& a : _m.args) args.push_back(eval(a, batch));
        for (size_t r = 0; r < batch.num_rows(); ++r) add(group_of[r], args, r);
    }

    // Output columns for this measure (two for a partial avg).
    std::vector<Column> finish(const Schema& out_schema, size_t& field) const {
        size_t groups = _has.size();
        std::vector<Column> out;
        auto make = [&]() { return fixed_column(out_schema.field(field).type, groups); };
        switch (_m.fn) {
        case AggFn::kCount: {
            Column c = make();
            std::fill(c.valid.begin(), c.valid.end(), 1);
            c.i64 = _n;
            out.push_back(std::move(c));
            break;
        }
        case AggFn::kAvg:
            if (_phase == AggPhase::kPartial) {
                Column sum = make();
                ++field;
                Column count = fixed_column(out_schema.field(field).type, groups);
                std::fill(count.valid.begin(), count.valid.end(), 1);
                for (size_t g = 0; g < groups; ++g) {
                    if (_n[g] > 0) {
                        sum.valid[g] = 1;
                        sum.f64[g] = _d[g];
                    }
                    count.i64[g] = _n[g];
                }
                out.push_back(std::move(sum));
                out.push_back(std::move(count));
            } else {
                Column c = make();
                for (size_t g = 0; g < groups; ++g) {
                    if (_n[g] > 0) {
                        c.valid[g] = 1;
                        c.f64[g] = _d[g] / static_cast<double>(_n[g]);
                    }
                }
                out.push_back(std::move(c));
            }
            break;
        case AggFn::kMedian: {
            Column c = make();
            for (size_t g = 0; g < groups; ++g) {
                if (is_integer(_arg_type)) {
                    std::vector<int64_t> v = _ints[g];
                    if (v.empty()) continue;
                    auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
                    std::nth_element(v.begin(), mid, v.end());
                    c.valid[g] = 1;
                    if (c.type == TypeKind::kInt64) {
                        c.i64[g] = *mid;
                    } else {
                        c.i32[g] = static_cast<int32_t>(*mid);
                    }
                } else {
                    // NaN sorts after every number, as in Sort.
                    std::vector<double> v = _values[g];
                    if (v.empty()) continue;
                    auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
                    std::nth_element(v.begin(), mid, v.end(), [](double a, double b) {
                        return std::isnan(b) ? !std::isnan(a) : a < b;
                    });
                    c.valid[g] = 1;
                    c.f64[g] = *mid;
                }
            }
            out.push_back(std::move(c));
            break;
        }
        default: {
            TypeKind t = out_schema.field(field).type;
            if (t == TypeKind::kUtf8) {
                ColumnBuilder b(t, groups);
                for (size_t g = 0; g < groups; ++g) {
                    if (_has[g]) {
                        b.append_string(_s[g]);
                    } else {
                        b.append_null();
                    }
                }
                out.push_back(b.finish());
                break;
            }
            Column c = make();
            for (size_t g = 0; g < groups; ++g) {
                if (!_has[g]) continue;
                c.valid[g] = 1;
                if (t == TypeKind::kFloat64) {
                    c.f64[g] = _d[g];
                } else if (t == TypeKind::kInt64) {
                    c.i64[g] = _i[g];
                } else {
                    c.i32[g] = static_cast<int32_t>(_i[g]);
                }
            }
            out.push_back(std::move(c));
        }
        }
        ++field;
        return out;
    }

private:
    void add(uint32_t g, const std::vector<ColumnPtr>& args, size_t r) {
        switch (_m.fn) {
        case AggFn::kCount:
            if (_phase == AggPhase::kFinal) {
                if (args[0]->valid[r]) _n[g] += int_at(*args[0], r);
            } else if (args.empty() || args[0]->valid[r]) {
                ++_n[g];
            }
            return;
        case AggFn::kAvg:
            if (_phase == AggPhase::kFinal) {
                if (args[0]->valid[r]) _d[g] += args[0]->f64[r];
                if (args[1]->valid[r]) _n[g] += int_at(*args[1], r);
            } else if (args[0]->valid[r]) {
                _d[g] += num_at(*args[0], r);
                ++_n[g];
            }
            return;
        case AggFn::kMedian:
            if (!args[0]->valid[r]) return;
            if (is_integer(args[0]->type)) {
                _ints[g].push_back(int_at(*args[0], r));
            } else {
                _values[g].push_back(args[0]->f64[r]);
            }
            return;
        case AggFn::kSum: {
            const Column& c = *args[0];
            if (!c.valid[r]) return;
            if (is_integer(c.type)) {
                _i[g] = wrap(static_cast<uint64_t>(_i[g]) + static_cast<uint64_t>(int_at(c, r)));
            } else {
                _d[g] += c.f64[r];
            }
            _has[g] = 1;
            return;
        }
        case AggFn::kMin:
        case AggFn::kMax: {
            const Column& c = *args[0];
            if (!c.valid[r]) return;
            bool less = _m.fn == AggFn::kMin;
            if (c.type == TypeKind::kUtf8) {
                auto s = c.str(r);
                if (!_has[g] || (less ? s < _s[g] : s > _s[g])) _s[g] = std::string(s);
            } else if (is_integer(c.type)) {
                int64_t v = int_at(c, r);
                if (!_has[g] || (less ? v < _i[g] : v > _i[g])) _i[g] = v;
            } else {
                double v = c.f64[r];
                if (std::isnan(v)) return; // NaN never wins a min or max
                if (!_has[g] || (less ? v < _d[g] : v > _d[g])) _d[g] = v;
            }
            _has[g] = 1;
            return;
        }
        }
    }

    const Measure& _m;
    AggPhase _phase;
    TypeKind _arg_type = TypeKind::kInt64;
    std::vector<uint8_t> _has;
    std::vector<int64_t> _i;
    std::vector<double> _d;
    std::vector<int64_t> _n;
    std::vector<std::string> _s;
    std::vector<std::vector<double>> _values;
    std::vector<std::vector<int64_t>> _ints;
};

Table run_aggregate(const AggregateNode& a, const Table& input) {
    const Schema& in_schema = input.schema();
    Schema out_schema = node_output_schema(PlanNode(a), in_schema);
    std::vector<size_t> key_idx;
    for (const auto& g : a.groupings) key_idx.push_back(*in_schema.index_of(g));

    std::vector<Accumulator> accs;
    for (const auto& m : a.measures) accs.emplace_back(m, a.phase, in_schema);

    std::unordered_map<std::string, uint32_t> groups;
    std::vector<ColumnBuilder> key_cols;
    for (size_t k : key_idx) key_cols.emplace_back(in_schema.field(k).type);
    size_t group_count = key_idx.empty() ? 1 : 0;
    for (auto& acc : accs) acc.resize(group_count);

    std::string key;
    for (const auto& batch : input.batches()) {
        std::vector<uint32_t> group_of(batch.num_rows(), 0);
        if (!key_idx.empty()) {
            for (size_t r = 0; r < batch.num_rows(); ++r) {
                key.clear();
                for (size_t k : key_idx) append_key(key, batch.column(k), r);
                auto [it, inserted] = groups.try_emplace(key, static_cast<uint32_t>(group_count));
                if (inserted) {
                    for (size_t k = 0; k < key_idx.size(); ++k) key_cols[k].append_from(batch.column(key_idx[k]), r);
                    ++group_count;
                }
                group_of[r] = it->second;
            }
            for (auto& acc : accs) acc.resize(group_count);
        }
        for (auto& acc : accs) acc.add_batch(batch, group_of);
    }

    std::vector<Column> cols;
    for (auto& b : key_cols) cols.push_back(b.finish());
    size_t field = key_idx.size();
    for (const auto& acc : accs) {
        for (auto& c : acc.finish(out_schema, field)) cols.push_back(std::move(c));
    }
    return from_batches(out_schema, {ColumnBatch(out_schema, std::move(cols))});
}

} // namespace

Column evaluate_expr(const Expr& expr, const ColumnBatch& batch) { return *eval(expr, batch); }

Table execute_aggregate(const AggregateNode& node, const Table& input) { return run_aggregate(node, input); }

Table execute_partial_aggregate(const AggregateNode& full, const Table& input) {
    return run_aggregate(split_aggregate(full).partial, input);
}

Table execute_final_aggregate(const AggregateNode& full, const Table& partials) {
    return run_aggregate(split_aggregate(full).final, partials);
}

Table execute(const Plan& plan, const ExecContext& ctx, std::vector<NodeTrace>* trace) {
    if (plan.nodes.empty() || !std::holds_alternative<ReadNode>(plan.nodes[0])) {
        throw Error(ErrorCode::kExecError, "plan must start with a read");
    }
    Table current;
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
        const PlanNode& node = plan.nodes[i];
        NodeTrace t;
        if (trace) {
            if (const auto* r = std::get_if<ReadNode>(&node)) {
                auto it = ctx.tables.find(r->table_ref);
                if (it != ctx.tables.end()) {
                    t.input_rows = it->second.table->num_rows();
                    t.input_bytes = it->second.table->logical_bytes();
                }
            } else {
                t.input_rows = current.num_rows();
                t.input_bytes = current.logical_bytes();
            }
        }
        try {
            current = std::visit(overloaded{
                                         [&](const ReadNode& r) { return run_read(r, ctx); },
                                         [&](const FilterNode& f) {
                                             node_output_schema(node, current.schema());
                                             std::vector<ColumnBatch> out;
                                             for (const auto& b : current.batches()) {
                                                 out.push_back(filter_batch(b, f.predicate));
                                             }
                                             return from_batches(current.schema(), std::move(out));
                                         },
                                         [&](const ProjectNode& p) { return run_project(p, current); },
                                         [&](const AggregateNode& a) { return run_aggregate(a, current); },
                                         [&](const SortNode& s) { return run_sort(s, current); },
                                         [&](const OtherNode&) -> Table {
                                             throw Error(ErrorCode::kExecError,
                                                         std::string(node_kind(node)) + " cannot be executed");
                                         },
                                 },
                                 node);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::kNonDecomposableMeasure) throw;
            throw Error(ErrorCode::kExecError,
                        "node " + std::to_string(i) + " (" + std::string(node_kind(node)) + "): " + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorCode::kExecError,
                        "node " + std::to_string(i) + " (" + std::string(node_kind(node)) + "): " + e.what());
        }
        if (trace) {
            t.output_rows = current.num_rows();
            t.output_bytes = current.logical_bytes();
            trace->push_back(t);
        }
    }
    if (!plan.emit_names.empty()) current = current.renamed(plan.emit_names);
    return current;
}

} // namespace tierq
