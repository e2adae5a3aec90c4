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

#include "tierq/costmodel.hpp"

#include <algorithm>
#include <cmath>

#include "tierq/error.hpp"

namespace tierq {

TableStats compute_table_stats(const Table& table, const HistogramOptions& opts) {
    TableStats s;
    s.row_count = table.num_rows();
    s.logical_bytes = table.logical_bytes();
    const Schema& schema = table.schema();
    std::vector<uint64_t> bytes(schema.size(), 0);
    for (const auto& b : table.batches()) {
        for (size_t c = 0; c < b.num_columns(); ++c) bytes[c] += column_logical_bytes(b.column(c));
    }
    for (size_t c = 0; c < schema.size(); ++c) {
        const Field& f = schema.field(c);
        s.column_width[f.name] =
                s.row_count ? static_cast<double>(bytes[c]) / static_cast<double>(s.row_count) : 0.0;
        if (is_numeric(f.type)) s.histograms.emplace(f.name, build_histogram(table, f.name, opts));
    }
    return s;
}

std::string_view coef_source_name(CoefSource s) {
    switch (s) {
    case CoefSource::kFixed: return "fixed";
    case CoefSource::kHistogram: return "histogram";
    case CoefSource::kWidthRatio: return "width_ratio";
    case CoefSource::kDistinctCap: return "distinct_cap";
    case CoefSource::kUnknown: return "unknown";
    }
    return "?";
}

std::optional<size_t> SizeEstimate::first_unknown() const {
    for (size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].coefficient.known()) return i;
    }
    return std::nullopt;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr const char* kRowid = "rowid";

// Bytes per row of a column of this type when nothing is measured:
// fixed width plus a validity bit; variable-width kinds assume 8 payload bytes.
double type_width(TypeKind t) {
    double w = static_cast<double>(value_width(t)) + 0.125;
    return is_variable_width(t) ? w + 8.0 : w;
}

struct ColumnInfo {
    double width = 0;
    // Stored column whose histogram still describes this one.
    std::optional<std::string> origin;
};

// Per-column knowledge flowing along the chain.
struct Flow {
    std::map<std::string, ColumnInfo> cols;
    double rows = 0;
    bool virtual_rowid = false;
};

const Histogram* histogram_for(const Flow& flow, const std::string& column, const TableStats& stats,
                               std::optional<Histogram>& scratch) {
    auto it = flow.cols.find(column);
    if (it == flow.cols.end() || !it->second.origin) return nullptr;
    const std::string& origin = *it->second.origin;
    if (auto h = stats.histograms.find(origin); h != stats.histograms.end()) return &h->second;
    if (origin == kRowid && flow.virtual_rowid) {
        scratch = sequence_histogram(kRowid, stats.row_count);
        return &*scratch;
    }
    return nullptr;
}

double row_width(const Flow& flow, const Schema& s) {
    double w = 0;
    for (const auto& f : s.fields()) {
        auto it = flow.cols.find(f.name);
        w += it != flow.cols.end() ? it->second.width : type_width(f.type);
    }
    return w;
}

struct Interval {
    std::optional<RangeBound> lo, hi;
};

std::optional<double> numeric_literal(const Expr& e) {
    const auto* l = std::get_if<Literal>(&e->v);
    if (!l) return std::nullopt;
    if (const auto* i = std::get_if<int64_t>(&l->value)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&l->value)) return *d;
    return std::nullopt;
}

const std::string* column_of(const Expr& e) {
    const auto* c = std::get_if<ColumnRef>(&e->v);
    return c ? &c->name : nullptr;
}

// A conjunct the histograms can answer: column against constants.
std::optional<std::pair<std::string, Interval>> range_conjunct(const Expr& e) {
    if (const auto* c = std::get_if<Cmp>(&e->v)) {
        const std::string* col = column_of(c->lhs);
        std::optional<double> v = numeric_literal(c->rhs);
        CmpOp op = c->op;
        if (!col) {
            col = column_of(c->rhs);
            v = numeric_literal(c->lhs);
            switch (op) {
            case CmpOp::kLt: op = CmpOp::kGt; break;
            case CmpOp::kLe: op = CmpOp::kGe; break;
            case CmpOp::kGt: op = CmpOp::kLt; break;
            case CmpOp::kGe: op = CmpOp::kLe; break;
            default: break;
            }
        }
        if (!col || !v) return std::nullopt;
        Interval iv;
        switch (op) {
        case CmpOp::kEq: iv.lo = iv.hi = RangeBound{*v, true}; break;
        case CmpOp::kLt: iv.hi = RangeBound{*v, false}; break;
        case CmpOp::kLe: iv.hi = RangeBound{*v, true}; break;
        case CmpOp::kGt: iv.lo = RangeBound{*v, false}; break;
        case CmpOp::kGe: iv.lo = RangeBound{*v, true}; break;
        case CmpOp::kNe: return std::nullopt;
        }
        return std::make_pair(*col, iv);
    }
    if (const auto* b = std::get_if<Between>(&e->v)) {
        const std::string* col = column_of(b->value);
        auto lo = numeric_literal(b->lo), hi = numeric_literal(b->hi);
        if (!col || !lo || !hi) return std::nullopt;
        return std::make_pair(*col, Interval{RangeBound{*lo, true}, RangeBound{*hi, true}});
    }
    if (const auto* n = std::get_if<IsNotNull>(&e->v)) {
        const std::string* col = column_of(n->value);
        if (!col) return std::nullopt;
        return std::make_pair(*col, Interval{});
    }
    return std::nullopt;
}

void tighten(Interval& into, const Interval& by) {
    if (by.lo) {
        if (!into.lo || by.lo->value > into.lo->value) {
            into.lo = by.lo;
        } else if (by.lo->value == into.lo->value) {
            into.lo->closed = into.lo->closed && by.lo->closed;
        }
    }
    if (by.hi) {
        if (!into.hi || by.hi->value < into.hi->value) {
            into.hi = by.hi;
        } else if (by.hi->value == into.hi->value) {
            into.hi->closed = into.hi->closed && by.hi->closed;
        }
    }
}

Coefficient unknown() { return Coefficient{1.0, CoefSource::kUnknown}; }

struct Step {
    Coefficient coef;
    Flow out;
};

Step filter_step(const Expr& pred, const Flow& in, const TableStats& stats) {
    Step s{unknown(), in};
    if (contains_array_access(pred)) return s;
    std::vector<Expr> conjuncts;
    if (const auto* a = std::get_if<And>(&pred->v)) {
        conjuncts = a->terms;
    } else {
        conjuncts = {pred};
    }
    // One interval per column so that x > a AND x < b is a single range.
    std::map<std::string, Interval> ranges;
    for (const auto& c : conjuncts) {
        auto r = range_conjunct(c);
        if (!r) return s;
        tighten(ranges[r->first], r->second);
    }
    std::vector<double> sels;
    for (const auto& [col, iv] : ranges) {
        std::optional<Histogram> scratch;
        const Histogram* h = histogram_for(in, col, stats, scratch);
        if (!h) return s;
        sels.push_back(estimate_range_selectivity(*h, iv.lo, iv.hi));
    }
    double sel = estimate_conjunction(sels);
    s.coef = Coefficient{sel, CoefSource::kHistogram};
    s.out.rows = in.rows * sel;
    return s;
}

Step project_step(const ProjectNode& p, const Schema& input, const Flow& in) {
    Step s{unknown(), in};
    for (const auto& item : p.items) {
        if (contains_array_access(item.expr)) return s;
    }
    Flow out;
    out.rows = in.rows;
    out.virtual_rowid = in.virtual_rowid;
    double out_width = 0;
    for (const auto& item : p.items) {
        ColumnInfo info;
        const std::string* src = column_of(item.expr);
        if (src && in.cols.count(*src)) {
            info = in.cols.at(*src);
        } else {
            info.width = type_width(infer_type(item.expr, input));
        }
        out_width += info.width;
        out.cols[item.name] = info;
    }
    double in_width = row_width(in, input);
    s.coef = Coefficient{in_width > 0 ? out_width / in_width : 1.0, CoefSource::kWidthRatio};
    s.out = std::move(out);
    return s;
}

Step aggregate_step(const AggregateNode& a, const Schema& input, const Flow& in, const TableStats& stats,
                    bool partial) {
    Step s{unknown(), in};
    for (const auto& m : a.measures) {
        for (const auto& arg : m.args) {
            if (contains_array_access(arg)) return s;
        }
    }
    double groups = 1;
    for (const auto& key : a.groupings) {
        std::optional<Histogram> scratch;
        const Histogram* h = histogram_for(in, key, stats, scratch);
        if (!h) return s;
        groups *= std::max(1.0, h->distinct_estimate);
    }
    if (!a.groupings.empty()) groups = std::min(groups, in.rows);

    AggregateNode shaped = a;
    if (partial && a.phase == AggPhase::kFull) shaped.phase = AggPhase::kPartial;
    Schema out_schema = node_output_schema(shaped, input);
    Flow out;
    out.rows = groups;
    out.virtual_rowid = in.virtual_rowid;
    double out_width = 0;
    for (const auto& f : out_schema.fields()) {
        ColumnInfo info;
        auto it = in.cols.find(f.name);
        bool key = std::find(a.groupings.begin(), a.groupings.end(), f.name) != a.groupings.end();
        info.width = key && it != in.cols.end() ? it->second.width : type_width(f.type);
        out_width += info.width;
        out.cols[f.name] = info;
    }
    double in_bytes = in.rows * row_width(in, input);
    double ratio = in_bytes > 0 ? groups * out_width / in_bytes : 1.0;
    s.coef = Coefficient{std::min(1.0, ratio), CoefSource::kDistinctCap, ratio > 1.0};
    s.out = std::move(out);
    return s;
}

Flow read_flow(const ReadNode& r, const TableStats& stats) {
    Flow f;
    f.rows = static_cast<double>(stats.row_count);
    for (const auto& field : r.base_schema.fields()) {
        auto it = stats.column_width.find(field.name);
        f.cols[field.name] = ColumnInfo{it != stats.column_width.end() ? it->second : type_width(field.type), field.name};
    }
    if (r.with_rowid) {
        f.virtual_rowid = true;
        f.cols[kRowid] = ColumnInfo{type_width(TypeKind::kInt64), std::string(kRowid)};
    }
    return f;
}

Step step(const PlanNode& node, const Schema& input, const Flow& in, const TableStats& stats, bool partial) {
    if (classify(node) == OpClass::kOp3 || classify(node) == OpClass::kOp4) {
        throw Error(ErrorCode::kUnclassifiableOperator,
                    "no coefficient for operator '" + std::string(node_kind(node)) + "'");
    }
    return std::visit(overloaded{
                              [&](const ReadNode& r) { return Step{Coefficient{}, read_flow(r, stats)}; },
                              [&](const FilterNode& f) { return filter_step(f.predicate, in, stats); },
                              [&](const ProjectNode& p) { return project_step(p, input, in); },
                              [&](const AggregateNode& a) { return aggregate_step(a, input, in, stats, partial); },
                              [&](const SortNode&) { return Step{Coefficient{}, in}; },
                              [&](const OtherNode&) { return Step{unknown(), in}; },
                      },
                      node);
}

} // namespace

Coefficient estimate_coefficient(const PlanNode& node, const Schema& input_schema, const TableStats& stats) {
    Flow in;
    in.rows = static_cast<double>(stats.row_count);
    for (const auto& f : input_schema.fields()) {
        auto it = stats.column_width.find(f.name);
        in.cols[f.name] = ColumnInfo{it != stats.column_width.end() ? it->second : type_width(f.type), f.name};
        if (f.name == kRowid && !stats.histograms.count(kRowid) && !stats.column_width.count(kRowid)) {
            in.virtual_rowid = true;
        }
    }
    return step(node, input_schema, in, stats, false).coef;
}

SizeEstimate propagate_sizes(const Plan& plan, double read_bytes, const TableStats& stats, const SizeOptions& opts) {
    SizeEstimate est;
    est.read_bytes = read_bytes;
    auto schemas = node_schemas(plan);
    Flow flow;
    std::optional<double> bytes = read_bytes;
    bool known = true;
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
        const Schema& input = i == 0 ? plan.read().base_schema : schemas[i - 1];
        NodeEstimate ne;
        if (known) {
            Step s = step(plan.nodes[i], input, flow, stats, opts.partial_aggregates);
            ne.coefficient = s.coef;
            if (s.coef.known()) {
                flow = std::move(s.out);
                ne.input_bytes = bytes;
                bytes = i == 0 ? read_bytes : *bytes * s.coef.value;
                ne.output_bytes = bytes;
                ne.output_rows = flow.rows;
            } else {
                known = false;
                ne.input_bytes = bytes;
            }
        } else {
            ne.coefficient = unknown();
            if (classify(plan.nodes[i]) == OpClass::kOp1) ne.coefficient = Coefficient{};
        }
        est.nodes.push_back(ne);
    }
    return est;
}

double estimated_read_bytes(const Plan& plan, const TableStats& stats) {
    double bytes = static_cast<double>(stats.logical_bytes);
    if (plan.read().with_rowid) bytes += type_width(TypeKind::kInt64) * static_cast<double>(stats.row_count);
    return bytes;
}

} // namespace tierq
