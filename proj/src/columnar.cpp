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

#include "tierq/columnar.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "tierq/error.hpp"

namespace tierq {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kCorruptFrame: return "CorruptFrame";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kGrammarError: return "GrammarError";
    case ErrorCode::kUnknownFunction: return "UnknownFunction";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kUnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kUnsupportedColumnType: return "UnsupportedColumnType";
    case ErrorCode::kUnclassifiableOperator: return "UnclassifiableOperator";
    case ErrorCode::kEstimationUnavailable: return "EstimationUnavailable";
    case ErrorCode::kNonDecomposableMeasure: return "NonDecomposableMeasure";
    case ErrorCode::kInvalidSplit: return "InvalidSplit";
    case ErrorCode::kPlacementInfeasible: return "PlacementInfeasible";
    case ErrorCode::kExecError: return "ExecError";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kNoSuchBucket: return "NoSuchBucket";
    case ErrorCode::kNoSuchObject: return "NoSuchObject";
    case ErrorCode::kDuplicateBucket: return "DuplicateBucket";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

std::string_view type_name(TypeKind type) {
    switch (type) {
    case TypeKind::kInt32: return "Int32";
    case TypeKind::kInt64: return "Int64";
    case TypeKind::kFloat64: return "Float64";
    case TypeKind::kUtf8: return "Utf8";
    case TypeKind::kListFloat64: return "ListFloat64";
    case TypeKind::kListInt32: return "ListInt32";
    case TypeKind::kBool: return "Bool";
    }
    return "?";
}

std::optional<TypeKind> type_from_name(std::string_view name) {
    for (auto t : {TypeKind::kInt32, TypeKind::kInt64, TypeKind::kFloat64, TypeKind::kUtf8,
                   TypeKind::kListFloat64, TypeKind::kListInt32, TypeKind::kBool}) {
        if (type_name(t) == name) return t;
    }
    return std::nullopt;
}

TypeKind element_type(TypeKind t) {
    switch (t) {
    case TypeKind::kListFloat64: return TypeKind::kFloat64;
    case TypeKind::kListInt32: return TypeKind::kInt32;
    default: return t;
    }
}

size_t value_width(TypeKind t) {
    switch (t) {
    case TypeKind::kInt32: return 4;
    case TypeKind::kInt64: return 8;
    case TypeKind::kFloat64: return 8;
    case TypeKind::kBool: return 1;
    case TypeKind::kUtf8:
    case TypeKind::kListFloat64:
    case TypeKind::kListInt32: return 4;
    }
    return 8;
}

// ---- Schema --------------------------------------------------------------

Schema::Schema(std::vector<Field> fields) : _fields(std::move(fields)) {
    std::unordered_set<std::string_view> seen;
    for (const auto& f : _fields) {
        if (!seen.insert(f.name).second) {
            throw Error(ErrorCode::kSchemaMismatch, "duplicate field name '" + f.name + "'");
        }
    }
}

std::optional<size_t> Schema::index_of(std::string_view name) const {
    for (size_t i = 0; i < _fields.size(); ++i) {
        if (_fields[i].name == name) return i;
    }
    return std::nullopt;
}

std::vector<std::string> Schema::names() const {
    std::vector<std::string> out;
    out.reserve(_fields.size());
    for (const auto& f : _fields) out.push_back(f.name);
    return out;
}

Schema Schema::renamed(const std::vector<std::string>& names) const {
    if (names.size() != _fields.size()) {
        throw Error(ErrorCode::kSchemaMismatch, "rename arity mismatch");
    }
    auto fields = _fields;
    for (size_t i = 0; i < fields.size(); ++i) fields[i].name = names[i];
    return Schema(std::move(fields));
}

std::string Schema::to_string() const {
    std::string out = "{";
    for (size_t i = 0; i < _fields.size(); ++i) {
        if (i) out += ", ";
        out += _fields[i].name;
        out += ':';
        out += type_name(_fields[i].type);
        if (!_fields[i].nullable) out += '!';
    }
    out += '}';
    return out;
}

Schema parse_schema_text(std::string_view text) {
    std::vector<Field> fields;
    std::istringstream in{std::string(text)};
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string name, type, flag, extra;
        if (!(ls >> name)) continue;
        if (!(ls >> type)) {
            throw Error(ErrorCode::kSchemaMismatch, "line " + std::to_string(lineno) + ": missing type for '" + name + "'");
        }
        auto kind = type_from_name(type);
        if (!kind || *kind == TypeKind::kBool) {
            throw Error(ErrorCode::kSchemaMismatch, "line " + std::to_string(lineno) + ": unknown type '" + type + "'");
        }
        bool nullable = true;
        if (ls >> flag) {
            if (flag == "required") {
                nullable = false;
            } else if (flag != "nullable") {
                throw Error(ErrorCode::kSchemaMismatch, "line " + std::to_string(lineno) + ": unknown flag '" + flag + "'");
            }
        }
        if (ls >> extra) {
            throw Error(ErrorCode::kSchemaMismatch, "line " + std::to_string(lineno) + ": trailing text");
        }
        fields.push_back(Field{name, *kind, nullable});
    }
    if (fields.empty()) throw Error(ErrorCode::kSchemaMismatch, "schema has no fields");
    return Schema(std::move(fields));
}

std::string schema_to_text(const Schema& schema) {
    std::string out;
    for (const auto& f : schema.fields()) {
        out += f.name;
        out += ' ';
        out += type_name(f.type);
        if (!f.nullable) out += " required";
        out += '\n';
    }
    return out;
}

bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

// ---- Column --------------------------------------------------------------

size_t Column::null_count() const {
    return static_cast<size_t>(std::count(valid.begin(), valid.end(), uint8_t{0}));
}

Value Column::value(size_t row) const {
    if (!is_valid(row)) return std::monostate{};
    switch (type) {
    case TypeKind::kInt32:
    case TypeKind::kBool: return static_cast<int64_t>(i32[row]);
    case TypeKind::kInt64: return i64[row];
    case TypeKind::kFloat64: return f64[row];
    case TypeKind::kUtf8: return std::string(str(row));
    case TypeKind::kListFloat64: return ListF64(f64.begin() + offsets[row], f64.begin() + offsets[row + 1]);
    case TypeKind::kListInt32: return ListI32(i32.begin() + offsets[row], i32.begin() + offsets[row + 1]);
    }
    return std::monostate{};
}

Column Column::slice(size_t begin, size_t count) const {
    Column out;
    out.type = type;
    out.valid.assign(valid.begin() + begin, valid.begin() + begin + count);
    if (is_variable_width(type)) {
        uint32_t lo = offsets[begin];
        uint32_t hi = offsets[begin + count];
        out.offsets.reserve(count + 1);
        for (size_t i = 0; i <= count; ++i) out.offsets.push_back(offsets[begin + i] - lo);
        switch (type) {
        case TypeKind::kUtf8: out.chars = chars.substr(lo, hi - lo); break;
        case TypeKind::kListFloat64: out.f64.assign(f64.begin() + lo, f64.begin() + hi); break;
        default: out.i32.assign(i32.begin() + lo, i32.begin() + hi); break;
        }
        return out;
    }
    switch (type) {
    case TypeKind::kInt64: out.i64.assign(i64.begin() + begin, i64.begin() + begin + count); break;
    case TypeKind::kFloat64: out.f64.assign(f64.begin() + begin, f64.begin() + begin + count); break;
    default: out.i32.assign(i32.begin() + begin, i32.begin() + begin + count); break;
    }
    return out;
}

Column Column::take(std::span<const uint32_t> rows) const {
    ColumnBuilder b(type, rows.size());
    for (uint32_t r : rows) b.append_from(*this, r);
    return b.finish();
}

// ---- ColumnBuilder -------------------------------------------------------

ColumnBuilder::ColumnBuilder(TypeKind type, size_t reserve) {
    _col.type = type;
    _col.valid.reserve(reserve);
    if (is_variable_width(type)) {
        _col.offsets.reserve(reserve + 1);
        _col.offsets.push_back(0);
    }
    switch (type) {
    case TypeKind::kInt64: _col.i64.reserve(reserve); break;
    case TypeKind::kFloat64: _col.f64.reserve(reserve); break;
    case TypeKind::kInt32:
    case TypeKind::kBool: _col.i32.reserve(reserve); break;
    default: break;
    }
}

void ColumnBuilder::append_null() {
    _col.valid.push_back(0);
    switch (_col.type) {
    case TypeKind::kInt64: _col.i64.push_back(0); break;
    case TypeKind::kFloat64: _col.f64.push_back(0.0); break;
    case TypeKind::kInt32:
    case TypeKind::kBool: _col.i32.push_back(0); break;
    default: _col.offsets.push_back(_col.offsets.back()); break;
    }
}

void ColumnBuilder::append_int(int64_t v) {
    _col.valid.push_back(1);
    switch (_col.type) {
    case TypeKind::kInt64: _col.i64.push_back(v); break;
    case TypeKind::kInt32: _col.i32.push_back(static_cast<int32_t>(v)); break;
    case TypeKind::kFloat64: _col.f64.push_back(static_cast<double>(v)); break;
    case TypeKind::kBool: _col.i32.push_back(v != 0); break;
    default: throw Error(ErrorCode::kSchemaMismatch, "integer value for " + std::string(type_name(_col.type)) + " column");
    }
}

void ColumnBuilder::append_double(double v) {
    if (_col.type != TypeKind::kFloat64) {
        throw Error(ErrorCode::kSchemaMismatch, "float value for " + std::string(type_name(_col.type)) + " column");
    }
    _col.valid.push_back(1);
    _col.f64.push_back(v);
}

void ColumnBuilder::append_bool(bool v) {
    if (_col.type != TypeKind::kBool) throw Error(ErrorCode::kSchemaMismatch, "bool value for non-bool column");
    _col.valid.push_back(1);
    _col.i32.push_back(v ? 1 : 0);
}

void ColumnBuilder::append_string(std::string_view v) {
    if (_col.type != TypeKind::kUtf8) throw Error(ErrorCode::kSchemaMismatch, "string value for non-Utf8 column");
    _col.valid.push_back(1);
    _col.chars.append(v);
    _col.offsets.push_back(static_cast<uint32_t>(_col.chars.size()));
}

void ColumnBuilder::append_list(std::span<const double> v) {
    if (_col.type != TypeKind::kListFloat64) throw Error(ErrorCode::kSchemaMismatch, "float list for wrong column type");
    _col.valid.push_back(1);
    _col.f64.insert(_col.f64.end(), v.begin(), v.end());
    _col.offsets.push_back(static_cast<uint32_t>(_col.f64.size()));
}

void ColumnBuilder::append_list(std::span<const int32_t> v) {
    if (_col.type != TypeKind::kListInt32) throw Error(ErrorCode::kSchemaMismatch, "int list for wrong column type");
    _col.valid.push_back(1);
    _col.i32.insert(_col.i32.end(), v.begin(), v.end());
    _col.offsets.push_back(static_cast<uint32_t>(_col.i32.size()));
}

void ColumnBuilder::append_value(const Value& v) {
    std::visit(
            [this](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, std::monostate>) {
                    append_null();
                } else if constexpr (std::is_same_v<T, int64_t>) {
                    append_int(x);
                } else if constexpr (std::is_same_v<T, double>) {
                    append_double(x);
                } else if constexpr (std::is_same_v<T, std::string>) {
                    append_string(x);
                } else {
                    append_list(std::span(x));
                }
            },
            v);
}

void ColumnBuilder::append_from(const Column& src, size_t row) {
    if (!src.is_valid(row)) {
        append_null();
        return;
    }
    _col.valid.push_back(1);
    switch (_col.type) {
    case TypeKind::kInt64: _col.i64.push_back(src.i64[row]); break;
    case TypeKind::kFloat64: _col.f64.push_back(src.f64[row]); break;
    case TypeKind::kInt32:
    case TypeKind::kBool: _col.i32.push_back(src.i32[row]); break;
    case TypeKind::kUtf8:
        _col.chars.append(src.str(row));
        _col.offsets.push_back(static_cast<uint32_t>(_col.chars.size()));
        break;
    case TypeKind::kListFloat64:
        _col.f64.insert(_col.f64.end(), src.f64.begin() + src.offsets[row], src.f64.begin() + src.offsets[row + 1]);
        _col.offsets.push_back(static_cast<uint32_t>(_col.f64.size()));
        break;
    case TypeKind::kListInt32:
        _col.i32.insert(_col.i32.end(), src.i32.begin() + src.offsets[row], src.i32.begin() + src.offsets[row + 1]);
        _col.offsets.push_back(static_cast<uint32_t>(_col.i32.size()));
        break;
    }
}

Column ColumnBuilder::finish() {
    Column out = std::move(_col);
    _col = Column{};
    _col.type = out.type;
    if (is_variable_width(out.type)) _col.offsets.push_back(0);
    return out;
}

// ---- ColumnBatch ---------------------------------------------------------

ColumnBatch::ColumnBatch(Schema schema, std::vector<std::shared_ptr<const Column>> columns)
        : _schema(std::move(schema)), _columns(std::move(columns)) {
    if (_columns.size() != _schema.size()) {
        throw Error(ErrorCode::kSchemaMismatch, "batch has " + std::to_string(_columns.size()) +
                                                        " columns for schema " + _schema.to_string());
    }
    _rows = _columns.empty() ? 0 : _columns[0]->size();
    for (size_t i = 0; i < _columns.size(); ++i) {
        if (_columns[i]->type != _schema.field(i).type) {
            throw Error(ErrorCode::kSchemaMismatch, "column '" + _schema.field(i).name + "' has type " +
                                                            std::string(type_name(_columns[i]->type)));
        }
        if (_columns[i]->size() != _rows) {
            throw Error(ErrorCode::kSchemaMismatch, "ragged batch at column '" + _schema.field(i).name + "'");
        }
    }
}

ColumnBatch::ColumnBatch(Schema schema, std::vector<Column> columns)
        : ColumnBatch(std::move(schema), [&columns] {
              std::vector<std::shared_ptr<const Column>> ptrs;
              ptrs.reserve(columns.size());
              for (auto& c : columns) ptrs.push_back(std::make_shared<const Column>(std::move(c)));
              return ptrs;
          }()) {}

ColumnBatch ColumnBatch::empty(const Schema& schema) {
    std::vector<Column> cols;
    for (const auto& f : schema.fields()) cols.push_back(ColumnBuilder(f.type).finish());
    return ColumnBatch(schema, std::move(cols));
}

ColumnBatch ColumnBatch::slice(size_t begin, size_t count) const {
    std::vector<Column> cols;
    cols.reserve(_columns.size());
    for (const auto& c : _columns) cols.push_back(c->slice(begin, count));
    return ColumnBatch(_schema, std::move(cols));
}

ColumnBatch ColumnBatch::take(std::span<const uint32_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(_columns.size());
    for (const auto& c : _columns) cols.push_back(c->take(rows));
    return ColumnBatch(_schema, std::move(cols));
}

ColumnBatch ColumnBatch::with_schema(Schema schema) const { return ColumnBatch(std::move(schema), _columns); }

bool ColumnBatch::operator==(const ColumnBatch& other) const {
    if (_schema != other._schema || _rows != other._rows) return false;
    for (size_t i = 0; i < _columns.size(); ++i) {
        if (_columns[i] != other._columns[i] && !(*_columns[i] == *other._columns[i])) return false;
    }
    return true;
}

// ---- Table ---------------------------------------------------------------

Table::Table(Schema schema, std::vector<ColumnBatch> batches)
        : _schema(std::move(schema)), _batches(std::move(batches)) {
    for (const auto& b : _batches) {
        if (b.schema() != _schema) {
            throw Error(ErrorCode::kSchemaMismatch,
                        "batch schema " + b.schema().to_string() + " != table schema " + _schema.to_string());
        }
    }
}

size_t Table::num_rows() const {
    size_t n = 0;
    for (const auto& b : _batches) n += b.num_rows();
    return n;
}

uint64_t column_logical_bytes(const Column& col) {
    uint64_t non_null = col.size() - col.null_count();
    uint64_t total = value_width(col.type) * non_null;
    switch (col.type) {
    case TypeKind::kUtf8: total += col.chars.size(); break;
    case TypeKind::kListFloat64: total += 8 * col.f64.size(); break;
    case TypeKind::kListInt32: total += 4 * col.i32.size(); break;
    default: break;
    }
    return total + (col.size() + 7) / 8;
}

uint64_t Table::logical_bytes() const {
    uint64_t total = 0;
    for (const auto& b : _batches) {
        for (size_t c = 0; c < b.num_columns(); ++c) total += column_logical_bytes(b.column(c));
    }
    return total;
}

ColumnBatch Table::combined() const {
    if (_batches.size() == 1) return _batches[0];
    std::vector<Column> cols;
    size_t rows = num_rows();
    for (size_t c = 0; c < _schema.size(); ++c) {
        ColumnBuilder b(_schema.field(c).type, rows);
        for (const auto& batch : _batches) {
            const Column& src = batch.column(c);
            for (size_t r = 0; r < src.size(); ++r) b.append_from(src, r);
        }
        cols.push_back(b.finish());
    }
    return ColumnBatch(_schema, std::move(cols));
}

Table Table::rebatched(size_t batch_rows) const {
    batch_rows = std::max<size_t>(batch_rows, 1);
    bool aligned = std::all_of(_batches.begin(), _batches.end(), [&](const ColumnBatch& b) {
        return b.num_rows() > 0 && b.num_rows() <= batch_rows;
    });
    // Already compact: every batch full except possibly the last.
    if (aligned) {
        bool full = true;
        for (size_t i = 0; i + 1 < _batches.size(); ++i) full = full && _batches[i].num_rows() == batch_rows;
        if (full) return *this;
    }
    ColumnBatch all = combined();
    std::vector<ColumnBatch> out;
    for (size_t begin = 0; begin < all.num_rows(); begin += batch_rows) {
        out.push_back(all.slice(begin, std::min(batch_rows, all.num_rows() - begin)));
    }
    return Table(_schema, std::move(out));
}

Table Table::renamed(const std::vector<std::string>& names) const {
    Schema schema = _schema.renamed(names);
    std::vector<ColumnBatch> batches;
    batches.reserve(_batches.size());
    for (const auto& b : _batches) batches.push_back(b.with_schema(schema));
    return Table(std::move(schema), std::move(batches));
}

Table Table::concat(const Schema& schema, std::span<const Table> parts) {
    std::vector<ColumnBatch> batches;
    for (const auto& p : parts) {
        if (p.schema() != schema) {
            throw Error(ErrorCode::kSchemaMismatch, "concat of " + p.schema().to_string() + " into " + schema.to_string());
        }
        batches.insert(batches.end(), p.batches().begin(), p.batches().end());
    }
    return Table(schema, std::move(batches));
}

bool Table::same_rows(const Table& other) const {
    if (_schema != other._schema || num_rows() != other.num_rows()) return false;
    return combined() == other.combined();
}

bool Table::operator==(const Table& other) const {
    return _schema == other._schema && _batches == other._batches;
}

} // namespace tierq
