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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tierq {

// Type codes double as the TIERCOL on-wire type byte. kBool only appears as
// the result type of predicate expressions; it is never stored in a schema
// that crosses a tier boundary.
enum class TypeKind : uint8_t {
    kInt32 = 1,
    kInt64 = 2,
    kFloat64 = 3,
    kUtf8 = 4,
    kListFloat64 = 5,
    kListInt32 = 6,
    kBool = 7,
};

std::string_view type_name(TypeKind type);
std::optional<TypeKind> type_from_name(std::string_view name);

inline bool is_integer(TypeKind t) { return t == TypeKind::kInt32 || t == TypeKind::kInt64; }
inline bool is_numeric(TypeKind t) { return is_integer(t) || t == TypeKind::kFloat64; }
inline bool is_list(TypeKind t) { return t == TypeKind::kListFloat64 || t == TypeKind::kListInt32; }
inline bool is_variable_width(TypeKind t) { return is_list(t) || t == TypeKind::kUtf8; }

// Element type of a list kind; the kind itself for scalars.
TypeKind element_type(TypeKind t);

// Bytes per value slot for fixed-width kinds; 4 (the offset width) for
// variable-width kinds.
size_t value_width(TypeKind t);

struct Field {
    std::string name;
    TypeKind type = TypeKind::kInt64;
    bool nullable = true;

    bool operator==(const Field&) const = default;
};

class Schema {
public:
    Schema() = default;
    // Throws kSchemaMismatch on duplicate names.
    explicit Schema(std::vector<Field> fields);

    const std::vector<Field>& fields() const { return _fields; }
    size_t size() const { return _fields.size(); }
    bool empty() const { return _fields.empty(); }
    const Field& field(size_t i) const { return _fields.at(i); }
    std::optional<size_t> index_of(std::string_view name) const;
    std::vector<std::string> names() const;

    // Same types and nullability, new names. Sizes must match.
    Schema renamed(const std::vector<std::string>& names) const;

    std::string to_string() const;

    bool operator==(const Schema&) const = default;

private:
    std::vector<Field> _fields;
};

// Text schema file: one `name type [required]` entry per line, '#' comments.
Schema parse_schema_text(std::string_view text);
std::string schema_to_text(const Schema& schema);

// A single row value, used at the edges (literals, text formats, tests).
using ListF64 = std::vector<double>;
using ListI32 = std::vector<int32_t>;
using Value = std::variant<std::monostate, int64_t, double, std::string, ListF64, ListI32>;

bool is_null(const Value& v);

// Column storage. Which vectors are populated depends on the type:
//   Int32, Bool    -> i32
//   Int64          -> i64
//   Float64        -> f64
//   Utf8           -> offsets + chars
//   ListFloat64    -> offsets + f64
//   ListInt32      -> offsets + i32
// Null slots hold zero (or an empty range) so equal content compares equal.
struct Column {
    TypeKind type = TypeKind::kInt64;
    std::vector<uint8_t> valid;
    std::vector<int32_t> i32;
    std::vector<int64_t> i64;
    std::vector<double> f64;
    std::vector<uint32_t> offsets;
    std::string chars;

    size_t size() const { return valid.size(); }
    bool is_valid(size_t row) const { return valid[row] != 0; }
    size_t null_count() const;

    std::string_view str(size_t row) const {
        return std::string_view(chars).substr(offsets[row], offsets[row + 1] - offsets[row]);
    }
    size_t list_size(size_t row) const { return offsets[row + 1] - offsets[row]; }

    Value value(size_t row) const;

    Column slice(size_t begin, size_t count) const;
    Column take(std::span<const uint32_t> rows) const;

    bool operator==(const Column&) const = default;
};

// Value bytes of the non-null entries, list elements or string bytes, and
// one validity bit per row.
uint64_t column_logical_bytes(const Column& col);

class ColumnBuilder {
public:
    explicit ColumnBuilder(TypeKind type, size_t reserve = 0);

    TypeKind type() const { return _col.type; }
    size_t size() const { return _col.size(); }

    void append_null();
    void append_int(int64_t v);
    void append_double(double v);
    void append_bool(bool v);
    void append_string(std::string_view v);
    void append_list(std::span<const double> v);
    void append_list(std::span<const int32_t> v);
    // Appends a Value after checking it matches the column type.
    void append_value(const Value& v);
    void append_from(const Column& src, size_t row);

    Column finish();

private:
    Column _col;
};

/// Immutable set of equal-length columns sharing one schema.
class ColumnBatch {
public:
    ColumnBatch() = default;
    ColumnBatch(Schema schema, std::vector<std::shared_ptr<const Column>> columns);
    ColumnBatch(Schema schema, std::vector<Column> columns);

    static ColumnBatch empty(const Schema& schema);

    const Schema& schema() const { return _schema; }
    size_t num_rows() const { return _rows; }
    size_t num_columns() const { return _columns.size(); }
    const Column& column(size_t i) const { return *_columns.at(i); }
    const std::shared_ptr<const Column>& column_ptr(size_t i) const { return _columns.at(i); }

    ColumnBatch slice(size_t begin, size_t count) const;
    ColumnBatch take(std::span<const uint32_t> rows) const;
    ColumnBatch with_schema(Schema schema) const;

    bool operator==(const ColumnBatch& other) const;

private:
    Schema _schema;
    std::vector<std::shared_ptr<const Column>> _columns;
    size_t _rows = 0;
};

class Table {
public:
    Table() = default;
    explicit Table(Schema schema, std::vector<ColumnBatch> batches = {});

    const Schema& schema() const { return _schema; }
    const std::vector<ColumnBatch>& batches() const { return _batches; }
    size_t num_rows() const;

    // Value bytes over non-null slots, list elements and string bytes, plus
    // one validity bit per slot rounded up per column per batch.
    uint64_t logical_bytes() const;

    // One batch holding every row (an empty batch for empty tables).
    ColumnBatch combined() const;
    // Re-slices into batches of at most batch_rows rows, dropping empty ones.
    Table rebatched(size_t batch_rows) const;
    Table renamed(const std::vector<std::string>& names) const;

    static Table concat(const Schema& schema, std::span<const Table> parts);

    // Same schema and same rows in the same order, independent of batching.
    bool same_rows(const Table& other) const;

    // Schema, values, nulls and batch boundaries all equal.
    bool operator==(const Table& other) const;

private:
    Schema _schema;
    std::vector<ColumnBatch> _batches;
};

// ---- CSV ingest ----------------------------------------------------------

struct CsvOptions {
    size_t batch_rows = 65536;
};

// Header must match the schema names in order. Empty unquoted cells are null;
// `""` is an empty string. Lists are written `[a;b;c]`.
Table ingest_csv(std::istream& in, const Schema& schema, const CsvOptions& options = {});
Table ingest_csv_text(std::string_view text, const Schema& schema, const CsvOptions& options = {});

// ---- TIERCOL interchange -------------------------------------------------

inline constexpr uint8_t kTiercolVersion = 1;

std::vector<uint8_t> serialize_columnar(const Table& table);
Table deserialize_columnar(std::span<const uint8_t> bytes);

// ---- client output -------------------------------------------------------

enum class OutputFormat { kColumnar, kCsv, kJson };

std::string_view format_name(OutputFormat f);
std::optional<OutputFormat> format_from_name(std::string_view name);

std::vector<uint8_t> emit_output(const Table& table, OutputFormat format);

// Newline-delimited JSON objects back into a table of the given schema.
Table decode_json_output(std::string_view text, const Schema& schema);

// Shortest round-trip decimal form used by every text encoder.
std::string format_double(double v);

} // namespace tierq
