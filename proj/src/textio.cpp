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

// CSV ingest, CSV/JSON client output and the JSON decoder used to check
// format agreement.

#include <charconv>
#include <cmath>
#include <istream>
#include <iterator>
#include <limits>

#include "json.hpp"
#include "tierq/columnar.hpp"
#include "tierq/error.hpp"

namespace tierq {

namespace {

struct Cell {
    std::string text;
    bool quoted = false;
};

class CsvReader {
public:
    explicit CsvReader(std::string_view text) : _text(text) {}

    // Reads one record. Returns false at end of input.
    bool next(std::vector<Cell>& cells) {
        cells.clear();
        if (_pos >= _text.size()) return false;
        _record_line = _line;
        Cell cell;
        bool at_cell_start = true;
        while (_pos < _text.size()) {
            char c = _text[_pos];
            if (at_cell_start && c == '"') {
                cell.quoted = true;
                ++_pos;
                read_quoted(cell.text);
                at_cell_start = false;
                continue;
            }
            at_cell_start = false;
            if (c == ',') {
                cells.push_back(std::move(cell));
                cell = Cell{};
                at_cell_start = true;
                ++_pos;
            } else if (c == '\n' || c == '\r') {
                ++_pos;
                if (c == '\r' && _pos < _text.size() && _text[_pos] == '\n') ++_pos;
                ++_line;
                cells.push_back(std::move(cell));
                return true;
            } else {
                if (cell.quoted) {
                    throw Error(ErrorCode::kParseError, "line " + std::to_string(_line) + ", column " +
                                                                std::to_string(cells.size() + 1) +
                                                                ": text after closing quote");
                }
                cell.text.push_back(c);
                ++_pos;
            }
        }
        cells.push_back(std::move(cell));
        return true;
    }

    size_t record_line() const { return _record_line; }

private:
    void read_quoted(std::string& out) {
        while (_pos < _text.size()) {
            char c = _text[_pos++];
            if (c == '"') {
                if (_pos < _text.size() && _text[_pos] == '"') {
                    out.push_back('"');
                    ++_pos;
                } else {
                    return;
                }
            } else {
                if (c == '\n') ++_line;
                out.push_back(c);
            }
        }
        throw Error(ErrorCode::kParseError, "line " + std::to_string(_line) + ": unterminated quoted field");
    }

    std::string_view _text;
    size_t _pos = 0;
    size_t _line = 1;
    size_t _record_line = 1;
};

template <typename T>
bool parse_number(std::string_view s, T& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

bool parse_double(std::string_view s, double& out) {
    if (parse_number(s, out)) return true;
    // from_chars accepts these already on most libraries; spell them out.
    if (s == "nan" || s == "NaN") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    if (s == "inf" || s == "Infinity") {
        out = std::numeric_limits<double>::infinity();
        return true;
    }
    if (s == "-inf" || s == "-Infinity") {
        out = -std::numeric_limits<double>::infinity();
        return true;
    }
    return false;
}

void append_cell(ColumnBuilder& b, const Field& field, const Cell& cell, size_t line, size_t column) {
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ", column " + std::to_string(column) +
                                                    " ('" + field.name + "'): " + why);
    };
    if (cell.text.empty() && !cell.quoted) {
        if (!field.nullable) fail("null in required field");
        b.append_null();
        return;
    }
    std::string_view s = cell.text;
    switch (field.type) {
    case TypeKind::kInt32: {
        int32_t v;
        if (!parse_number(s, v)) fail("not an Int32: '" + cell.text + "'");
        b.append_int(v);
        break;
    }
    case TypeKind::kInt64: {
        int64_t v;
        if (!parse_number(s, v)) fail("not an Int64: '" + cell.text + "'");
        b.append_int(v);
        break;
    }
    case TypeKind::kFloat64: {
        double v;
        if (!parse_double(s, v)) fail("not a Float64: '" + cell.text + "'");
        b.append_double(v);
        break;
    }
    case TypeKind::kUtf8: b.append_string(s); break;
    case TypeKind::kListFloat64:
    case TypeKind::kListInt32: {
        if (s.size() < 2 || s.front() != '[' || s.back() != ']') fail("list must be written [a;b;...]");
        s = s.substr(1, s.size() - 2);
        std::vector<double> fs;
        std::vector<int32_t> is;
        while (!s.empty()) {
            size_t semi = s.find(';');
            std::string_view item = s.substr(0, semi);
            if (field.type == TypeKind::kListFloat64) {
                double v;
                if (!parse_double(item, v)) fail("bad list element '" + std::string(item) + "'");
                fs.push_back(v);
            } else {
                int32_t v;
                if (!parse_number(item, v)) fail("bad list element '" + std::string(item) + "'");
                is.push_back(v);
            }
            if (semi == std::string_view::npos) break;
            s.remove_prefix(semi + 1);
            if (s.empty()) fail("trailing ';' in list");
        }
        if (field.type == TypeKind::kListFloat64) {
            b.append_list(std::span<const double>(fs));
        } else {
            b.append_list(std::span<const int32_t>(is));
        }
        break;
    }
    case TypeKind::kBool: fail("Bool columns cannot be ingested");
    }
}

void write_csv_string(std::string& out, std::string_view s) {
    bool needs_quotes = s.empty() || s.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) {
        out.append(s);
        return;
    }
    out.push_back('"');
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

template <typename T>
void append_int_text(std::string& out, T v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

void append_double_text(std::string& out, double v) { out += format_double(v); }

void write_list_csv(std::string& out, const Column& col, size_t row) {
    out.push_back('[');
    for (uint32_t i = col.offsets[row]; i < col.offsets[row + 1]; ++i) {
        if (i != col.offsets[row]) out.push_back(';');
        if (col.type == TypeKind::kListFloat64) {
            append_double_text(out, col.f64[i]);
        } else {
            append_int_text(out, col.i32[i]);
        }
    }
    out.push_back(']');
}

void write_json_double(std::string& out, double v) {
    if (std::isfinite(v)) {
        append_double_text(out, v);
    } else {
        out.push_back('"');
        append_double_text(out, v);
        out.push_back('"');
    }
}

std::string emit_csv(const Table& table) {
    std::string out;
    const Schema& schema = table.schema();
    for (size_t c = 0; c < schema.size(); ++c) {
        if (c) out.push_back(',');
        write_csv_string(out, schema.field(c).name);
    }
    out.push_back('\n');
    for (const auto& batch : table.batches()) {
        for (size_t r = 0; r < batch.num_rows(); ++r) {
            for (size_t c = 0; c < batch.num_columns(); ++c) {
                if (c) out.push_back(',');
                const Column& col = batch.column(c);
                if (!col.is_valid(r)) continue;
                switch (col.type) {
                case TypeKind::kInt32:
                case TypeKind::kBool: append_int_text(out, col.i32[r]); break;
                case TypeKind::kInt64: append_int_text(out, col.i64[r]); break;
                case TypeKind::kFloat64: append_double_text(out, col.f64[r]); break;
                case TypeKind::kUtf8: write_csv_string(out, col.str(r)); break;
                default: write_list_csv(out, col, r); break;
                }
            }
            out.push_back('\n');
        }
    }
    return out;
}

std::string emit_json(const Table& table) {
    std::string out;
    const Schema& schema = table.schema();
    std::vector<std::string> keys;
    for (const auto& f : schema.fields()) keys.push_back(nlohmann::json(f.name).dump() + ":");
    for (const auto& batch : table.batches()) {
        for (size_t r = 0; r < batch.num_rows(); ++r) {
            out.push_back('{');
            bool first = true;
            for (size_t c = 0; c < batch.num_columns(); ++c) {
                const Column& col = batch.column(c);
                if (!col.is_valid(r)) continue;
                if (!first) out.push_back(',');
                first = false;
                out += keys[c];
                switch (col.type) {
                case TypeKind::kInt32: append_int_text(out, col.i32[r]); break;
                case TypeKind::kBool: out += col.i32[r] ? "true" : "false"; break;
                case TypeKind::kInt64: append_int_text(out, col.i64[r]); break;
                case TypeKind::kFloat64: write_json_double(out, col.f64[r]); break;
                case TypeKind::kUtf8: out += nlohmann::json(std::string(col.str(r))).dump(); break;
                default:
                    out.push_back('[');
                    for (uint32_t i = col.offsets[r]; i < col.offsets[r + 1]; ++i) {
                        if (i != col.offsets[r]) out.push_back(',');
                        if (col.type == TypeKind::kListFloat64) {
                            write_json_double(out, col.f64[i]);
                        } else {
                            append_int_text(out, col.i32[i]);
                        }
                    }
                    out.push_back(']');
                    break;
                }
            }
            out += "}\n";
        }
    }
    return out;
}

double json_to_double(const nlohmann::json& v) {
    if (v.is_string()) {
        double d;
        if (!parse_double(v.get<std::string>(), d)) throw Error(ErrorCode::kParseError, "bad float " + v.dump());
        return d;
    }
    if (!v.is_number()) throw Error(ErrorCode::kParseError, "expected number, got " + v.dump());
    return v.get<double>();
}

} // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

Table ingest_csv_text(std::string_view text, const Schema& schema, const CsvOptions& options) {
    CsvReader reader(text);
    std::vector<Cell> cells;
    if (!reader.next(cells)) {
        throw Error(ErrorCode::kSchemaMismatch, "missing header row");
    }
    if (cells.size() != schema.size()) {
        throw Error(ErrorCode::kSchemaMismatch, "header has " + std::to_string(cells.size()) +
                                                        " columns, schema has " + std::to_string(schema.size()));
    }
    for (size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].text != schema.field(c).name) {
            throw Error(ErrorCode::kSchemaMismatch, "header column " + std::to_string(c + 1) + " is '" +
                                                            cells[c].text + "', schema expects '" +
                                                            schema.field(c).name + "'");
        }
    }
    size_t batch_rows = std::max<size_t>(options.batch_rows, 1);
    std::vector<ColumnBatch> batches;
    std::vector<ColumnBuilder> builders;
    auto reset = [&] {
        builders.clear();
        for (const auto& f : schema.fields()) builders.emplace_back(f.type, batch_rows);
    };
    auto flush = [&] {
        if (builders.empty() || builders[0].size() == 0) return;
        std::vector<Column> cols;
        for (auto& b : builders) cols.push_back(b.finish());
        batches.emplace_back(schema, std::move(cols));
    };
    reset();
    while (reader.next(cells)) {
        // A lone empty line at the end of input is not a record.
        if (cells.size() == 1 && cells[0].text.empty() && !cells[0].quoted && schema.size() > 1) continue;
        if (cells.size() != schema.size()) {
            throw Error(ErrorCode::kParseError, "line " + std::to_string(reader.record_line()) + ": ragged row with " +
                                                        std::to_string(cells.size()) + " cells, expected " +
                                                        std::to_string(schema.size()));
        }
        for (size_t c = 0; c < cells.size(); ++c) {
            append_cell(builders[c], schema.field(c), cells[c], reader.record_line(), c + 1);
        }
        if (builders[0].size() == batch_rows) {
            flush();
            reset();
        }
    }
    flush();
    return Table(schema, std::move(batches));
}

Table ingest_csv(std::istream& in, const Schema& schema, const CsvOptions& options) {
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return ingest_csv_text(text, schema, options);
}

std::string_view format_name(OutputFormat f) {
    switch (f) {
    case OutputFormat::kColumnar: return "columnar";
    case OutputFormat::kCsv: return "csv";
    case OutputFormat::kJson: return "json";
    }
    return "?";
}

std::optional<OutputFormat> format_from_name(std::string_view name) {
    for (auto f : {OutputFormat::kColumnar, OutputFormat::kCsv, OutputFormat::kJson}) {
        if (format_name(f) == name) return f;
    }
    return std::nullopt;
}

std::vector<uint8_t> emit_output(const Table& table, OutputFormat format) {
    std::string text;
    switch (format) {
    case OutputFormat::kColumnar: return serialize_columnar(table);
    case OutputFormat::kCsv: text = emit_csv(table); break;
    case OutputFormat::kJson: text = emit_json(table); break;
    }
    return std::vector<uint8_t>(text.begin(), text.end());
}

Table decode_json_output(std::string_view text, const Schema& schema) {
    std::vector<ColumnBuilder> builders;
    for (const auto& f : schema.fields()) builders.emplace_back(f.type);
    size_t line_no = 0;
    while (!text.empty()) {
        size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (line.empty()) continue;
        nlohmann::ordered_json obj;
        try {
            obj = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::kParseError, "json line " + std::to_string(line_no) + ": " + e.what());
        }
        for (size_t c = 0; c < schema.size(); ++c) {
            const Field& f = schema.field(c);
            auto it = obj.find(f.name);
            if (it == obj.end() || it->is_null()) {
                builders[c].append_null();
                continue;
            }
            const auto& v = *it;
            switch (f.type) {
            case TypeKind::kInt32:
            case TypeKind::kInt64: builders[c].append_int(v.get<int64_t>()); break;
            case TypeKind::kBool: builders[c].append_bool(v.get<bool>()); break;
            case TypeKind::kFloat64: builders[c].append_double(json_to_double(v)); break;
            case TypeKind::kUtf8: builders[c].append_string(v.get<std::string>()); break;
            case TypeKind::kListFloat64: {
                std::vector<double> xs;
                for (const auto& e : v) xs.push_back(json_to_double(e));
                builders[c].append_list(std::span<const double>(xs));
                break;
            }
            case TypeKind::kListInt32: {
                std::vector<int32_t> xs;
                for (const auto& e : v) xs.push_back(e.get<int32_t>());
                builders[c].append_list(std::span<const int32_t>(xs));
                break;
            }
            }
        }
    }
    std::vector<ColumnBatch> batches;
    if (!builders.empty() && builders[0].size() > 0) {
        std::vector<Column> cols;
        for (auto& b : builders) cols.push_back(b.finish());
        batches.emplace_back(schema, std::move(cols));
    }
    return Table(schema, std::move(batches));
}

} // namespace tierq
