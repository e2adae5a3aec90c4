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

// TIERCOL stream layout (all integers little-endian):
//
//   "TCOL" | version:u8 | flags:u8
//   frame*  where frame = type:u8 | length:u32 | payload[length] | crc32(payload):u32
//
//   0x01 schema     field_count:u32, then per field
//                   name_len:u16 name type:u8 nullable:u8
//   0x02 batch      rows:u32, then per column
//                   validity_len:u32 validity   (0 => no nulls, else ceil(rows/8), LSB first)
//                   [offsets_len:u32 offsets]   (Utf8 and list kinds: (rows+1) x u32)
//                   data_len:u32 data           (fixed slots, list elements, or string bytes)
//   0xFF end        empty payload
//
// The schema frame is always present and comes first; batch frames follow in
// table order.

#include <zlib.h>

#include <cstring>

#include "tierq/columnar.hpp"
#include "tierq/error.hpp"
#include "tierq/frame.hpp"

namespace tierq {

namespace {

constexpr uint8_t kSchemaFrame = 0x01;
constexpr uint8_t kBatchFrame = 0x02;

void put_bitmap(ByteWriter& w, const Column& col) {
    size_t rows = col.size();
    if (col.null_count() == 0) {
        w.u32(0);
        return;
    }
    std::vector<uint8_t> bits((rows + 7) / 8, 0);
    for (size_t r = 0; r < rows; ++r) {
        if (col.valid[r]) bits[r / 8] |= static_cast<uint8_t>(1u << (r % 8));
    }
    w.u32(static_cast<uint32_t>(bits.size()));
    w.bytes(bits.data(), bits.size());
}

template <typename T>
void put_values(ByteWriter& w, const std::vector<T>& values) {
    w.u32(static_cast<uint32_t>(values.size() * sizeof(T)));
    for (T v : values) w.scalar(v);
}

void put_column(ByteWriter& w, const Column& col) {
    put_bitmap(w, col);
    if (is_variable_width(col.type)) put_values(w, col.offsets);
    switch (col.type) {
    case TypeKind::kInt32:
    case TypeKind::kListInt32: put_values(w, col.i32); break;
    case TypeKind::kInt64: put_values(w, col.i64); break;
    case TypeKind::kFloat64:
    case TypeKind::kListFloat64: put_values(w, col.f64); break;
    case TypeKind::kUtf8:
        w.u32(static_cast<uint32_t>(col.chars.size()));
        w.bytes(reinterpret_cast<const uint8_t*>(col.chars.data()), col.chars.size());
        break;
    case TypeKind::kBool:
        w.u32(static_cast<uint32_t>(col.i32.size()));
        for (int32_t v : col.i32) w.u8(v ? 1 : 0);
        break;
    }
}

template <typename T>
std::vector<T> get_values(ByteReader& r, size_t expected_count, const char* what) {
    uint32_t len = r.u32();
    if (len % sizeof(T) != 0 || (expected_count != SIZE_MAX && len / sizeof(T) != expected_count)) {
        throw Error(ErrorCode::kCorruptFrame, std::string("bad ") + what + " length " + std::to_string(len));
    }
    std::vector<T> out(len / sizeof(T));
    for (auto& v : out) v = r.scalar<T>();
    return out;
}

Column get_column(ByteReader& r, TypeKind type, size_t rows) {
    Column col;
    col.type = type;
    uint32_t bitmap_len = r.u32();
    if (bitmap_len == 0) {
        col.valid.assign(rows, 1);
    } else {
        if (bitmap_len != (rows + 7) / 8) throw Error(ErrorCode::kCorruptFrame, "bad validity length");
        auto bits = r.bytes(bitmap_len);
        col.valid.resize(rows);
        for (size_t i = 0; i < rows; ++i) col.valid[i] = (bits[i / 8] >> (i % 8)) & 1u;
    }
    size_t slots = rows;
    if (is_variable_width(type)) {
        col.offsets = get_values<uint32_t>(r, rows + 1, "offsets");
        if (col.offsets.front() != 0) throw Error(ErrorCode::kCorruptFrame, "offsets must start at 0");
        for (size_t i = 1; i < col.offsets.size(); ++i) {
            if (col.offsets[i] < col.offsets[i - 1]) throw Error(ErrorCode::kCorruptFrame, "offsets not monotone");
        }
        slots = col.offsets.back();
    }
    switch (type) {
    case TypeKind::kInt32:
    case TypeKind::kListInt32: col.i32 = get_values<int32_t>(r, slots, "data"); break;
    case TypeKind::kInt64: col.i64 = get_values<int64_t>(r, slots, "data"); break;
    case TypeKind::kFloat64:
    case TypeKind::kListFloat64: col.f64 = get_values<double>(r, slots, "data"); break;
    case TypeKind::kUtf8: {
        uint32_t len = r.u32();
        if (len != slots) throw Error(ErrorCode::kCorruptFrame, "string data length mismatch");
        auto data = r.bytes(len);
        col.chars.assign(reinterpret_cast<const char*>(data.data()), data.size());
        break;
    }
    case TypeKind::kBool: {
        uint32_t len = r.u32();
        if (len != rows) throw Error(ErrorCode::kCorruptFrame, "bool data length mismatch");
        auto data = r.bytes(len);
        col.i32.assign(data.begin(), data.end());
        break;
    }
    }
    return col;
}

Schema read_schema_payload(std::span<const uint8_t> payload) {
    ByteReader r(payload);
    uint32_t count = r.u32();
    std::vector<Field> fields;
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t name_len = r.u16();
        auto name = r.bytes(name_len);
        uint8_t type = r.u8();
        uint8_t nullable = r.u8();
        if (type < 1 || type > 7 || nullable > 1) throw Error(ErrorCode::kCorruptFrame, "bad field descriptor");
        fields.push_back(Field{std::string(reinterpret_cast<const char*>(name.data()), name.size()),
                               static_cast<TypeKind>(type), nullable == 1});
    }
    r.expect_end("schema frame");
    try {
        return Schema(std::move(fields));
    } catch (const Error& e) {
        throw Error(ErrorCode::kCorruptFrame, e.what());
    }
}

} // namespace

uint32_t crc32_of(std::span<const uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    return static_cast<uint32_t>(crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

void write_frame(ByteWriter& out, uint8_t type, std::span<const uint8_t> payload) {
    out.u8(type);
    out.u32(static_cast<uint32_t>(payload.size()));
    out.bytes(payload.data(), payload.size());
    out.u32(crc32_of(payload));
}

RawFrame read_frame(ByteReader& in) {
    RawFrame f;
    f.type = in.u8();
    uint32_t len = in.u32();
    f.payload = in.bytes(len);
    uint32_t crc = in.u32();
    if (crc != crc32_of(f.payload)) {
        throw Error(ErrorCode::kCorruptFrame, "checksum mismatch in frame type " + std::to_string(f.type));
    }
    return f;
}

void write_stream_header(ByteWriter& out, std::string_view magic, uint8_t version) {
    out.bytes(reinterpret_cast<const uint8_t*>(magic.data()), magic.size());
    out.u8(version);
    out.u8(0);
}

void read_stream_header(ByteReader& in, std::string_view magic, uint8_t version) {
    auto m = in.bytes(magic.size());
    if (std::memcmp(m.data(), magic.data(), magic.size()) != 0) {
        throw Error(ErrorCode::kCorruptFrame, "bad magic, expected " + std::string(magic));
    }
    uint8_t v = in.u8();
    if (v != version) {
        throw Error(ErrorCode::kVersionUnsupported, std::string(magic) + " version " + std::to_string(v));
    }
    uint8_t flags = in.u8();
    if (flags != 0) throw Error(ErrorCode::kCorruptFrame, "unsupported stream flags " + std::to_string(flags));
}

std::vector<uint8_t> serialize_columnar(const Table& table) {
    ByteWriter out;
    write_stream_header(out, "TCOL", kTiercolVersion);

    ByteWriter schema;
    schema.u32(static_cast<uint32_t>(table.schema().size()));
    for (const auto& f : table.schema().fields()) {
        schema.u16(static_cast<uint16_t>(f.name.size()));
        schema.bytes(reinterpret_cast<const uint8_t*>(f.name.data()), f.name.size());
        schema.u8(static_cast<uint8_t>(f.type));
        schema.u8(f.nullable ? 1 : 0);
    }
    write_frame(out, kSchemaFrame, schema.data());

    for (const auto& batch : table.batches()) {
        ByteWriter payload;
        payload.u32(static_cast<uint32_t>(batch.num_rows()));
        for (size_t c = 0; c < batch.num_columns(); ++c) put_column(payload, batch.column(c));
        write_frame(out, kBatchFrame, payload.data());
    }
    write_frame(out, kEndFrame, {});
    return out.take();
}

Table deserialize_columnar(std::span<const uint8_t> bytes) {
    ByteReader in(bytes);
    read_stream_header(in, "TCOL", kTiercolVersion);
    RawFrame first = read_frame(in);
    if (first.type != kSchemaFrame) throw Error(ErrorCode::kCorruptFrame, "first frame is not a schema frame");
    Schema schema = read_schema_payload(first.payload);
    std::vector<ColumnBatch> batches;
    for (;;) {
        RawFrame f = read_frame(in);
        if (f.type == kEndFrame) {
            if (!f.payload.empty()) throw Error(ErrorCode::kCorruptFrame, "non-empty end frame");
            break;
        }
        if (f.type != kBatchFrame) throw Error(ErrorCode::kCorruptFrame, "unknown frame type " + std::to_string(f.type));
        ByteReader r(f.payload);
        uint32_t rows = r.u32();
        std::vector<Column> cols;
        for (const auto& field : schema.fields()) cols.push_back(get_column(r, field.type, rows));
        r.expect_end("batch frame");
        try {
            batches.emplace_back(schema, std::move(cols));
        } catch (const Error& e) {
            throw Error(ErrorCode::kCorruptFrame, e.what());
        }
    }
    in.expect_end("stream");
    return Table(std::move(schema), std::move(batches));
}

} // namespace tierq
