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

// Little-endian byte framing shared by TIERCOL and the histogram records.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tierq/error.hpp"

namespace tierq {

inline constexpr uint8_t kEndFrame = 0xFF;

class ByteWriter {
public:
    void u8(uint8_t v) { _buf.push_back(v); }
    void u16(uint16_t v) { scalar(v); }
    void u32(uint32_t v) { scalar(v); }
    void u64(uint64_t v) { scalar(v); }

    template <typename T>
    void scalar(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        uint8_t raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        }
        _buf.insert(_buf.end(), raw, raw + sizeof(T));
    }

    void bytes(const uint8_t* data, size_t n) { _buf.insert(_buf.end(), data, data + n); }
    void str(std::string_view s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
    }

    std::span<const uint8_t> data() const { return _buf; }
    std::vector<uint8_t> take() { return std::move(_buf); }

private:
    std::vector<uint8_t> _buf;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> data) : _data(data) {}

    uint8_t u8() { return scalar<uint8_t>(); }
    uint16_t u16() { return scalar<uint16_t>(); }
    uint32_t u32() { return scalar<uint32_t>(); }
    uint64_t u64() { return scalar<uint64_t>(); }

    template <typename T>
    T scalar() {
        auto raw = bytes(sizeof(T));
        uint8_t tmp[sizeof(T)];
        std::memcpy(tmp, raw.data(), sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(tmp[i], tmp[sizeof(T) - 1 - i]);
        }
        T v;
        std::memcpy(&v, tmp, sizeof(T));
        return v;
    }

    std::span<const uint8_t> bytes(size_t n) {
        if (n > _data.size() - _pos) {
            throw Error(ErrorCode::kCorruptFrame, "truncated stream at byte " + std::to_string(_pos));
        }
        auto out = _data.subspan(_pos, n);
        _pos += n;
        return out;
    }

    std::string str() {
        uint32_t n = u32();
        auto b = bytes(n);
        return std::string(reinterpret_cast<const char*>(b.data()), b.size());
    }

    size_t remaining() const { return _data.size() - _pos; }

    void expect_end(const char* what) const {
        if (remaining() != 0) {
            throw Error(ErrorCode::kCorruptFrame, std::string("trailing bytes after ") + what);
        }
    }

private:
    std::span<const uint8_t> _data;
    size_t _pos = 0;
};

struct RawFrame {
    uint8_t type = 0;
    std::span<const uint8_t> payload;
};

uint32_t crc32_of(std::span<const uint8_t> bytes);
void write_frame(ByteWriter& out, uint8_t type, std::span<const uint8_t> payload);
// Verifies the trailing checksum.
RawFrame read_frame(ByteReader& in);

void write_stream_header(ByteWriter& out, std::string_view magic, uint8_t version);
// Throws kCorruptFrame on bad magic or flags, kVersionUnsupported on version.
void read_stream_header(ByteReader& in, std::string_view magic, uint8_t version);

} // namespace tierq
