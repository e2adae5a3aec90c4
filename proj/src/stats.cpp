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

#include "tierq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "tierq/error.hpp"
#include "tierq/frame.hpp"

namespace tierq {

namespace {

constexpr uint8_t kHistogramFrame = 0x10;
constexpr std::string_view kMagic = "THST";
constexpr uint8_t kVersion = 1;

double value_at(const Column& c, size_t row) {
    switch (c.type) {
    case TypeKind::kInt32: return c.i32[row];
    case TypeKind::kInt64: return static_cast<double>(c.i64[row]);
    default: return c.f64[row];
    }
}

size_t bin_of(double v, double lo, double width, size_t bins) {
    if (width <= 0) return 0;
    auto b = static_cast<size_t>(std::max(0.0, std::floor((v - lo) / width)));
    return std::min(b, bins - 1);
}

} // namespace

Histogram build_histogram(const Table& table, std::string_view column, const HistogramOptions& opts) {
    if (!(opts.sample_rate > 0.0 && opts.sample_rate <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "sample rate must be in (0, 1]");
    }
    if (opts.bins == 0) throw Error(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
    auto idx = table.schema().index_of(column);
    if (!idx) throw Error(ErrorCode::kSchemaMismatch, "no column '" + std::string(column) + "'");
    TypeKind type = table.schema().field(*idx).type;
    if (!is_numeric(type)) {
        throw Error(ErrorCode::kUnsupportedColumnType,
                    "no histogram for " + std::string(type_name(type)) + " column '" + std::string(column) + "'");
    }

    Histogram h;
    h.column = std::string(column);
    h.bins = opts.bins;
    h.sample_rate = opts.sample_rate;
    h.total_rows = table.num_rows();

    const auto stride = static_cast<uint64_t>(std::ceil(1.0 / opts.sample_rate - 1e-12));
    const uint64_t offset = opts.seed % stride;
    std::vector<double> sample;
    uint64_t base = 0;
    for (const auto& batch : table.batches()) {
        const Column& c = batch.column(*idx);
        uint64_t n = batch.num_rows();
        uint64_t first = base <= offset ? offset - base : (stride - (base - offset) % stride) % stride;
        for (uint64_t r = first; r < n; r += stride) {
            ++h.sampled_rows;
            double v = value_at(c, r);
            if (!c.valid[r] || std::isnan(v)) {
                ++h.sampled_nulls;
            } else {
                sample.push_back(v);
            }
        }
        base += n;
    }

    h.counts.assign(h.bins, 0);
    h.null_fraction = h.sampled_rows ? static_cast<double>(h.sampled_nulls) / static_cast<double>(h.sampled_rows) : 0;
    if (sample.empty()) return h;

    auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
    h.lo = *mn;
    h.hi = *mx;
    double width = (h.hi - h.lo) / static_cast<double>(h.bins);
    std::unordered_map<double, uint64_t> freq;
    for (double v : sample) {
        ++h.counts[bin_of(v, h.lo, width, h.bins)];
        ++freq[v];
    }

    // Guaranteed-error estimator: values seen once are scaled by
    // sqrt(N/n), values seen more than once are counted once.
    double d = static_cast<double>(freq.size());
    double f1 = 0;
    for (const auto& [v, k] : freq) f1 += k == 1 ? 1 : 0;
    double n = static_cast<double>(sample.size());
    double population = static_cast<double>(h.total_rows) * (1.0 - h.null_fraction);
    if (d <= 1) {
        h.distinct_estimate = d;
    } else {
        double est = std::sqrt(std::max(population, n) / n) * f1 + (d - f1);
        h.distinct_estimate = std::clamp(est, d, std::max(population, d));
    }
    return h;
}

Histogram sequence_histogram(std::string_view column, uint64_t rows, size_t bins) {
    Histogram h;
    h.column = std::string(column);
    h.bins = std::max<size_t>(bins, 1);
    h.sampled_rows = rows;
    h.total_rows = rows;
    h.sample_rate = 1;
    h.distinct_estimate = static_cast<double>(rows);
    h.counts.assign(h.bins, 0);
    if (rows == 0) return h;
    h.hi = static_cast<double>(rows - 1);
    double width = h.hi / static_cast<double>(h.bins);
    if (width <= 0) {
        h.counts[0] = rows;
        return h;
    }
    // Integers k land in bin floor(k / width); the first k of bin i is ceil(i * width).
    uint64_t prev = 0;
    for (size_t i = 1; i <= h.bins; ++i) {
        uint64_t start = i == h.bins ? rows : std::min<uint64_t>(rows, static_cast<uint64_t>(std::ceil(i * width)));
        h.counts[i - 1] = start - prev;
        prev = start;
    }
    return h;
}

double estimate_range_selectivity(const Histogram& h, std::optional<RangeBound> lo, std::optional<RangeBound> hi) {
    if (h.sampled_rows == 0 || h.non_null_samples() == 0) return 0.0;
    const double inf = std::numeric_limits<double>::infinity();
    double a = lo ? lo->value : -inf;
    double b = hi ? hi->value : inf;
    bool ac = lo && lo->closed;
    bool bc = hi && hi->closed;
    if (std::isnan(a) || std::isnan(b) || a > b || (a == b && !(ac && bc))) return 0.0;
    // Does the range meet [h.lo, h.hi] at all?
    if (b < h.lo || a > h.hi || (b == h.lo && !bc) || (a == h.hi && !ac)) return 0.0;

    double present = static_cast<double>(h.non_null_samples()) / static_cast<double>(h.sampled_rows);
    if (h.hi == h.lo) return present;

    double width = (h.hi - h.lo) / static_cast<double>(h.bins);
    double covered = 0;
    for (size_t i = 0; i < h.bins; ++i) {
        double bl = h.lo + width * static_cast<double>(i);
        double bh = i + 1 == h.bins ? h.hi : h.lo + width * static_cast<double>(i + 1);
        double overlap = std::min(b, bh) - std::max(a, bl);
        if (overlap <= 0 || bh <= bl) continue;
        covered += static_cast<double>(h.counts[i]) * std::min(1.0, overlap / (bh - bl));
    }
    covered /= static_cast<double>(h.sampled_rows);
    // A range that meets the data holds at least one value's share.
    double one_value = present / std::max(1.0, h.distinct_estimate);
    return std::min(present, std::max(covered, one_value));
}

double estimate_conjunction(std::span<const double> selectivities) {
    double p = 1.0;
    for (double s : selectivities) p *= std::clamp(s, 0.0, 1.0);
    return p;
}

std::vector<uint8_t> serialize_histograms(std::span<const Histogram> hs) {
    ByteWriter out;
    write_stream_header(out, kMagic, kVersion);
    for (const auto& h : hs) {
        ByteWriter p;
        p.str(h.column);
        p.u32(static_cast<uint32_t>(h.bins));
        p.scalar(h.lo);
        p.scalar(h.hi);
        p.u64(h.sampled_rows);
        p.u64(h.sampled_nulls);
        p.u64(h.total_rows);
        p.scalar(h.null_fraction);
        p.scalar(h.distinct_estimate);
        p.scalar(h.sample_rate);
        for (uint64_t c : h.counts) p.u64(c);
        write_frame(out, kHistogramFrame, p.data());
    }
    write_frame(out, kEndFrame, {});
    return out.take();
}

std::vector<Histogram> deserialize_histograms(std::span<const uint8_t> bytes) {
    ByteReader in(bytes);
    read_stream_header(in, kMagic, kVersion);
    std::vector<Histogram> out;
    while (true) {
        RawFrame f = read_frame(in);
        if (f.type == kEndFrame) break;
        if (f.type != kHistogramFrame) throw Error(ErrorCode::kCorruptFrame, "unexpected frame in histogram record");
        ByteReader p(f.payload);
        Histogram h;
        h.column = p.str();
        h.bins = p.u32();
        if (h.bins == 0) throw Error(ErrorCode::kCorruptFrame, "histogram with zero bins");
        h.lo = p.scalar<double>();
        h.hi = p.scalar<double>();
        h.sampled_rows = p.u64();
        h.sampled_nulls = p.u64();
        h.total_rows = p.u64();
        h.null_fraction = p.scalar<double>();
        h.distinct_estimate = p.scalar<double>();
        h.sample_rate = p.scalar<double>();
        if (p.remaining() != h.bins * 8) throw Error(ErrorCode::kCorruptFrame, "histogram bin count mismatch");
        h.counts.resize(h.bins);
        for (auto& c : h.counts) c = p.u64();
        out.push_back(std::move(h));
    }
    in.expect_end("histogram record");
    return out;
}

} // namespace tierq
