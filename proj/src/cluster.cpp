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

#include "tierq/cluster.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tierq/error.hpp"
#include "tierq/executor.hpp"
#include "tierq/sql.hpp"
#include "tierq/stats.hpp"

namespace tierq {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view mode_name(Mode m) {
    switch (m) {
    case Mode::kBaseline: return "baseline";
    case Mode::kPred: return "pred";
    case Mode::kCos: return "cos";
    case Mode::kOasis: return "oasis";
    }
    return "?";
}

std::optional<Mode> mode_from_name(std::string_view name) {
    for (Mode m : kAllModes) {
        if (mode_name(m) == name) return m;
    }
    return std::nullopt;
}

// ---- configuration -------------------------------------------------------

void ClusterConfig::validate() const {
    auto positive = [](double v, const char* what) {
        if (!(v > 0) || !std::isfinite(v)) {
            throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be a positive number");
        }
    };
    if (array_nodes == 0) throw Error(ErrorCode::kInvalidArgument, "array_nodes must be at least 1");
    if (batch_rows == 0) throw Error(ErrorCode::kInvalidArgument, "batch_rows must be at least 1");
    positive(interconnect_bandwidth, "interconnect_bandwidth");
    positive(client_bandwidth, "client_bandwidth");
    positive(array_compute_rate, "array_compute_rate");
    positive(fe_compute_rate, "fe_compute_rate");
    positive(client_compute_rate, "client_compute_rate");
    positive(sort_cost_factor, "sort_cost_factor");
    if (!(stats_rate > 0 && stats_rate <= 1)) throw Error(ErrorCode::kInvalidArgument, "stats_rate must be in (0, 1]");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T v{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw Error(ErrorCode::kInvalidArgument, "bad value '" + std::string(text) + "' for " + std::string(key));
    }
    return v;
}

} // namespace

ClusterConfig parse_config(std::string_view text, ClusterConfig cfg) {
    size_t line_no = 0;
    while (!text.empty()) {
        size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
        ++line_no;
        if (size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::kInvalidArgument, "config line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string_view key = trim(line.substr(0, eq));
        std::string_view value = trim(line.substr(eq + 1));
        if (key == "array_nodes") {
            cfg.array_nodes = parse_number<size_t>(key, value);
        } else if (key == "interconnect_bandwidth") {
            cfg.interconnect_bandwidth = parse_number<double>(key, value);
        } else if (key == "client_bandwidth") {
            cfg.client_bandwidth = parse_number<double>(key, value);
        } else if (key == "transfer_budget") {
            cfg.transfer_budget = parse_number<uint64_t>(key, value);
        } else if (key == "mode") {
            auto m = mode_from_name(value);
            if (!m) throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(value) + "'");
            cfg.mode = *m;
        } else if (key == "array_compute_rate") {
            cfg.array_compute_rate = parse_number<double>(key, value);
        } else if (key == "fe_compute_rate") {
            cfg.fe_compute_rate = parse_number<double>(key, value);
        } else if (key == "client_compute_rate") {
            cfg.client_compute_rate = parse_number<double>(key, value);
        } else if (key == "sort_cost_factor") {
            cfg.sort_cost_factor = parse_number<double>(key, value);
        } else if (key == "stats_rate") {
            cfg.stats_rate = parse_number<double>(key, value);
        } else if (key == "batch_rows") {
            cfg.batch_rows = parse_number<size_t>(key, value);
        } else {
            throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
        }
    }
    cfg.validate();
    return cfg;
}

ClusterConfig load_config(const fs::path& path, ClusterConfig base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), base);
}

std::string config_to_text(const ClusterConfig& c) {
    std::ostringstream o;
    o << "array_nodes = " << c.array_nodes << "\n"
      << "interconnect_bandwidth = " << format_double(c.interconnect_bandwidth) << "\n"
      << "client_bandwidth = " << format_double(c.client_bandwidth) << "\n"
      << "transfer_budget = " << c.transfer_budget << "\n"
      << "mode = " << mode_name(c.mode) << "\n"
      << "array_compute_rate = " << format_double(c.array_compute_rate) << "\n"
      << "fe_compute_rate = " << format_double(c.fe_compute_rate) << "\n"
      << "client_compute_rate = " << format_double(c.client_compute_rate) << "\n"
      << "sort_cost_factor = " << format_double(c.sort_cost_factor) << "\n"
      << "stats_rate = " << format_double(c.stats_rate) << "\n"
      << "batch_rows = " << c.batch_rows << "\n";
    return o.str();
}

ObjectRef parse_object_ref(std::string_view text) {
    size_t slash = text.find('/');
    if (slash == std::string_view::npos || slash == 0 || slash + 1 == text.size()) {
        throw Error(ErrorCode::kInvalidArgument, "object reference must be bucket/key, got '" + std::string(text) + "'");
    }
    return {std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
}

// ---- object store --------------------------------------------------------

namespace {

void check_bucket_name(const std::string& name) {
    bool ok = !name.empty() && name != "_meta" && name.front() != '.';
    for (char c : name) {
        ok = ok && ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.');
    }
    if (!ok) throw Error(ErrorCode::kInvalidArgument, "bad bucket name '" + name + "' (use a-z, 0-9, '-', '_', '.')");
}

void check_key(const std::string& key) {
    bool ok = !key.empty();
    for (char c : key) ok = ok && static_cast<unsigned char>(c) > ' ' && c != 0x7f;
    if (!ok) throw Error(ErrorCode::kInvalidArgument, "bad object key '" + key + "' (no spaces or control characters)");
}

std::vector<uint8_t> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + p.string());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, std::span<const uint8_t> bytes) {
    fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
    }
    fs::rename(tmp, p);
}

void write_text(const fs::path& p, const std::string& text) {
    write_file(p, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

double parse_double_text(const std::string& s) {
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    return std::stod(s);
}

std::map<std::string, std::pair<double, double>> column_ranges(const Table& t) {
    std::map<std::string, std::pair<double, double>> out;
    const Schema& s = t.schema();
    for (size_t c = 0; c < s.size(); ++c) {
        const Field& f = s.field(c);
        if (!is_numeric(f.type)) continue;
        bool any = false;
        double lo = 0, hi = 0;
        for (const auto& b : t.batches()) {
            const Column& col = b.column(c);
            for (size_t r = 0; r < col.size(); ++r) {
                if (!col.is_valid(r)) continue;
                double v = f.type == TypeKind::kFloat64   ? col.f64[r]
                           : f.type == TypeKind::kInt64 ? static_cast<double>(col.i64[r])
                                                        : static_cast<double>(col.i32[r]);
                if (std::isnan(v)) continue;
                if (!any) {
                    lo = hi = v;
                    any = true;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        }
        if (any) out[f.name] = {lo, hi};
    }
    return out;
}

json meta_to_json(const ObjectMeta& m) {
    json j;
    j["bucket"] = m.bucket;
    j["key"] = m.key;
    j["object_space_id"] = m.object_space_id;
    j["object_id"] = m.object_id;
    j["schema"] = schema_to_text(m.schema);
    j["row_count"] = m.row_count;
    j["logical_bytes"] = m.logical_bytes;
    j["stats_rate"] = format_double(m.stats_rate);
    json widths = json::object();
    for (const auto& [name, w] : m.stats.column_width) widths[name] = format_double(w);
    j["column_width"] = widths;
    json shards = json::array();
    for (const auto& s : m.shards) {
        json r = json::object();
        for (const auto& [name, lohi] : s.ranges) r[name] = {format_double(lohi.first), format_double(lohi.second)};
        shards.push_back({{"node", s.node},
                          {"row_count", s.row_count},
                          {"rowid_base", s.rowid_base},
                          {"serialized_bytes", s.serialized_bytes},
                          {"ranges", r}});
    }
    j["shards"] = shards;
    return j;
}

ObjectMeta meta_from_json(const json& j) {
    ObjectMeta m;
    m.bucket = j.at("bucket").get<std::string>();
    m.key = j.at("key").get<std::string>();
    m.object_space_id = j.at("object_space_id").get<uint64_t>();
    m.object_id = j.at("object_id").get<uint64_t>();
    m.schema = parse_schema_text(j.at("schema").get<std::string>());
    m.row_count = j.at("row_count").get<uint64_t>();
    m.logical_bytes = j.at("logical_bytes").get<uint64_t>();
    m.stats_rate = parse_double_text(j.at("stats_rate").get<std::string>());
    m.stats.row_count = m.row_count;
    m.stats.logical_bytes = m.logical_bytes;
    for (const auto& [name, w] : j.at("column_width").items()) {
        m.stats.column_width[name] = parse_double_text(w.get<std::string>());
    }
    for (const auto& s : j.at("shards")) {
        ShardMeta sm;
        sm.node = s.at("node").get<size_t>();
        sm.row_count = s.at("row_count").get<uint64_t>();
        sm.rowid_base = s.at("rowid_base").get<uint64_t>();
        sm.serialized_bytes = s.at("serialized_bytes").get<uint64_t>();
        for (const auto& [name, r] : s.at("ranges").items()) {
            sm.ranges[name] = {parse_double_text(r.at(0).get<std::string>()),
                               parse_double_text(r.at(1).get<std::string>())};
        }
        m.shards.push_back(std::move(sm));
    }
    return m;
}

} // namespace

ObjectStore::ObjectStore(fs::path root) : _root(std::move(root)) {
    if (fs::exists(_root / "MANIFEST")) load_manifest();
}

fs::path ObjectStore::meta_dir(uint64_t space) const { return _root / "_meta" / std::to_string(space); }

fs::path ObjectStore::shard_path(const ObjectMeta& m, size_t k) const {
    std::string file = std::to_string(m.object_id);
    if (m.shards.size() > 1) file += "." + std::to_string(k);
    return _root / m.bucket / std::to_string(m.object_space_id) / (file + ".tcol");
}

void ObjectStore::save_manifest() const {
    std::ostringstream o;
    o << "tierq-manifest 1\n";
    for (const auto& [name, b] : _buckets) {
        o << "bucket " << name << " " << b.object_space_id << " " << b.node << " " << b.nodes << " " << b.shard_count
          << "\n";
    }
    for (const auto& [k, m] : _objects) o << "object " << m.bucket << " " << m.object_id << " " << m.key << "\n";
    write_text(_root / "MANIFEST", o.str());
}

void ObjectStore::load_manifest() {
    auto bytes = read_file(_root / "MANIFEST");
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    if (!std::getline(in, line) || line != "tierq-manifest 1") {
        throw Error(ErrorCode::kIoError, "unrecognized manifest in " + _root.string());
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "bucket") {
            BucketInfo b;
            ls >> b.name >> b.object_space_id >> b.node >> b.nodes >> b.shard_count;
            if (!ls) throw Error(ErrorCode::kIoError, "bad manifest line: " + line);
            _buckets[b.name] = b;
        } else if (kind == "object") {
            std::string bucket, key;
            uint64_t id = 0;
            ls >> bucket >> id >> key;
            if (!ls || !_buckets.count(bucket)) throw Error(ErrorCode::kIoError, "bad manifest line: " + line);
            auto space = _buckets[bucket].object_space_id;
            auto text = read_file(meta_dir(space) / (std::to_string(id) + ".json"));
            ObjectMeta m = meta_from_json(json::parse(text.begin(), text.end()));
            auto hist = read_file(meta_dir(space) / (std::to_string(id) + ".thst"));
            for (auto& h : deserialize_histograms(hist)) m.stats.histograms[h.column] = std::move(h);
            _objects[{bucket, key}] = std::move(m);
        } else {
            throw Error(ErrorCode::kIoError, "bad manifest line: " + line);
        }
    }
}

BucketInfo ObjectStore::create_bucket(const std::string& name, size_t shard_count, size_t nodes) {
    check_bucket_name(name);
    if (shard_count == 0 || nodes == 0) throw Error(ErrorCode::kInvalidArgument, "shard and node counts must be >= 1");
    std::unique_lock lock(_mu);
    if (_buckets.count(name)) throw Error(ErrorCode::kDuplicateBucket, "bucket '" + name + "' exists");
    BucketInfo b;
    b.name = name;
    b.object_space_id = _buckets.size() + 1;
    b.nodes = nodes;
    b.node = static_cast<size_t>((b.object_space_id - 1) % nodes);
    b.shard_count = shard_count;
    _buckets[name] = b;
    fs::create_directories(_root / name / std::to_string(b.object_space_id));
    save_manifest();
    return b;
}

bool ObjectStore::has_bucket(const std::string& name) const {
    std::shared_lock lock(_mu);
    return _buckets.count(name) > 0;
}

std::vector<BucketInfo> ObjectStore::buckets() const {
    std::shared_lock lock(_mu);
    std::vector<BucketInfo> out;
    for (const auto& [n, b] : _buckets) out.push_back(b);
    return out;
}

ObjectMeta ObjectStore::put_object(const std::string& bucket, const std::string& key, const Table& table,
                                   double stats_rate) {
    check_key(key);
    if (table.schema().size() == 0) throw Error(ErrorCode::kInvalidArgument, "object schema has no columns");
    if (!(stats_rate > 0 && stats_rate <= 1)) throw Error(ErrorCode::kInvalidArgument, "stats rate must be in (0, 1]");
    std::unique_lock lock(_mu);
    auto bit = _buckets.find(bucket);
    if (bit == _buckets.end()) throw Error(ErrorCode::kNoSuchBucket, "no bucket '" + bucket + "'");
    if (_objects.count({bucket, key})) throw Error(ErrorCode::kDuplicateKey, "'" + bucket + "/" + key + "' exists");
    const BucketInfo& b = bit->second;

    ObjectMeta m;
    m.bucket = bucket;
    m.key = key;
    m.object_space_id = b.object_space_id;
    m.object_id = 1;
    for (const auto& [k, o] : _objects) {
        if (o.bucket == bucket) m.object_id = std::max(m.object_id, o.object_id + 1);
    }
    m.schema = table.schema();
    m.row_count = table.num_rows();
    m.logical_bytes = table.logical_bytes();
    m.stats_rate = stats_rate;
    m.stats = compute_table_stats(table, HistogramOptions{stats_rate, 64, 0});

    ColumnBatch all = table.combined();
    const size_t n = all.num_rows();
    const size_t k = b.shard_count;
    std::vector<std::vector<uint8_t>> files;
    size_t begin = 0;
    for (size_t i = 0; i < k; ++i) {
        size_t count = n / k + (i < n % k ? 1 : 0);
        Table part = Table(table.schema(), {all.slice(begin, count)}).rebatched(65536);
        ShardMeta s;
        s.node = (b.node + i) % b.nodes;
        s.row_count = count;
        s.rowid_base = begin;
        s.ranges = column_ranges(part);
        files.push_back(serialize_columnar(part));
        s.serialized_bytes = files.back().size();
        m.shards.push_back(std::move(s));
        begin += count;
    }
    for (size_t i = 0; i < k; ++i) write_file(shard_path(m, i), files[i]);
    std::vector<Histogram> hs;
    for (const auto& [name, h] : m.stats.histograms) hs.push_back(h);
    write_file(meta_dir(m.object_space_id) / (std::to_string(m.object_id) + ".thst"), serialize_histograms(hs));
    write_text(meta_dir(m.object_space_id) / (std::to_string(m.object_id) + ".json"), meta_to_json(m).dump(1) + "\n");
    _objects[{bucket, key}] = m;
    save_manifest();
    return m;
}

ObjectMeta ObjectStore::object(const std::string& bucket, const std::string& key) const {
    std::shared_lock lock(_mu);
    if (!_buckets.count(bucket)) throw Error(ErrorCode::kNoSuchBucket, "no bucket '" + bucket + "'");
    auto it = _objects.find({bucket, key});
    if (it == _objects.end()) throw Error(ErrorCode::kNoSuchObject, "no object '" + bucket + "/" + key + "'");
    return it->second;
}

std::vector<ObjectMeta> ObjectStore::objects(const std::string& bucket) const {
    std::shared_lock lock(_mu);
    if (!_buckets.count(bucket)) throw Error(ErrorCode::kNoSuchBucket, "no bucket '" + bucket + "'");
    std::vector<ObjectMeta> out;
    for (const auto& [k, m] : _objects) {
        if (m.bucket == bucket) out.push_back(m);
    }
    return out;
}

std::vector<ShardData> ObjectStore::read_shards(const std::string& bucket, const std::string& key) const {
    ObjectMeta m = object(bucket, key);
    std::vector<ShardData> out;
    for (size_t i = 0; i < m.shards.size(); ++i) {
        Table t = deserialize_columnar(read_file(shard_path(m, i)));
        if (!(t.schema() == m.schema)) {
            throw Error(ErrorCode::kSchemaMismatch, "shard " + std::to_string(i) + " of '" + bucket + "/" + key +
                                                            "' does not match the recorded schema");
        }
        out.push_back({std::move(t), m.shards[i].rowid_base, m.shards[i].node});
    }
    return out;
}

Table ObjectStore::get_object(const std::string& bucket, const std::string& key) const {
    ObjectMeta m = object(bucket, key);
    std::vector<Table> parts;
    for (auto& s : read_shards(bucket, key)) parts.push_back(std::move(s.table));
    return Table::concat(m.schema, parts);
}

// ---- query orchestration -------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <typename F>
auto in_phase(const char* phase, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(phase) + ": " + e.message());
    }
}

// Operator input bytes, with sorts weighted. Scanning the stored object
// costs the same in every mode, so a Read counts only for an inline filter.
double weighted_bytes(const Plan& p, const std::vector<NodeTrace>& trace, double sort_factor) {
    double total = 0;
    for (size_t i = 0; i < trace.size() && i < p.nodes.size(); ++i) {
        double w = std::holds_alternative<SortNode>(p.nodes[i]) ? sort_factor : 1.0;
        if (const auto* r = std::get_if<ReadNode>(&p.nodes[i])) w = r->filter ? 1.0 : 0.0;
        total += w * static_cast<double>(trace[i].input_bytes);
    }
    return total;
}

struct Piece {
    Table table;
    uint64_t rowid_base = 0;
};

// One tier running a whole plan over object pieces: the read runs per piece
// (keeping rowids), the rest over their concatenation. Returns the result
// and the simulated weighted bytes.
Table run_local(const Plan& plan, const std::vector<Piece>& pieces, const ClusterConfig& cfg, double& weighted) {
    const std::string& ref = plan.read().table_ref;
    if (pieces.size() == 1) {
        ExecContext ctx;
        ctx.batch_rows = cfg.batch_rows;
        ctx.add_table(ref, pieces[0].table, pieces[0].rowid_base);
        std::vector<NodeTrace> trace;
        Table out = execute(plan, ctx, &trace);
        weighted += weighted_bytes(plan, trace, cfg.sort_cost_factor);
        return out;
    }
    DecomposedPlans d = decompose(plan, move_split(plan, SplitDecision{}, 0, {pieces.size()}), "pieces");
    std::vector<Table> parts;
    for (const auto& p : pieces) {
        ExecContext ctx;
        ctx.batch_rows = cfg.batch_rows;
        ctx.add_table(ref, p.table, p.rowid_base);
        std::vector<NodeTrace> trace;
        parts.push_back(execute(d.array_plan, ctx, &trace));
        weighted += weighted_bytes(d.array_plan, trace, cfg.sort_cost_factor);
    }
    ExecContext ctx;
    ctx.batch_rows = cfg.batch_rows;
    ctx.add_table("pieces", Table::concat(d.intermediate_schema, parts));
    std::vector<NodeTrace> trace;
    Table out = execute(d.fe_plan, ctx, &trace);
    weighted += weighted_bytes(d.fe_plan, trace, cfg.sort_cost_factor);
    return out;
}

std::optional<double> literal_number(const Expr& e) {
    const auto* l = std::get_if<Literal>(&e->v);
    if (!l) return std::nullopt;
    if (const auto* i = std::get_if<int64_t>(&l->value)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&l->value)) return *d;
    return std::nullopt;
}

const std::string* column_name(const Expr& e) {
    const auto* c = std::get_if<ColumnRef>(&e->v);
    return c ? &c->name : nullptr;
}

CmpOp flipped(CmpOp op) {
    switch (op) {
    case CmpOp::kLt: return CmpOp::kGt;
    case CmpOp::kLe: return CmpOp::kGe;
    case CmpOp::kGt: return CmpOp::kLt;
    case CmpOp::kGe: return CmpOp::kLe;
    default: return op;
    }
}

// True when the shard's ranges show no row can satisfy the conjunct.
bool refutes(const Expr& e, const Schema& schema, const ShardMeta& shard) {
    auto range_of = [&](const std::string& col) -> std::optional<std::optional<std::pair<double, double>>> {
        auto idx = schema.index_of(col);
        if (!idx || !is_numeric(schema.field(*idx).type)) return std::nullopt;
        auto it = shard.ranges.find(col);
        if (it == shard.ranges.end()) return std::optional<std::pair<double, double>>();
        return std::optional<std::pair<double, double>>(it->second);
    };
    if (const auto* c = std::get_if<Cmp>(&e->v)) {
        const std::string* col = column_name(c->lhs);
        std::optional<double> v = literal_number(c->rhs);
        CmpOp op = c->op;
        if (!col) {
            col = column_name(c->rhs);
            v = literal_number(c->lhs);
            op = flipped(op);
        }
        if (!col || !v || std::isnan(*v) || op == CmpOp::kNe) return false;
        auto r = range_of(*col);
        if (!r) return false;
        if (!*r) return true; // only nulls and NaNs, which never compare true
        auto [lo, hi] = **r;
        switch (op) {
        case CmpOp::kLt: return lo >= *v;
        case CmpOp::kLe: return lo > *v;
        case CmpOp::kGt: return hi <= *v;
        case CmpOp::kGe: return hi < *v;
        case CmpOp::kEq: return *v < lo || *v > hi;
        default: return false;
        }
    }
    if (const auto* b = std::get_if<Between>(&e->v)) {
        const std::string* col = column_name(b->value);
        auto lo_v = literal_number(b->lo);
        auto hi_v = literal_number(b->hi);
        if (!col || !lo_v || !hi_v || std::isnan(*lo_v) || std::isnan(*hi_v)) return false;
        auto r = range_of(*col);
        if (!r) return false;
        if (!*r) return true;
        return *lo_v > *hi_v || (*r)->second < *lo_v || (*r)->first > *hi_v;
    }
    return false;
}

// Range conjuncts on base columns: the read's own filter and the filters
// directly above it.
std::vector<Expr> pushable_conjuncts(const Plan& plan) {
    std::vector<Expr> preds;
    if (plan.read().filter) preds.push_back(plan.read().filter);
    for (size_t i = 1; i < plan.nodes.size(); ++i) {
        const auto* f = std::get_if<FilterNode>(&plan.nodes[i]);
        if (!f) break;
        preds.push_back(f->predicate);
    }
    std::vector<Expr> out;
    for (const auto& p : preds) {
        if (const auto* a = std::get_if<And>(&p->v)) {
            out.insert(out.end(), a->terms.begin(), a->terms.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

struct Prepared {
    ObjectMeta meta;
    std::vector<ShardData> shards;
    Plan plan;
};

Prepared prepare(const ObjectStore& store, const std::string& sql, const ObjectRef& ref, QueryReport& report) {
    Prepared p;
    auto t0 = Clock::now();
    in_phase("plan", [&] {
        p.meta = store.object(ref.bucket, ref.key);
        p.plan = parse_sql(sql, p.meta.schema);
        return 0;
    });
    report.wall.plan = seconds_since(t0);
    report.plan = p.plan;
    return p;
}

std::vector<Piece> as_pieces(const std::vector<ShardData>& shards, const Schema& schema) {
    std::vector<Piece> out;
    for (const auto& s : shards) out.push_back({s.table, s.rowid_base});
    if (out.empty()) out.push_back({Table(schema), 0});
    return out;
}

void run_client_side(Prepared& p, const std::vector<size_t>& shipped, const ClusterConfig& cfg, QueryReport& r) {
    auto t0 = Clock::now();
    std::vector<ShardData> received;
    std::vector<Table> tables;
    in_phase("transfer", [&] {
        for (size_t i : shipped) {
            auto bytes = serialize_columnar(p.shards[i].table);
            r.bytes_array_to_fe += bytes.size();
            received.push_back({deserialize_columnar(bytes), p.shards[i].rowid_base, p.shards[i].node});
            tables.push_back(received.back().table);
        }
        r.bytes_fe_to_client = serialize_columnar(Table::concat(p.meta.schema, tables)).size();
        return 0;
    });
    r.wall.transfer = seconds_since(t0);
    t0 = Clock::now();
    double weighted = 0;
    r.result = in_phase("client", [&] { return run_local(p.plan, as_pieces(received, p.meta.schema), cfg, weighted); });
    r.wall.fe_exec = seconds_since(t0);
    r.simulated_compute_seconds = weighted / cfg.client_compute_rate;
}

void run_cos(Prepared& p, const ClusterConfig& cfg, QueryReport& r) {
    auto t0 = Clock::now();
    std::vector<ShardData> received;
    in_phase("transfer", [&] {
        for (const auto& s : p.shards) {
            auto bytes = serialize_columnar(s.table);
            r.bytes_array_to_fe += bytes.size();
            received.push_back({deserialize_columnar(bytes), s.rowid_base, s.node});
        }
        return 0;
    });
    r.wall.transfer = seconds_since(t0);
    t0 = Clock::now();
    double weighted = 0;
    r.result = in_phase("fe", [&] { return run_local(p.plan, as_pieces(received, p.meta.schema), cfg, weighted); });
    r.wall.fe_exec = seconds_since(t0);
    r.simulated_compute_seconds = weighted / cfg.fe_compute_rate;
    r.bytes_fe_to_client = serialize_columnar(r.result).size();
}

struct ArrayRun {
    std::vector<Table> intermediates;
    // Weighted bytes per logical worker.
    std::map<size_t, double> worker_bytes;
};

// Array fragments run concurrently, one thread per array node; a node
// works through its shards in order.
ArrayRun run_array(const Prepared& p, const DecomposedPlans& d, const ClusterConfig& cfg) {
    ArrayRun out;
    out.intermediates.resize(p.shards.size());
    std::map<size_t, std::vector<size_t>> by_worker;
    for (size_t i = 0; i < p.shards.size(); ++i) by_worker[p.shards[i].node % cfg.array_nodes].push_back(i);
    std::vector<double> shard_bytes(p.shards.size(), 0);
    std::vector<std::exception_ptr> errors(p.shards.size());
    std::vector<std::thread> workers;
    for (const auto& [w, idx] : by_worker) {
        workers.emplace_back([&, list = idx] {
            for (size_t i : list) {
                try {
                    ExecContext ctx;
                    ctx.batch_rows = cfg.batch_rows;
                    ctx.add_table(p.plan.read().table_ref, p.shards[i].table, p.shards[i].rowid_base);
                    std::vector<NodeTrace> trace;
                    out.intermediates[i] = execute(d.array_plan, ctx, &trace);
                    shard_bytes[i] = weighted_bytes(d.array_plan, trace, cfg.sort_cost_factor);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (const auto& [w, idx] : by_worker) {
        for (size_t i : idx) out.worker_bytes[w] += shard_bytes[i];
    }
    return out;
}

uint64_t serialized_total(const std::vector<Table>& ts) {
    uint64_t n = 0;
    for (const auto& t : ts) n += serialize_columnar(t).size();
    return n;
}

void run_oasis(Prepared& p, const ClusterConfig& cfg, std::optional<size_t> forced, QueryReport& r) {
    auto t0 = Clock::now();
    SodaOptions opts{std::max<size_t>(1, p.shards.size())};
    SplitDecision decision;
    DecomposedPlans d;
    in_phase("optimize", [&] {
        double read_bytes = estimated_read_bytes(p.plan, p.meta.stats);
        if (forced) {
            SplitDecision base;
            try {
                base = decide_split(p.plan, read_bytes, p.meta.stats, opts);
            } catch (const Error&) {
                base.estimates = propagate_sizes(p.plan, read_bytes, p.meta.stats);
            }
            decision = move_split(p.plan, base, *forced, opts);
            decision.lazy = false;
        } else {
            decision = decide_split(p.plan, read_bytes, p.meta.stats, opts);
        }
        d = decompose(p.plan, decision);
        return 0;
    });
    r.wall.optimize = seconds_since(t0);
    r.planned_split_after = decision.split_after;

    t0 = Clock::now();
    ArrayRun run = in_phase("array", [&] { return run_array(p, d, cfg); });
    if (decision.lazy && decision.split_after < decision.max_split_after) {
        // Run-time extension: while the measured intermediate is over budget,
        // push more of the plan below and keep the smallest result seen.
        uint64_t best_bytes = serialized_total(run.intermediates);
        for (size_t s = decision.split_after + 1; best_bytes > cfg.transfer_budget && s <= decision.max_split_after;
             ++s) {
            SplitDecision next = move_split(p.plan, decision, s, opts);
            DecomposedPlans nd = in_phase("optimize", [&] { return decompose(p.plan, next); });
            ArrayRun nr = in_phase("array", [&] { return run_array(p, nd, cfg); });
            uint64_t bytes = serialized_total(nr.intermediates);
            if (bytes <= best_bytes) {
                best_bytes = bytes;
                decision = next;
                d = std::move(nd);
                run = std::move(nr);
            }
        }
    }
    r.wall.array_exec = seconds_since(t0);

    t0 = Clock::now();
    std::vector<Table> received;
    in_phase("transfer", [&] {
        for (const auto& t : run.intermediates) {
            auto bytes = serialize_columnar(t);
            r.bytes_array_to_fe += bytes.size();
            received.push_back(deserialize_columnar(bytes));
        }
        return 0;
    });
    r.wall.transfer = seconds_since(t0);

    t0 = Clock::now();
    std::vector<NodeTrace> fe_trace;
    r.result = in_phase("fe", [&] {
        ExecContext ctx;
        ctx.batch_rows = cfg.batch_rows;
        ctx.add_table("intermediate", Table::concat(d.intermediate_schema, received));
        return execute(d.fe_plan, ctx, &fe_trace);
    });
    r.wall.fe_exec = seconds_since(t0);
    r.bytes_fe_to_client = serialize_columnar(r.result).size();

    double array_max = 0;
    for (const auto& [w, b] : run.worker_bytes) array_max = std::max(array_max, b);
    r.simulated_compute_seconds = array_max / cfg.array_compute_rate +
                                  weighted_bytes(d.fe_plan, fe_trace, cfg.sort_cost_factor) / cfg.fe_compute_rate;
    r.split = decision;
    r.fragments = std::move(d);
}

QueryReport run(const ObjectStore& store, const std::string& sql, const ObjectRef& ref, const ClusterConfig& cfg,
                std::optional<size_t> forced) {
    cfg.validate();
    QueryReport r;
    r.mode = forced ? Mode::kOasis : cfg.mode;
    Prepared p = prepare(store, sql, ref, r);
    p.shards = in_phase("array", [&] { return store.read_shards(ref.bucket, ref.key); });
    switch (r.mode) {
    case Mode::kBaseline: {
        std::vector<size_t> all(p.shards.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        run_client_side(p, all, cfg, r);
        break;
    }
    case Mode::kPred: {
        auto t0 = Clock::now();
        std::vector<Expr> conjuncts = pushable_conjuncts(p.plan);
        std::vector<size_t> kept;
        for (size_t i = 0; i < p.shards.size(); ++i) {
            bool skip = std::any_of(conjuncts.begin(), conjuncts.end(), [&](const Expr& e) {
                return refutes(e, p.meta.schema, p.meta.shards[i]);
            });
            if (skip) {
                ++r.shards_skipped;
            } else {
                kept.push_back(i);
            }
        }
        r.wall.array_exec = seconds_since(t0);
        run_client_side(p, kept, cfg, r);
        break;
    }
    case Mode::kCos: run_cos(p, cfg, r); break;
    case Mode::kOasis: run_oasis(p, cfg, forced, r); break;
    }
    r.simulated_transfer_seconds = static_cast<double>(r.bytes_array_to_fe) / cfg.interconnect_bandwidth +
                                   static_cast<double>(r.bytes_fe_to_client) / cfg.client_bandwidth;
    return r;
}

} // namespace

QueryReport run_query(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                      const ClusterConfig& cfg) {
    return run(store, sql, ref, cfg, std::nullopt);
}

QueryReport run_query_at_split(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                               const ClusterConfig& cfg, size_t split_after) {
    return run(store, sql, ref, cfg, split_after);
}

PlanReport plan_query(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                      const ClusterConfig& cfg) {
    cfg.validate();
    PlanReport out;
    ObjectMeta meta = in_phase("plan", [&] { return store.object(ref.bucket, ref.key); });
    out.plan = in_phase("plan", [&] { return parse_sql(sql, meta.schema); });
    out.stats = meta.stats;
    in_phase("optimize", [&] {
        SodaOptions opts{std::max<size_t>(1, meta.shards.size())};
        out.read_bytes = estimated_read_bytes(out.plan, meta.stats);
        out.split = decide_split(out.plan, out.read_bytes, meta.stats, opts);
        out.estimates = out.split.estimates;
        out.fragments = decompose(out.plan, out.split);
        return 0;
    });
    return out;
}

std::vector<SplitRun> bench_splits(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                                   const ClusterConfig& cfg) {
    PlanReport planned = plan_query(store, sql, ref, cfg);
    ObjectMeta meta = store.object(ref.bucket, ref.key);
    std::vector<SplitRun> out;
    for (size_t s : feasible_splits(planned.plan, {std::max<size_t>(1, meta.shards.size())})) {
        SplitRun run;
        run.split_after = s;
        run.chosen = s == planned.split.split_after;
        run.report = run_query_at_split(store, sql, ref, cfg, s);
        out.push_back(std::move(run));
    }
    return out;
}

// ---- result digests ------------------------------------------------------

namespace {

void append_value(std::string& out, const Value& v) {
    char buf[64];
    auto num = [&](double d) {
        if (std::isnan(d)) {
            out += "nan";
        } else if (d == 0) {
            out += "0";
        } else {
            std::snprintf(buf, sizeof buf, "%.12g", d);
            out += buf;
        }
    };
    std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, std::monostate>) {
                    out += "\\N";
                } else if constexpr (std::is_same_v<T, int64_t>) {
                    out += std::to_string(x);
                } else if constexpr (std::is_same_v<T, double>) {
                    num(x);
                } else if constexpr (std::is_same_v<T, std::string>) {
                    out += json(x).dump();
                } else {
                    out += '[';
                    for (size_t i = 0; i < x.size(); ++i) {
                        if (i) out += ';';
                        num(static_cast<double>(x[i]));
                    }
                    out += ']';
                }
            },
            v);
}

} // namespace

std::string result_hash(const Table& t, bool ordered) {
    std::vector<std::string> rows;
    for (const auto& b : t.batches()) {
        for (size_t r = 0; r < b.num_rows(); ++r) {
            std::string line;
            for (size_t c = 0; c < b.num_columns(); ++c) {
                if (c) line += ',';
                append_value(line, b.column(c).value(r));
            }
            rows.push_back(std::move(line));
        }
    }
    if (!ordered) std::sort(rows.begin(), rows.end());
    uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    mix(t.schema().to_string());
    for (const auto& row : rows) {
        mix(row);
        mix("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool plan_is_sorted(const Plan& plan) {
    return std::any_of(plan.nodes.begin(), plan.nodes.end(),
                       [](const PlanNode& n) { return std::holds_alternative<SortNode>(n); });
}

} // namespace tierq
