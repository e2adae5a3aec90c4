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

// A simulated two-tier deployment: one frontend (FE) and a set of array
// nodes holding object data, an object store on local disk, and query
// orchestration that meters every byte crossing a tier.
//
// Transfers are in-process. Time spent moving bytes and running operators
// is simulated from configured rates and reported next to wall-clock
// phase timings; nothing sleeps.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tierq/columnar.hpp"
#include "tierq/costmodel.hpp"
#include "tierq/decomposer.hpp"
#include "tierq/soda.hpp"

namespace tierq {

enum class Mode { kBaseline, kPred, kCos, kOasis };
std::string_view mode_name(Mode m);
std::optional<Mode> mode_from_name(std::string_view name);
inline constexpr Mode kAllModes[] = {Mode::kBaseline, Mode::kPred, Mode::kCos, Mode::kOasis};

struct ClusterConfig {
    size_t array_nodes = 1;
    // Bytes per second. 10 Gb/s each by default.
    double interconnect_bandwidth = 1.25e9;
    double client_bandwidth = 1.25e9;
    // SAP pushes the split deeper at run time while the measured
    // intermediate exceeds this many bytes.
    uint64_t transfer_budget = 64ull << 20;
    Mode mode = Mode::kOasis;
    // Simulated operator throughput per tier, in bytes of operator input
    // per second. A Sort costs sort_cost_factor times its input.
    double array_compute_rate = 1e9;
    double fe_compute_rate = 1e9;
    double client_compute_rate = 4e9;
    double sort_cost_factor = 4.0;
    double stats_rate = 0.01;
    size_t batch_rows = 65536;

    // Throws kInvalidArgument for a non-positive rate or bandwidth, zero
    // nodes, or a stats rate outside (0, 1].
    void validate() const;
};

// `key = value` lines; `#` starts a comment. Keys are the field names
// above; `mode` takes a mode name. Unknown keys are kInvalidArgument.
ClusterConfig parse_config(std::string_view text, ClusterConfig base = {});
ClusterConfig load_config(const std::filesystem::path& path, ClusterConfig base = {});
std::string config_to_text(const ClusterConfig& cfg);

struct ObjectRef {
    std::string bucket;
    std::string key;
};
// "bucket/key"; the key may itself contain '/'.
ObjectRef parse_object_ref(std::string_view text);

struct ShardMeta {
    size_t node = 0;
    uint64_t row_count = 0;
    uint64_t rowid_base = 0;
    uint64_t serialized_bytes = 0;
    // Exact min/max of each numeric scalar column over its non-null,
    // non-NaN values; absent when there are none.
    std::map<std::string, std::pair<double, double>> ranges;
};

struct ObjectMeta {
    std::string bucket;
    std::string key;
    uint64_t object_space_id = 0;
    uint64_t object_id = 0;
    Schema schema;
    uint64_t row_count = 0;
    uint64_t logical_bytes = 0;
    double stats_rate = 0.01;
    std::vector<ShardMeta> shards;
    // Histograms and widths; kept on the FE.
    TableStats stats;
};

struct BucketInfo {
    std::string name;
    uint64_t object_space_id = 0;
    // Designated array node; shard k lives on (node + k) % nodes.
    size_t node = 0;
    size_t nodes = 1;
    size_t shard_count = 1;
};

struct ShardData {
    Table table;
    uint64_t rowid_base = 0;
    size_t node = 0;
};

// Layout under the root:
//   MANIFEST                               bucket and object list
//   <bucket>/<space>/<object>.tcol         single-shard objects
//   <bucket>/<space>/<object>.<k>.tcol     shard k of a sharded object
//   _meta/<space>/<object>.json            schema, counts, shard ranges
//   _meta/<space>/<object>.thst            histograms
// Safe for concurrent readers; writers are exclusive.
class ObjectStore {
public:
    // Loads the manifest when one exists, otherwise starts empty.
    explicit ObjectStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return _root; }

    // Throws kDuplicateBucket. `nodes` is the array node count the bucket
    // is spread over; shards are placed round-robin from its designated node.
    BucketInfo create_bucket(const std::string& name, size_t shard_count = 1, size_t nodes = 1);
    bool has_bucket(const std::string& name) const;
    std::vector<BucketInfo> buckets() const;

    // Splits the table into the bucket's shard count of contiguous row
    // ranges, writes one TIERCOL file per shard and builds histograms for
    // every numeric scalar column at `stats_rate`. Throws kNoSuchBucket,
    // kDuplicateKey, kInvalidArgument for an empty schema or a bad key.
    ObjectMeta put_object(const std::string& bucket, const std::string& key, const Table& table,
                          double stats_rate = 0.01);

    // Throws kNoSuchBucket or kNoSuchObject.
    ObjectMeta object(const std::string& bucket, const std::string& key) const;
    std::vector<ObjectMeta> objects(const std::string& bucket) const;
    std::vector<ShardData> read_shards(const std::string& bucket, const std::string& key) const;
    Table get_object(const std::string& bucket, const std::string& key) const;

private:
    void save_manifest() const;
    void load_manifest();
    std::filesystem::path shard_path(const ObjectMeta& m, size_t k) const;
    std::filesystem::path meta_dir(uint64_t space) const;

    std::filesystem::path _root;
    mutable std::shared_mutex _mu;
    std::map<std::string, BucketInfo> _buckets;
    std::map<std::pair<std::string, std::string>, ObjectMeta> _objects;
};

struct PhaseTimings {
    double plan = 0;
    double optimize = 0;
    double array_exec = 0;
    double transfer = 0;
    double fe_exec = 0;
};

struct QueryReport {
    Mode mode = Mode::kOasis;
    Table result;
    uint64_t bytes_array_to_fe = 0;
    uint64_t bytes_fe_to_client = 0;
    double simulated_transfer_seconds = 0;
    double simulated_compute_seconds = 0;
    PhaseTimings wall; // seconds
    std::optional<SplitDecision> split;
    // Split SODA placed before any run-time extension.
    std::optional<size_t> planned_split_after;
    Plan plan;
    std::optional<DecomposedPlans> fragments;
    // pred mode: shards not transferred because their ranges rule them out.
    size_t shards_skipped = 0;

    double simulated_total_seconds() const { return simulated_transfer_seconds + simulated_compute_seconds; }
};

// Errors keep their code; the message is prefixed with the failing phase
// (plan, optimize, array, transfer, fe).
QueryReport run_query(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                      const ClusterConfig& cfg);

// oasis mode with the split forced to `split_after`.
QueryReport run_query_at_split(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                               const ClusterConfig& cfg, size_t split_after);

struct SplitRun {
    size_t split_after = 0;
    bool chosen = false;
    QueryReport report;
};

// Every feasible split executed end to end, in increasing split order;
// exactly one entry is marked as SODA's choice.
std::vector<SplitRun> bench_splits(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                                   const ClusterConfig& cfg);

// Plan and SODA decision for the object without executing anything.
struct PlanReport {
    Plan plan;
    TableStats stats;
    double read_bytes = 0;
    SizeEstimate estimates;
    SplitDecision split;
    DecomposedPlans fragments;
};
PlanReport plan_query(const ObjectStore& store, const std::string& sql, const ObjectRef& ref,
                      const ClusterConfig& cfg);

// Order-insensitive (unless `ordered`) digest of the result rows; doubles
// enter with 12 significant digits so summation order does not matter.
std::string result_hash(const Table& t, bool ordered);

// True when the plan's output order is defined by a Sort.
bool plan_is_sorted(const Plan& plan);

} // namespace tierq
