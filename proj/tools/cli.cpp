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

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tierq/cluster.hpp"
#include "tierq/datagen.hpp"
#include "tierq/error.hpp"
#include "tierq/stats.hpp"

namespace tierq::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Common {
    std::string root;
    std::string config;
    size_t nodes = 0; // 0: from config
};

struct QueryArgs {
    std::string sql_file;
    std::string sql_text;
    std::string ref;
    std::string mode;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path store_root(const Common& c) {
    if (!c.root.empty()) return c.root;
    if (const char* env = std::getenv("TIERQ_ROOT"); env && *env) return env;
    return "tierq-data";
}

ClusterConfig cluster_config(const Common& c, const std::string& mode) {
    ClusterConfig cfg;
    std::string path = c.config;
    if (path.empty()) {
        if (const char* env = std::getenv("TIERQ_CONFIG"); env && *env) path = env;
    }
    if (!path.empty()) cfg = load_config(path);
    if (c.nodes) cfg.array_nodes = c.nodes;
    if (!mode.empty()) cfg.mode = *mode_from_name(mode);
    cfg.validate();
    return cfg;
}

std::string query_sql(const QueryArgs& q) {
    if (!q.sql_text.empty()) return q.sql_text;
    if (q.sql_file.empty()) throw Error(ErrorCode::kInvalidArgument, "give a SQL file or -e TEXT");
    return read_text(q.sql_file);
}

// Parse and validation problems are the caller's to fix.
int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::kGrammarError:
    case ErrorCode::kUnknownFunction:
    case ErrorCode::kSyntaxError:
    case ErrorCode::kUnsupportedFeature:
    case ErrorCode::kValidation:
    case ErrorCode::kInvalidArgument: return kExitUsage;
    default: return kExitRuntime;
    }
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream o;
    o << std::setprecision(prec) << v;
    return o.str();
}

std::string opt_bytes(const std::optional<double>& b) { return b ? fmt(*b) : "?"; }

json split_json(const SplitDecision& d) {
    return {{"strategy", std::string(strategy_name(d.strategy))},
            {"split_after", d.split_after},
            {"max_split_after", d.max_split_after},
            {"partial_agg", d.partial_agg},
            {"lazy", d.lazy},
            {"boundary", d.boundary_index ? json(*d.boundary_index) : json(nullptr)}};
}

json report_json(const QueryReport& r) {
    json j = {{"mode", std::string(mode_name(r.mode))},
              {"rows", r.result.num_rows()},
              {"bytes_array_to_fe", r.bytes_array_to_fe},
              {"bytes_fe_to_client", r.bytes_fe_to_client},
              {"simulated_transfer_seconds", r.simulated_transfer_seconds},
              {"simulated_compute_seconds", r.simulated_compute_seconds},
              {"simulated_total_seconds", r.simulated_total_seconds()},
              {"wall_seconds",
               {{"plan", r.wall.plan},
                {"optimize", r.wall.optimize},
                {"array_exec", r.wall.array_exec},
                {"transfer", r.wall.transfer},
                {"fe_exec", r.wall.fe_exec}}},
              {"shards_skipped", r.shards_skipped},
              {"result_hash", result_hash(r.result, plan_is_sorted(r.plan))}};
    if (r.split) {
        j["split"] = split_json(*r.split);
        j["planned_split_after"] = *r.planned_split_after;
    }
    return j;
}

void human_report(const QueryReport& r, std::ostream& err) {
    err << mode_name(r.mode) << ": " << r.result.num_rows() << " rows; array->fe " << r.bytes_array_to_fe
        << " B, fe->client " << r.bytes_fe_to_client << " B; simulated transfer " << fmt(r.simulated_transfer_seconds)
        << " s, compute " << fmt(r.simulated_compute_seconds) << " s";
    if (r.split) {
        err << "; " << strategy_name(r.split->strategy) << " split after node " << r.split->split_after;
        if (r.planned_split_after != r.split->split_after) err << " (planned " << *r.planned_split_after << ")";
    }
    if (r.mode == Mode::kPred) err << "; " << r.shards_skipped << " shard(s) skipped";
    err << "\n";
}

void write_output(const Table& t, OutputFormat f, const std::string& path) {
    auto bytes = emit_output(t, f);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

// ---- commands --------------------------------------------------------------

int cmd_mb(const Common& c, const std::string& bucket, size_t shards, std::ostream& out, std::ostream& err) {
    ClusterConfig cfg = cluster_config(c, "");
    ObjectStore store(store_root(c));
    BucketInfo b = store.create_bucket(bucket, shards, cfg.array_nodes);
    out << json{{"bucket", b.name},
                {"object_space_id", b.object_space_id},
                {"node", b.node},
                {"nodes", b.nodes},
                {"shards", b.shard_count}}
                    .dump()
        << "\n";
    err << "created bucket " << b.name << " (space " << b.object_space_id << ", " << b.shard_count
        << " shard(s) over " << b.nodes << " node(s))\n";
    return kExitOk;
}

int cmd_put(const Common& c, const std::string& bucket, const std::string& key, const std::string& csv,
            const std::string& schema_path, double rate, std::ostream& out, std::ostream& err) {
    if (rate < kMinRecommendedRate || rate > kMaxRecommendedRate) {
        err << "warning: stats rate " << rate << " is outside the recommended 0.5-5% band; using it anyway\n";
    }
    Schema schema = parse_schema_text(read_text(schema_path));
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + csv);
    Table t = ingest_csv(in, schema);
    ObjectStore store(store_root(c));
    ObjectMeta m = store.put_object(bucket, key, t, rate);
    json hs = json::array();
    for (const auto& [name, h] : m.stats.histograms) {
        hs.push_back({{"column", name},
                      {"bins", h.bins},
                      {"sampled_rows", h.sampled_rows},
                      {"null_fraction", h.null_fraction},
                      {"distinct_estimate", h.distinct_estimate}});
    }
    out << json{{"bucket", m.bucket},
                {"key", m.key},
                {"object_id", m.object_id},
                {"rows", m.row_count},
                {"logical_bytes", m.logical_bytes},
                {"shards", m.shards.size()},
                {"stats_rate", rate},
                {"histograms", hs}}
                    .dump()
        << "\n";
    err << "put " << m.bucket << "/" << m.key << ": " << m.row_count << " rows, " << m.logical_bytes
        << " logical bytes, " << m.shards.size() << " shard(s), " << hs.size() << " histogram(s)";
    if (!m.stats.histograms.empty()) {
        err << " of " << m.stats.histograms.begin()->second.sampled_rows << " sampled rows";
    }
    err << "\n";
    return kExitOk;
}

int cmd_plan(const Common& c, const QueryArgs& q, std::ostream& out, std::ostream& err) {
    ClusterConfig cfg = cluster_config(c, q.mode);
    ObjectStore store(store_root(c));
    PlanReport p = plan_query(store, query_sql(q), parse_object_ref(q.ref), cfg);
    json nodes = json::array();
    err << plan_to_text(p.plan) << "\n";
    err << std::left << std::setw(6) << "node" << std::setw(11) << "kind" << std::setw(14) << "coefficient"
        << std::setw(14) << "source" << std::setw(14) << "in bytes" << "out bytes\n";
    for (size_t i = 0; i < p.plan.nodes.size(); ++i) {
        const NodeEstimate& e = p.estimates.nodes[i];
        std::string coef = e.coefficient.known() ? fmt(e.coefficient.value) : "?";
        nodes.push_back({{"index", i},
                         {"kind", std::string(node_kind(p.plan.nodes[i]))},
                         {"coefficient", e.coefficient.known() ? json(e.coefficient.value) : json(nullptr)},
                         {"source", std::string(coef_source_name(e.coefficient.source))},
                         {"input_bytes", e.input_bytes ? json(*e.input_bytes) : json(nullptr)},
                         {"output_bytes", e.output_bytes ? json(*e.output_bytes) : json(nullptr)}});
        err << std::setw(6) << i << std::setw(11) << node_kind(p.plan.nodes[i]) << std::setw(14) << coef
            << std::setw(14) << coef_source_name(e.coefficient.source) << std::setw(14) << opt_bytes(e.input_bytes)
            << opt_bytes(e.output_bytes) << "\n";
    }
    err << "strategy " << strategy_name(p.split.strategy) << ", split after node " << p.split.split_after
        << " (deepest feasible " << p.split.max_split_after << ")\n";
    err << "-- array plan\n" << plan_to_text(p.fragments.array_plan) << "\n";
    err << "-- frontend plan\n" << plan_to_text(p.fragments.fe_plan) << "\n";
    json j = split_json(p.split);
    j["read_bytes"] = p.read_bytes;
    j["nodes"] = nodes;
    j["plan"] = plan_to_text(p.plan);
    j["array_plan"] = plan_to_text(p.fragments.array_plan);
    j["fe_plan"] = plan_to_text(p.fragments.fe_plan);
    out << j.dump() << "\n";
    return kExitOk;
}

int cmd_run(const Common& c, const QueryArgs& q, const std::string& format, const std::string& out_path,
            std::ostream& out, std::ostream& err) {
    ClusterConfig cfg = cluster_config(c, q.mode);
    ObjectStore store(store_root(c));
    QueryReport r = run_query(store, query_sql(q), parse_object_ref(q.ref), cfg);
    if (!out_path.empty()) write_output(r.result, *format_from_name(format), out_path);
    json j = report_json(r);
    j["format"] = format;
    j["out"] = out_path.empty() ? json(nullptr) : json(out_path);
    out << j.dump() << "\n";
    human_report(r, err);
    return kExitOk;
}

int cmd_bench(const Common& c, const QueryArgs& q, bool enumerate, const std::string& modes, std::ostream& out,
              std::ostream& err) {
    ClusterConfig cfg = cluster_config(c, q.mode);
    ObjectStore store(store_root(c));
    std::string sql = query_sql(q);
    ObjectRef ref = parse_object_ref(q.ref);
    if (enumerate) {
        auto runs = bench_splits(store, sql, ref, cfg);
        uint64_t min_bytes = UINT64_MAX;
        for (const auto& r : runs) min_bytes = std::min(min_bytes, r.report.bytes_array_to_fe);
        err << std::left << std::setw(8) << "config" << std::setw(8) << "split" << std::setw(16) << "array->fe B"
            << std::setw(16) << "fe->client B" << std::setw(14) << "sim total s" << std::setw(12) << "wall s"
            << "pick\n";
        for (const auto& r : runs) {
            const QueryReport& qr = r.report;
            double wall = qr.wall.plan + qr.wall.optimize + qr.wall.array_exec + qr.wall.transfer + qr.wall.fe_exec;
            json j = report_json(qr);
            j["config"] = "cfg" + std::to_string(r.split_after + 1);
            j["split_after"] = r.split_after;
            j["soda_pick"] = r.chosen;
            j["min_bytes"] = qr.bytes_array_to_fe == min_bytes;
            out << j.dump() << "\n";
            err << std::setw(8) << ("cfg" + std::to_string(r.split_after + 1)) << std::setw(8) << r.split_after
                << std::setw(16) << qr.bytes_array_to_fe << std::setw(16) << qr.bytes_fe_to_client << std::setw(14)
                << fmt(qr.simulated_total_seconds()) << std::setw(12) << fmt(wall, 4) << (r.chosen ? "SODA" : "")
                << "\n";
        }
        return kExitOk;
    }
    if (modes != "all") throw Error(ErrorCode::kInvalidArgument, "give --enumerate-splits or --modes all");
    err << std::left << std::setw(10) << "mode" << std::setw(10) << "rows" << std::setw(16) << "array->fe B"
        << std::setw(16) << "fe->client B" << std::setw(14) << "sim total s" << "result hash\n";
    for (Mode m : kAllModes) {
        ClusterConfig mc = cfg;
        mc.mode = m;
        QueryReport r = run_query(store, sql, ref, mc);
        json j = report_json(r);
        out << j.dump() << "\n";
        err << std::setw(10) << mode_name(m) << std::setw(10) << r.result.num_rows() << std::setw(16)
            << r.bytes_array_to_fe << std::setw(16) << r.bytes_fe_to_client << std::setw(14)
            << fmt(r.simulated_total_seconds()) << j["result_hash"].get<std::string>() << "\n";
    }
    return kExitOk;
}

int cmd_gen(const std::string& dataset, size_t rows, uint64_t seed, std::optional<double> sel,
            const std::string& prefix, std::ostream& out, std::ostream& err) {
    Dataset d = *dataset_from_name(dataset);
    Table t = generate_dataset(d, {rows, seed, sel, 65536});
    std::string csv_path = prefix + ".csv";
    std::string schema_path = prefix + ".schema";
    write_output(t, OutputFormat::kCsv, csv_path);
    {
        std::ofstream s(schema_path, std::ios::trunc);
        s << schema_to_text(t.schema());
        if (!s) throw Error(ErrorCode::kIoError, "cannot write " + schema_path);
    }
    double used = sel ? *sel : default_selectivity(d);
    out << json{{"dataset", dataset}, {"rows", rows},         {"seed", seed},
                {"selectivity", used}, {"csv", csv_path}, {"schema", schema_path}}
                    .dump()
        << "\n";
    err << "wrote " << rows << " " << dataset << " rows to " << csv_path << " (schema " << schema_path << ")\n";
    return kExitOk;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--root", c.root, "Storage root (default $TIERQ_ROOT, else ./tierq-data)");
    cmd->add_option("--config", c.config, "key=value cluster config (default $TIERQ_CONFIG)");
    cmd->add_option("--nodes", c.nodes, "Array node count")->check(CLI::PositiveNumber);
}

void add_query(CLI::App* cmd, QueryArgs& q) {
    cmd->add_option("sql", q.sql_file, "File holding the SQL query");
    cmd->add_option("-e,--execute", q.sql_text, "SQL text instead of a file");
    cmd->add_option("--ref", q.ref, "Object as bucket/key")->required();
    std::vector<std::string> names;
    for (Mode m : kAllModes) names.emplace_back(mode_name(m));
    cmd->add_option("--mode", q.mode, "baseline, pred, cos or oasis")->check(CLI::IsMember(names));
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tierq: two-tier query offloading simulator", "tierq"};
    app.require_subcommand(1);
    Common common;

    std::string bucket, key, csv, schema;
    size_t shards = 1;
    auto* mb = app.add_subcommand("mb", "Create a bucket");
    add_common(mb, common);
    mb->add_option("bucket", bucket, "Bucket name")->required();
    mb->add_option("--shards", shards, "Shards per object")->check(CLI::PositiveNumber);

    double rate = 0.01;
    auto* put = app.add_subcommand("put", "Store a CSV file as an object");
    add_common(put, common);
    put->add_option("bucket", bucket)->required();
    put->add_option("key", key)->required();
    put->add_option("csv", csv)->required();
    put->add_option("schema", schema)->required();
    put->add_option("--stats-rate", rate, "Histogram sampling rate")->check(CLI::Range(1e-9, 1.0));

    QueryArgs q;
    auto* plan = app.add_subcommand("plan", "Show the plan, estimates and split without running");
    add_common(plan, common);
    add_query(plan, q);

    std::string format = "csv", out_path;
    auto* run = app.add_subcommand("run", "Run a query");
    add_common(run, common);
    add_query(run, q);
    run->add_option("--format", format, "columnar, csv or json")->check(CLI::IsMember({"columnar", "csv", "json"}));
    run->add_option("--out", out_path, "Result file");

    bool enumerate = false;
    std::string modes;
    auto* bench = app.add_subcommand("bench", "Compare split points or modes");
    add_common(bench, common);
    add_query(bench, q);
    auto* en = bench->add_flag("--enumerate-splits", enumerate, "Run every feasible split");
    bench->add_option("--modes", modes, "'all' to run every mode")->check(CLI::IsMember({"all"}))->excludes(en);

    std::string dataset, prefix;
    size_t rows = 100000;
    uint64_t seed = 1;
    double sel = 0;
    auto* gen = app.add_subcommand("gen", "Write a synthetic dataset as CSV plus schema");
    gen->add_option("dataset", dataset)->required()->check(
            CLI::IsMember({"laghos-box", "deepwater-threshold", "hep-dimuon"}));
    gen->add_option("--rows", rows);
    gen->add_option("--seed", seed);
    auto* sel_opt = gen->add_option("--selectivity", sel)->check(CLI::Range(0.0, 1.0));
    gen->add_option("--out", prefix, "Output prefix; writes PREFIX.csv and PREFIX.schema")->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back(); // program name
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, err, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*mb) return cmd_mb(common, bucket, shards, out, err);
        if (*put) {
            try {
                return cmd_put(common, bucket, key, csv, schema, rate, out, err);
            } catch (const Error& e) {
                err << "error: " << e.what() << "\n";
                return kExitRuntime;
            }
        }
        if (*plan) return cmd_plan(common, q, out, err);
        if (*run) return cmd_run(common, q, format, out_path, out, err);
        if (*bench) {
            if (!enumerate && modes.empty()) {
                err << "bench: give --enumerate-splits or --modes all\n";
                return kExitUsage;
            }
            return cmd_bench(common, q, enumerate, modes, out, err);
        }
        if (*gen) {
            std::optional<double> s;
            if (sel_opt->count()) s = sel;
            return cmd_gen(dataset, rows, seed, s, prefix, out, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace tierq::cli
