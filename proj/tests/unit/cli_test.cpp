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

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "support/testing.hpp"
#include "tierq/columnar.hpp"
#include "tierq/datagen.hpp"

namespace tierq {
namespace {

using json = nlohmann::json;

struct Outcome {
    int code;
    std::string out;
    std::string err;

    std::vector<json> records() const {
        std::vector<json> r;
        std::istringstream in(out);
        std::string line;
        while (std::getline(in, line)) r.push_back(json::parse(line));
        return r;
    }
};

class Cli : public ::testing::Test {
protected:
    Outcome run(std::vector<std::string> args) {
        args.insert(args.begin(), "tierq");
        // Storage commands get the temporary root.
        static const std::set<std::string> stored = {"mb", "put", "plan", "run", "bench"};
        if (args.size() > 1 && stored.count(args[1])) {
            args.push_back("--root");
            args.push_back((dir.path() / "store").string());
        }
        std::ostringstream out, err;
        int code = cli::run_cli(args, out, err);
        return {code, out.str(), err.str()};
    }

    std::string path(const std::string& name) const { return (dir.path() / name).string(); }

    std::vector<uint8_t> bytes_of(const std::string& p) const {
        std::ifstream in(p, std::ios::binary);
        return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
    }

    // Generates and stores `key` in bucket "b".
    void load(const std::string& dataset, const std::string& key, size_t rows, const std::string& sel) {
        if (!made_bucket) {
            ASSERT_EQ(run({"mb", "b"}).code, 0);
            made_bucket = true;
        }
        auto g = run({"gen", dataset, "--rows", std::to_string(rows), "--seed", "5", "--selectivity", sel, "--out",
                      path(key)});
        ASSERT_EQ(g.code, 0) << g.err;
        auto p = run({"put", "b", key, path(key) + ".csv", path(key) + ".schema"});
        ASSERT_EQ(p.code, 0) << p.err;
    }

    testing::TempDir dir;
    bool made_bucket = false;
};

TEST_F(Cli, PutPrintsSummary) {
    load("laghos-box", "l", 2000, "0.01");
    auto p = run({"put", "b", "again", path("l") + ".csv", path("l") + ".schema", "--stats-rate", "0.02"});
    ASSERT_EQ(p.code, 0) << p.err;
    auto rec = p.records();
    ASSERT_EQ(rec.size(), 1u);
    EXPECT_EQ(rec[0]["rows"], 2000);
    EXPECT_NE(p.err.find("2000 rows"), std::string::npos);
    EXPECT_EQ(p.err.find("warning"), std::string::npos);
}

TEST_F(Cli, StatsRateOutsideBandWarns) {
    load("laghos-box", "l", 1000, "0.01");
    auto p = run({"put", "b", "hi", path("l") + ".csv", path("l") + ".schema", "--stats-rate", "0.5"});
    EXPECT_EQ(p.code, 0);
    EXPECT_NE(p.err.find("warning"), std::string::npos);
    EXPECT_EQ(p.records()[0]["stats_rate"], 0.5);
    EXPECT_EQ(p.records()[0]["histograms"][0]["sampled_rows"], 500);
}

TEST_F(Cli, BadSchemaFile) {
    load("laghos-box", "l", 100, "0.01");
    std::ofstream(path("bad.schema")) << "x Float128\n";
    auto p = run({"put", "b", "bad", path("l") + ".csv", path("bad.schema")});
    EXPECT_EQ(p.code, 1);
    EXPECT_NE(p.err.find("SchemaMismatch"), std::string::npos);
    EXPECT_TRUE(p.out.empty());
}

TEST_F(Cli, PlanQ1AndQ4) {
    load("laghos-box", "l", 20000, "0.001");
    load("hep-dimuon", "h", 2000, "0.05");
    auto q1 = run({"plan", "-e", corpus_query("Q1").sql, "--ref", "b/l"});
    ASSERT_EQ(q1.code, 0) << q1.err;
    json r = q1.records().at(0);
    EXPECT_EQ(r["strategy"], "CAD");
    EXPECT_EQ(r["split_after"], 3);
    EXPECT_EQ(r["nodes"].size(), 5u);
    EXPECT_NE(r["fe_plan"].get<std::string>().find("soda.split_after"), std::string::npos);
    EXPECT_NE(q1.err.find("frontend plan"), std::string::npos);

    auto q4 = run({"plan", "-e", corpus_query("Q4").sql, "--ref", "b/h"});
    ASSERT_EQ(q4.code, 0) << q4.err;
    EXPECT_EQ(q4.records().at(0)["strategy"], "SAP");
}

TEST_F(Cli, UsageErrors) {
    load("laghos-box", "l", 100, "0.01");
    auto bad_sql = run({"plan", "-e", "SELEC x FROM t", "--ref", "b/l"});
    EXPECT_EQ(bad_sql.code, 2);
    EXPECT_FALSE(bad_sql.err.empty());
    EXPECT_EQ(run({"run", "-e", "SELECT x FROM t", "--ref", "b/l", "--mode", "turbo"}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"run", "-e", "SELECT x FROM t", "--ref", "b/missing"}).code, 1);
}

TEST_F(Cli, RunFormatsAgree) {
    load("deepwater-threshold", "d", 5000, "0.01");
    const std::string sql = corpus_query("Q2").sql;
    auto csv = run({"run", "-e", sql, "--ref", "b/d", "--format", "csv", "--out", path("r.csv")});
    ASSERT_EQ(csv.code, 0) << csv.err;
    auto col = run({"run", "-e", sql, "--ref", "b/d", "--format", "columnar", "--out", path("r.tcol")});
    ASSERT_EQ(col.code, 0) << col.err;
    auto js = run({"run", "-e", sql, "--ref", "b/d", "--format", "json", "--out", path("r.json"), "--mode", "cos"});
    ASSERT_EQ(js.code, 0) << js.err;

    Table from_col = deserialize_columnar(bytes_of(path("r.tcol")));
    auto csv_bytes = bytes_of(path("r.csv"));
    Table from_csv = ingest_csv_text(std::string(csv_bytes.begin(), csv_bytes.end()), from_col.schema());
    auto json_bytes = bytes_of(path("r.json"));
    Table from_json = decode_json_output(std::string(json_bytes.begin(), json_bytes.end()), from_col.schema());
    EXPECT_EQ(testing::compare_tables(from_csv, from_col, {true, 0.0}), "");
    EXPECT_EQ(testing::compare_tables(from_json, from_col, {true, 0.0}), "");

    json rec = csv.records().at(0);
    EXPECT_EQ(rec["mode"], "oasis");
    EXPECT_LT(rec["bytes_array_to_fe"].get<double>(), 0.1 * js.records().at(0)["bytes_array_to_fe"].get<double>());
    EXPECT_EQ(rec["result_hash"], js.records().at(0)["result_hash"]);
    EXPECT_NE(csv.err.find("oasis"), std::string::npos);
}

TEST_F(Cli, BenchEnumerateAndModes) {
    load("laghos-box", "l", 20000, "0.001");
    const std::string sql = corpus_query("Q1").sql;
    auto e = run({"bench", "-e", sql, "--ref", "b/l", "--enumerate-splits"});
    ASSERT_EQ(e.code, 0) << e.err;
    auto rows = e.records();
    ASSERT_EQ(rows.size(), 4u);
    int picks = 0;
    for (const auto& r : rows) {
        if (r["soda_pick"].get<bool>()) {
            ++picks;
            EXPECT_TRUE(r["min_bytes"].get<bool>());
            EXPECT_EQ(r["config"], "cfg4");
        }
    }
    EXPECT_EQ(picks, 1);
    EXPECT_NE(e.err.find("SODA"), std::string::npos);

    auto m = run({"bench", "-e", sql, "--ref", "b/l", "--modes", "all"});
    ASSERT_EQ(m.code, 0) << m.err;
    auto mrows = m.records();
    ASSERT_EQ(mrows.size(), 4u);
    for (const auto& r : mrows) EXPECT_EQ(r["result_hash"], mrows[0]["result_hash"]);
    EXPECT_EQ(run({"bench", "-e", sql, "--ref", "b/l"}).code, 2);
}

TEST_F(Cli, BenchEmptyObject) {
    ASSERT_EQ(run({"mb", "b"}).code, 0);
    made_bucket = true;
    std::ofstream(path("e.schema")) << schema_to_text(dataset_schema(Dataset::kLaghosBox));
    std::ofstream(path("e.csv")) << "vertex_id,x,y,z,e\n";
    ASSERT_EQ(run({"put", "b", "e", path("e.csv"), path("e.schema")}).code, 0);
    auto m = run({"bench", "-e", corpus_query("Q1").sql, "--ref", "b/e", "--modes", "all"});
    ASSERT_EQ(m.code, 0) << m.err;
    for (const auto& r : m.records()) {
        EXPECT_EQ(r["rows"], 0);
        EXPECT_EQ(r["result_hash"], m.records()[0]["result_hash"]);
    }
}

TEST_F(Cli, GenIsDeterministic) {
    ASSERT_EQ(run({"gen", "hep-dimuon", "--rows", "500", "--seed", "9", "--out", path("a")}).code, 0);
    ASSERT_EQ(run({"gen", "hep-dimuon", "--rows", "500", "--seed", "9", "--out", path("b")}).code, 0);
    EXPECT_EQ(bytes_of(path("a.csv")), bytes_of(path("b.csv")));
    EXPECT_EQ(bytes_of(path("a.schema")), bytes_of(path("b.schema")));
    auto text = bytes_of(path("a.csv"));
    auto schema_bytes = bytes_of(path("a.schema"));
    Schema s = parse_schema_text(std::string(schema_bytes.begin(), schema_bytes.end()));
    Table t = ingest_csv_text(std::string(text.begin(), text.end()), s);
    EXPECT_EQ(t.num_rows(), 500u);
    ColumnBatch all = t.combined();
    size_t n_muon = *s.index_of("nMuon");
    for (size_t r = 0; r < all.num_rows(); ++r) {
        int64_t n = std::get<int64_t>(all.column(n_muon).value(r));
        for (size_t c = 0; c < s.size(); ++c) {
            if (is_list(s.field(c).type)) EXPECT_EQ(static_cast<int64_t>(all.column(c).list_size(r)), n);
        }
    }
}

} // namespace
} // namespace tierq
