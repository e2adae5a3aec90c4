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

#include <algorithm>
#include <random>

#include "support/plangen.hpp"
#include "support/testing.hpp"
#include "tierq/datagen.hpp"
#include "tierq/decomposer.hpp"
#include "tierq/error.hpp"
#include "tierq/executor.hpp"
#include "tierq/sql.hpp"

namespace tierq {
namespace {

using testing::compare_tables;

// Spelled out independently of the generator: a..z, then aa..az, ba...
std::vector<std::string> expected_names(size_t n) {
    std::vector<std::string> out;
    const std::string abc = "abcdefghijklmnopqrstuvwxyz";
    for (char c : abc) out.push_back(std::string("t_") + c);
    for (char c1 : abc) {
        for (char c2 : abc) out.push_back(std::string("t_") + c1 + c2);
    }
    out.resize(n);
    return out;
}

Schema float_schema(size_t n, const std::string& prefix = "c") {
    std::vector<Field> f;
    for (size_t i = 0; i < n; ++i) f.push_back({prefix + std::to_string(i), TypeKind::kFloat64, true});
    return Schema(f);
}

std::vector<std::string> targets(const NameMapping& m) {
    std::vector<std::string> out;
    for (const auto& [from, to] : m) out.push_back(to);
    return out;
}

SplitDecision at(const Plan& plan, size_t s, size_t nodes = 1) { return move_split(plan, SplitDecision{}, s, {nodes}); }

// Contiguous row chunks, each with the rowid of its first row.
std::vector<std::pair<Table, uint64_t>> shard(const Table& t, size_t parts) {
    ColumnBatch all = t.combined();
    std::vector<std::pair<Table, uint64_t>> out;
    size_t n = all.num_rows();
    size_t begin = 0;
    for (size_t i = 0; i < parts; ++i) {
        size_t count = n / parts + (i < n % parts ? 1 : 0);
        out.emplace_back(Table(t.schema(), {all.slice(begin, count)}).rebatched(97), begin);
        begin += count;
    }
    return out;
}

Table run_whole(const Plan& plan, const Table& t) {
    ExecContext ctx;
    ctx.add_table(plan.read().table_ref, t);
    return execute(plan, ctx);
}

Table run_split(const Plan& plan, const DecomposedPlans& d, const Table& t, size_t parts) {
    std::vector<Table> pieces;
    for (auto& [piece, base] : shard(t, parts)) {
        ExecContext ctx;
        ctx.add_table(plan.read().table_ref, piece, base);
        pieces.push_back(execute(d.array_plan, ctx));
    }
    ExecContext fe;
    fe.add_table("intermediate", Table::concat(d.intermediate_schema, pieces));
    return execute(d.fe_plan, fe);
}

bool sorted_output(const Plan& p) {
    return std::any_of(p.nodes.begin(), p.nodes.end(), [](const PlanNode& n) { return std::holds_alternative<SortNode>(n); });
}

TEST(TempNames, Sequence) {
    EXPECT_EQ(targets(generate_temp_names(float_schema(3))), expected_names(3));
    EXPECT_EQ(targets(generate_temp_names(float_schema(27))), expected_names(27));
    EXPECT_EQ(targets(generate_temp_names(float_schema(27))).back(), "t_aa");
    EXPECT_EQ(targets(generate_temp_names(float_schema(60))), expected_names(60));
}

TEST(TempNames, SkipsTakenNames) {
    Schema s({Field{"t_a", TypeKind::kInt64, true}, Field{"v", TypeKind::kFloat64, true}});
    NameMapping m = generate_temp_names(s);
    EXPECT_EQ(m, (NameMapping{{"t_a", "t_b"}, {"v", "t_c"}}));
    EXPECT_EQ(targets(generate_temp_names(float_schema(2), {"t_b"})), (std::vector<std::string>{"t_a", "t_c"}));
}

TEST(Decompose, Q1AfterProject) {
    Table t = generate_dataset(Dataset::kLaghosBox, {2000, 3, 0.05, 4096});
    Plan p = parse_sql(corpus_query("Q1").sql, t.schema());
    ASSERT_EQ(p.size(), 5u);
    DecomposedPlans d = decompose(p, at(p, 3));
    EXPECT_EQ(d.array_plan.size(), 4u);
    ASSERT_EQ(d.fe_plan.size(), 2u);
    EXPECT_TRUE(std::holds_alternative<ReadNode>(d.fe_plan.nodes[0]));
    EXPECT_TRUE(std::holds_alternative<SortNode>(d.fe_plan.nodes[1]));
    EXPECT_EQ(d.intermediate_schema.names(), expected_names(5));
    std::vector<TypeKind> types;
    for (const auto& f : d.intermediate_schema.fields()) types.push_back(f.type);
    EXPECT_EQ(types, (std::vector<TypeKind>{TypeKind::kInt64, TypeKind::kFloat64, TypeKind::kFloat64,
                                            TypeKind::kFloat64, TypeKind::kFloat64}));
    EXPECT_EQ(output_schema(d.fe_plan), output_schema(p));
    EXPECT_EQ(d.fe_plan.annotation("fragment"), std::optional<std::string>("frontend"));
    EXPECT_EQ(d.array_plan.annotation("fragment"), std::optional<std::string>("array"));
    EXPECT_EQ(d.fe_plan.annotation("soda.split_after"), std::optional<std::string>("3"));
    EXPECT_EQ(compare_tables(run_split(p, d, t, 1), run_whole(p, t), {true, 0.0}), "");
}

TEST(Decompose, SplitZeroShipsRows) {
    Table t = generate_dataset(Dataset::kLaghosBox, {500, 3, 0.05, 4096});
    Plan p = parse_sql(corpus_query("Q1").sql, t.schema());
    DecomposedPlans d = decompose(p, at(p, 0));
    EXPECT_EQ(d.array_plan.size(), 1u);
    EXPECT_EQ(d.fe_plan.size(), 5u);
    EXPECT_EQ(d.intermediate_schema.size(), t.schema().size());
}

TEST(Decompose, PartialAggregateMergesFirst) {
    Table t = generate_dataset(Dataset::kLaghosBox, {3000, 3, 0.05, 4096});
    Plan p = parse_sql(corpus_query("Q1").sql, t.schema());
    DecomposedPlans d = decompose(p, at(p, 2, 4));
    ASSERT_EQ(d.fe_plan.size(), 4u);
    const auto* merge = std::get_if<AggregateNode>(&d.fe_plan.nodes[1]);
    ASSERT_NE(merge, nullptr);
    EXPECT_EQ(merge->phase, AggPhase::kFinal);
    EXPECT_EQ(std::get<AggregateNode>(d.array_plan.nodes[2]).phase, AggPhase::kPartial);
    // avg ships as sum and count.
    EXPECT_EQ(d.intermediate_schema.size(), 7u); // key, four mins, sum and count
    EXPECT_EQ(compare_tables(run_split(p, d, t, 4), run_whole(p, t), {true, 1e-12}), "");
}

TEST(Decompose, InvalidSplits) {
    Table t = generate_dataset(Dataset::kLaghosBox, {100, 3, 0.05, 4096});
    Plan p = parse_sql(corpus_query("Q1").sql, t.schema());
    SplitDecision past{};
    past.split_after = 5;
    EXPECT_THROW(decompose(p, past), Error);
    try {
        decompose(p, past);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kInvalidSplit);
    }
    SplitDecision bad = at(p, 1);
    bad.partial_agg = true;
    bad.split_after = 3;
    try {
        decompose(p, bad);
        ADD_FAILURE() << "no error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kInvalidSplit);
    }
}

TEST(Decompose, DeterministicText) {
    Table t = generate_dataset(Dataset::kHepDimuon, {200, 3, 0.05, 4096});
    Plan p = parse_sql(corpus_query("Q4").sql, t.schema());
    DecomposedPlans a = decompose(p, at(p, 2));
    DecomposedPlans b = decompose(parse_sql(corpus_query("Q4").sql, t.schema()), at(p, 2));
    EXPECT_EQ(plan_to_text(a.array_plan), plan_to_text(b.array_plan));
    EXPECT_EQ(plan_to_text(a.fe_plan), plan_to_text(b.fe_plan));
    EXPECT_EQ(text_to_plan(plan_to_text(a.fe_plan)), a.fe_plan);
    EXPECT_EQ(text_to_plan(plan_to_text(a.array_plan)), a.array_plan);
}

TEST(Decompose, SapFrontendHasNoElementAccess) {
    Table t = generate_dataset(Dataset::kHepDimuon, {2000, 3, 0.05, 4096});
    for (const std::string sql : {corpus_query("Q4").sql,
                                  std::string("SELECT MET_pt FROM t WHERE Muon_pt[1] > 10 ORDER BY MET_pt")}) {
        Plan p = parse_sql(sql, t.schema());
        TableStats st = compute_table_stats(t);
        SplitDecision s = decide_split(p, estimated_read_bytes(p, st), st);
        ASSERT_EQ(s.strategy, Strategy::kSap);
        DecomposedPlans d = decompose(p, s);
        EXPECT_FALSE(contains_array_access(d.fe_plan)) << sql;
        EXPECT_NO_THROW(validate_or_throw(d.fe_plan));
        EXPECT_NO_THROW(validate_or_throw(d.array_plan));
    }
}

TEST(Recompose, CorpusEverySplit) {
    int checked = 0;
    for (const auto& q : corpus_queries()) {
        Table t = generate_dataset(q.dataset, {3000, 11, 0.05, 4096});
        Plan p = parse_sql(q.sql, t.schema());
        Table whole = run_whole(p, t);
        for (size_t nodes : {1u, 2u, 4u}) {
            for (size_t s : feasible_splits(p, {nodes})) {
                SplitDecision dec = at(p, s, nodes);
                DecomposedPlans d = decompose(p, dec);
                validate_or_throw(d.array_plan);
                validate_or_throw(d.fe_plan);
                double tol = dec.partial_agg ? 1e-9 : 0.0;
                EXPECT_EQ(compare_tables(run_split(p, d, t, nodes), whole, {sorted_output(p), tol}), "")
                        << q.name << " nodes " << nodes << " split " << s;
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 30);
}

TEST(Recompose, RandomPlans) {
    std::mt19937_64 rng(77);
    Table t = testing::mixed_table(rng, 1500, 256);
    int checked = 0;
    for (int i = 0; i < 150; ++i) {
        Plan p = testing::random_plan(rng);
        Table whole = run_whole(p, t);
        for (size_t nodes : {1u, 3u}) {
            for (size_t s : feasible_splits(p, {nodes})) {
                SplitDecision dec = at(p, s, nodes);
                DecomposedPlans d = decompose(p, dec);
                EXPECT_EQ(compare_tables(run_split(p, d, t, nodes), whole, {sorted_output(p), 1e-9}), "")
                        << plan_to_text(p) << "split " << s << " nodes " << nodes;
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 300);
}

} // namespace
} // namespace tierq
