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

#include <random>

#include "tierq/costmodel.hpp"
#include "tierq/datagen.hpp"
#include "tierq/error.hpp"
#include "tierq/sql.hpp"

namespace tierq {
namespace {

Table uniform_floats(size_t cols, size_t rows, uint64_t seed, double lo = 0, double hi = 4) {
    std::vector<Field> fields;
    for (size_t c = 0; c < cols; ++c) fields.push_back(Field{"c" + std::to_string(c), TypeKind::kFloat64, false});
    Schema s(fields);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<Column> columns;
    for (size_t c = 0; c < cols; ++c) {
        ColumnBuilder b(TypeKind::kFloat64);
        for (size_t r = 0; r < rows; ++r) b.append_double(d(rng));
        columns.push_back(b.finish());
    }
    return Table(s, {ColumnBatch(s, std::move(columns))}).rebatched(8192);
}

Plan over(const Table& t, std::vector<PlanNode> rest) {
    Plan p;
    p.nodes.push_back(ReadNode{"t", t.schema(), false, {}});
    for (auto& n : rest) p.nodes.push_back(std::move(n));
    return p;
}

TEST(Coefficient, SortIsOne) {
    Table t = uniform_floats(2, 1000, 1);
    TableStats st = compute_table_stats(t);
    Coefficient c = estimate_coefficient(SortNode{{SortKey{ex::col("c0"), false}}}, t.schema(), st);
    EXPECT_EQ(c.value, 1.0);
    EXPECT_EQ(c.source, CoefSource::kFixed);
}

TEST(Coefficient, ProjectTwoOfEight) {
    Table t = uniform_floats(8, 5000, 2);
    TableStats st = compute_table_stats(t);
    Coefficient c = estimate_coefficient(
            ProjectNode{{ProjectItem{ex::col("c1"), "a"}, ProjectItem{ex::col("c6"), "b"}}}, t.schema(), st);
    EXPECT_EQ(c.source, CoefSource::kWidthRatio);
    EXPECT_NEAR(c.value, 0.25, 1e-9);
}

TEST(Coefficient, RangeFilterNearExactFraction) {
    Table t = uniform_floats(1, 200000, 3);
    TableStats st = compute_table_stats(t);
    Expr pred = ex::and_({ex::cmp(CmpOp::kGt, ex::col("c0"), ex::lit(1.5)),
                          ex::cmp(CmpOp::kLt, ex::col("c0"), ex::lit(1.6))});
    Coefficient c = estimate_coefficient(FilterNode{pred}, t.schema(), st);
    ASSERT_TRUE(c.known());
    size_t hits = 0;
    for (const auto& b : t.batches()) {
        for (double v : b.column(0).f64) hits += (v > 1.5 && v < 1.6) ? 1 : 0;
    }
    double exact = static_cast<double>(hits) / static_cast<double>(t.num_rows());
    EXPECT_NEAR(c.value, exact, 2.0 / 64);
    EXPECT_NEAR(c.value, 0.025, 2.0 / 64);
}

TEST(Coefficient, ReversedOperandsAndBetween) {
    Table t = uniform_floats(1, 50000, 4);
    TableStats st = compute_table_stats(t);
    auto coef = [&](Expr e) { return estimate_coefficient(FilterNode{std::move(e)}, t.schema(), st); };
    Coefficient a = coef(ex::cmp(CmpOp::kGt, ex::lit(1.0), ex::col("c0")));
    Coefficient b = coef(ex::cmp(CmpOp::kLt, ex::col("c0"), ex::lit(1.0)));
    EXPECT_DOUBLE_EQ(a.value, b.value);
    Coefficient btw = coef(ex::between(ex::col("c0"), ex::lit(1.0), ex::lit(3.0)));
    EXPECT_NEAR(btw.value, 0.5, 2.0 / 64);
    EXPECT_FALSE(coef(ex::cmp(CmpOp::kNe, ex::col("c0"), ex::lit(1.0))).known());
    EXPECT_FALSE(coef(ex::or_({ex::cmp(CmpOp::kLt, ex::col("c0"), ex::lit(1.0)),
                               ex::cmp(CmpOp::kGt, ex::col("c0"), ex::lit(3.0))}))
                         .known());
}

TEST(Coefficient, OtherOperatorsAreUnclassifiable) {
    Table t = uniform_floats(1, 10, 5);
    TableStats st = compute_table_stats(t);
    for (auto k : {OtherRelKind::kExpand, OtherRelKind::kJoin, OtherRelKind::kSet}) {
        try {
            estimate_coefficient(OtherNode{k}, t.schema(), st);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::kUnclassifiableOperator);
        }
    }
}

TEST(Coefficient, GroupKeyWithoutHistogramIsUnknown) {
    Schema s({Field{"name", TypeKind::kUtf8, false}, Field{"v", TypeKind::kFloat64, false}});
    ColumnBuilder n(TypeKind::kUtf8), v(TypeKind::kFloat64);
    for (int i = 0; i < 100; ++i) {
        n.append_string(i % 2 ? "a" : "b");
        v.append_double(i);
    }
    Table t(s, {ColumnBatch(s, {n.finish(), v.finish()})});
    TableStats st = compute_table_stats(t);
    AggregateNode by_name{{"name"}, {Measure{AggFn::kSum, {ex::col("v")}, "s"}}, AggPhase::kFull};
    EXPECT_FALSE(estimate_coefficient(by_name, s, st).known());
    AggregateNode global{{}, {Measure{AggFn::kSum, {ex::col("v")}, "s"}}, AggPhase::kFull};
    Coefficient c = estimate_coefficient(global, s, st);
    EXPECT_TRUE(c.known());
    EXPECT_LT(c.value, 0.05);
}

// 1000 MB read, a 1% filter, then a projection keeping half the width.
TEST(Propagation, ChainArithmetic) {
    const uint64_t rows = 1000000;
    TableStats st;
    st.row_count = rows;
    st.logical_bytes = 1000000000;
    st.histograms.emplace("k", sequence_histogram("k", rows, 64));
    st.column_width = {{"k", 500.0}, {"w", 500.0}};
    Schema s({Field{"k", TypeKind::kInt64, false}, Field{"w", TypeKind::kInt64, false}});
    Plan p;
    p.nodes.push_back(ReadNode{"t", s, false, {}});
    p.nodes.push_back(FilterNode{ex::cmp(CmpOp::kLt, ex::col("k"), ex::lit(int64_t{10000}))});
    p.nodes.push_back(ProjectNode{{ProjectItem{ex::col("w"), "w"}}});
    SizeEstimate e = propagate_sizes(p, 1000e6, st);
    ASSERT_EQ(e.nodes.size(), 3u);
    EXPECT_DOUBLE_EQ(*e.nodes[0].output_bytes, 1000e6);
    EXPECT_NEAR(*e.nodes[1].output_bytes, 10e6, 10e6 * 1e-3);
    EXPECT_NEAR(*e.nodes[2].output_bytes, 5e6, 5e6 * 1e-3);
    EXPECT_NEAR(*e.nodes[2].output_rows, 10000, 10);
    EXPECT_FALSE(e.first_unknown());
}

TEST(Propagation, BareReadIsReadBytes) {
    Table t = uniform_floats(3, 1000, 6);
    TableStats st = compute_table_stats(t);
    Plan p = over(t, {});
    EXPECT_DOUBLE_EQ(estimated_read_bytes(p, st), static_cast<double>(t.logical_bytes()));
    SizeEstimate e = propagate_sizes(p, 12345.0, st);
    ASSERT_EQ(e.nodes.size(), 1u);
    EXPECT_DOUBLE_EQ(*e.nodes[0].output_bytes, 12345.0);
}

TEST(Propagation, ArrayAccessMakesRestUnknown) {
    const auto& q = corpus_query("Q4");
    Table t = generate_dataset(q.dataset, {2000, 1, {}, 512});
    TableStats st = compute_table_stats(t);
    Plan p = parse_sql(q.sql, t.schema());
    SizeEstimate e = propagate_sizes(p, estimated_read_bytes(p, st), st);
    ASSERT_EQ(e.first_unknown(), std::optional<size_t>(1));
    EXPECT_TRUE(e.nodes[0].output_bytes);
    for (size_t i = 1; i < e.nodes.size(); ++i) EXPECT_FALSE(e.nodes[i].output_bytes) << i;
}

TEST(Propagation, VirtualRowidHasHistogram) {
    const auto& q = corpus_query("Q3");
    Table t = generate_dataset(q.dataset, {4000, 1, {}, 1024});
    TableStats st = compute_table_stats(t);
    Plan p = parse_sql(q.sql, t.schema());
    ASSERT_TRUE(p.read().with_rowid);
    EXPECT_GT(estimated_read_bytes(p, st), static_cast<double>(st.logical_bytes));
    SizeEstimate e = propagate_sizes(p, estimated_read_bytes(p, st), st);
    EXPECT_TRUE(e.nodes[1].coefficient.known());
}

TEST(Propagation, MonotoneAndLinear) {
    for (const auto& q : corpus_queries()) {
        Table t = generate_dataset(q.dataset, {5000, 2, {}, 1000});
        TableStats st = compute_table_stats(t);
        Plan p = parse_sql(q.sql, t.schema());
        double r = estimated_read_bytes(p, st);
        SizeEstimate base = propagate_sizes(p, r, st);
        for (size_t i = 1; i < base.nodes.size(); ++i) {
            const auto& n = base.nodes[i];
            if (!n.output_bytes) continue;
            EXPECT_GE(n.coefficient.value, 0.0);
            if (n.coefficient.value <= 1.0) EXPECT_LE(*n.output_bytes, *base.nodes[i - 1].output_bytes) << q.name;
        }
        for (double k : {0.5, 3.0, 1000.0}) {
            SizeEstimate scaled = propagate_sizes(p, r * k, st);
            for (size_t i = 0; i < base.nodes.size(); ++i) {
                ASSERT_EQ(base.nodes[i].output_bytes.has_value(), scaled.nodes[i].output_bytes.has_value());
                if (base.nodes[i].output_bytes) {
                    EXPECT_NEAR(*scaled.nodes[i].output_bytes, k * *base.nodes[i].output_bytes,
                                1e-9 * k * *base.nodes[i].output_bytes);
                }
            }
        }
    }
}

TEST(Propagation, PartialAggregateWidensAvg) {
    Table t = generate_dataset(Dataset::kLaghosBox, {20000, 3, {}, 4096});
    TableStats st = compute_table_stats(t);
    Plan p = parse_sql("SELECT avg(e) AS m FROM parquet WHERE x > 1", t.schema());
    double r = estimated_read_bytes(p, st);
    SizeEstimate full = propagate_sizes(p, r, st);
    SizeEstimate partial = propagate_sizes(p, r, st, {true});
    EXPECT_GT(*partial.nodes[2].output_bytes, *full.nodes[2].output_bytes);
}

TEST(Propagation, DistinctCapMarksGrowth) {
    Table t = generate_dataset(Dataset::kLaghosBox, {20000, 3, {}, 4096});
    TableStats st = compute_table_stats(t);
    // Few rows pass, so every row is its own group and the partial state
    // (key, three extremes, sum and count) outgrows the five input columns.
    Plan p = parse_sql("SELECT vertex_id, min(x) AS a, max(y) AS b, min(z) AS c, avg(e) AS d FROM parquet "
                       "WHERE x > 3.99 GROUP BY vertex_id",
                       t.schema());
    ASSERT_TRUE(std::holds_alternative<AggregateNode>(p.nodes[2]));
    SizeEstimate full = propagate_sizes(p, estimated_read_bytes(p, st), st);
    SizeEstimate partial = propagate_sizes(p, estimated_read_bytes(p, st), st, {true});
    EXPECT_EQ(partial.nodes[2].coefficient.value, 1.0);
    EXPECT_TRUE(partial.nodes[2].coefficient.capped);
    EXPECT_EQ(*partial.nodes[2].output_bytes, *partial.nodes[1].output_bytes);
    // Final state is exactly as wide as the input.
    EXPECT_FALSE(full.nodes[2].coefficient.capped);

    Plan few = parse_sql("SELECT vertex_id, sum(e) AS s FROM parquet GROUP BY vertex_id", t.schema());
    SizeEstimate f = propagate_sizes(few, estimated_read_bytes(few, st), st, {true});
    EXPECT_LT(f.nodes[1].coefficient.value, 1.0);
    EXPECT_FALSE(f.nodes[1].coefficient.capped);
}

} // namespace
} // namespace tierq
