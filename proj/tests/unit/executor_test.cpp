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

#include <cmath>
#include <random>

#include "support/plangen.hpp"
#include "support/reference.hpp"
#include "support/testing.hpp"
#include "tierq/datagen.hpp"
#include "tierq/error.hpp"
#include "tierq/executor.hpp"
#include "tierq/sql.hpp"

namespace tierq {
namespace {

using testing::compare_tables;
using testing::rows_of;

Table make_table(const Schema& s, const std::vector<std::vector<Value>>& rows) {
    std::vector<ColumnBuilder> b;
    for (const auto& f : s.fields()) b.emplace_back(f.type);
    for (const auto& r : rows) {
        for (size_t c = 0; c < r.size(); ++c) b[c].append_value(r[c]);
    }
    std::vector<Column> cols;
    for (auto& x : b) cols.push_back(x.finish());
    return Table(s, {ColumnBatch(s, std::move(cols))});
}

Table run(const std::string& sql, const Table& t, size_t batch_rows = 65536) {
    Plan p = parse_sql(sql, t.schema());
    ExecContext ctx;
    ctx.batch_rows = batch_rows;
    ctx.add_table(p.read().table_ref, t);
    return execute(p, ctx);
}

Schema laghos() { return dataset_schema(Dataset::kLaghosBox); }

TEST(Execute, Q1OnHandBuiltTable) {
    Table t = make_table(laghos(), {
                                           {int64_t{7}, 1.55, 1.52, 1.58, 10.0},
                                           {int64_t{3}, 1.51, 1.59, 1.53, 2.0},
                                           {int64_t{7}, 1.54, 1.51, 1.57, 30.0},
                                           {int64_t{3}, 2.0, 1.55, 1.55, 99.0}, // outside on x
                                           {int64_t{9}, 1.55, 1.55, 1.6, 50.0}, // z == 1.6 is outside
                                           {int64_t{3}, 1.59, 1.56, 1.52, 4.0},
                                   });
    Table out = run(corpus_query("Q1").sql, t);
    // vertex 3 keeps rows 2 and 6, vertex 7 rows 1 and 3; E orders 3 before 20.
    auto rows = rows_of(out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], (std::vector<Value>{int64_t{3}, 1.51, 1.56, 1.52, 3.0}));
    EXPECT_EQ(rows[1], (std::vector<Value>{int64_t{7}, 1.54, 1.51, 1.57, 20.0}));
    EXPECT_EQ(out.schema().names(), (std::vector<std::string>{"VID", "X", "Y", "Z", "E"}));
}

TEST(Execute, AlwaysFalseFilterKeepsSchema) {
    Table t = make_table(laghos(), {{int64_t{1}, 0.0, 0.0, 0.0, 1.0}});
    Table out = run("SELECT x, e FROM t WHERE x > 5 AND x < 4", t);
    EXPECT_EQ(out.num_rows(), 0u);
    EXPECT_EQ(out.schema().names(), (std::vector<std::string>{"x", "e"}));
}

TEST(Execute, Q4AgainstFormula) {
    Schema s = dataset_schema(Dataset::kHepDimuon);
    auto mass = [](double pt1, double pt2, double eta1, double eta2, double phi1, double phi2) {
        return std::sqrt(2 * pt1 * pt2 * (std::cosh(eta1 - eta2) - std::cos(phi1 - phi2)));
    };
    // Opposite charges, mass ~91; same charges; opposite charges but mass ~10.
    Table t = make_table(s, {
                                    {25.0, int64_t{2}, ListF64{45.0, 46.0}, ListF64{0.1, -0.2}, ListF64{0.0, 3.0},
                                     ListI32{1, -1}},
                                    {30.0, int64_t{2}, ListF64{45.0, 46.0}, ListF64{0.1, -0.2}, ListF64{0.0, 3.0},
                                     ListI32{1, 1}},
                                    {35.0, int64_t{2}, ListF64{5.0, 5.0}, ListF64{0.0, 0.0}, ListF64{0.0, 3.0},
                                     ListI32{-1, 1}},
                            });
    ASSERT_EQ(s.names()[0], "MET_pt");
    Table out = run(corpus_query("Q4").sql, t);
    auto rows = rows_of(out);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(std::get<double>(rows[0][0]), 25.0);
    double expected = mass(45, 46, 0.1, -0.2, 0.0, 3.0);
    EXPECT_GT(expected, 60);
    EXPECT_LT(expected, 120);
    EXPECT_NEAR(std::get<double>(rows[0][1]), expected, 1e-12 * expected);
}

TEST(Evaluate, RowidHeightFormula) {
    Schema s({Field{"rowid", TypeKind::kInt64, false}});
    Table t = make_table(s, {{int64_t{750250}}, {int64_t{499999}}, {int64_t{-750250}}});
    Expr e = ex::arith(ArithOp::kDiv,
                       ex::arith(ArithOp::kMod, ex::col("rowid"),
                                 ex::arith(ArithOp::kMul, ex::lit(int64_t{500}), ex::lit(int64_t{500}))),
                       ex::lit(int64_t{500}));
    Column c = evaluate_expr(e, t.combined());
    ASSERT_EQ(c.type, TypeKind::kInt64);
    // 750250 = 3 * 250000 + 250, and 250 / 500 truncates to 0.
    EXPECT_EQ(c.value(0), Value(int64_t{0}));
    EXPECT_EQ(c.value(1), Value(int64_t{499}));
    EXPECT_EQ(c.value(2), Value(int64_t{0}));
}

TEST(Evaluate, IsNotNullAndIdentity) {
    Schema s({Field{"v", TypeKind::kFloat64, true}});
    Table t = make_table(s, {{1.0}, {std::monostate{}}});
    Column nn = evaluate_expr(ex::is_not_null(ex::col("v")), t.combined());
    EXPECT_EQ(nn.type, TypeKind::kBool);
    EXPECT_EQ(nn.value(0), Value(int64_t{1}));
    EXPECT_EQ(nn.value(1), Value(int64_t{0}));
    Column id = evaluate_expr(ex::arith(ArithOp::kSub, ex::func(FuncName::kCosh, {ex::lit(0.0)}),
                                        ex::func(FuncName::kCos, {ex::lit(0.0)})),
                              t.combined());
    EXPECT_EQ(id.value(0), Value(0.0));
}

TEST(Evaluate, IntegerAndDomainRules) {
    Schema s({Field{"a", TypeKind::kInt64, true}, Field{"b", TypeKind::kInt64, true}, Field{"f", TypeKind::kFloat64, true}});
    Table t = make_table(s, {{int64_t{-7}, int64_t{2}, -4.0}, {int64_t{7}, int64_t{0}, 4.0}});
    ColumnBatch b = t.combined();
    auto at = [&](const Expr& e, size_t r) { return evaluate_expr(e, b).value(r); };
    EXPECT_EQ(at(ex::arith(ArithOp::kDiv, ex::col("a"), ex::col("b")), 0), Value(int64_t{-3}));
    EXPECT_EQ(at(ex::arith(ArithOp::kMod, ex::col("a"), ex::col("b")), 0), Value(int64_t{-1}));
    EXPECT_TRUE(is_null(at(ex::arith(ArithOp::kDiv, ex::col("a"), ex::col("b")), 1)));
    EXPECT_TRUE(is_null(at(ex::arith(ArithOp::kMod, ex::col("a"), ex::col("b")), 1)));
    EXPECT_TRUE(is_null(at(ex::arith(ArithOp::kDiv, ex::col("f"), ex::lit(0.0)), 1)));
    EXPECT_TRUE(is_null(at(ex::func(FuncName::kSqrt, {ex::col("f")}), 0)));
    EXPECT_EQ(at(ex::func(FuncName::kSqrt, {ex::col("f")}), 1), Value(2.0));
    EXPECT_EQ(at(ex::func(FuncName::kAbs, {ex::col("a")}), 0), Value(int64_t{7}));
}

TEST(Evaluate, ThreeValuedLogic) {
    Schema s({Field{"p", TypeKind::kInt64, true}});
    Table t = make_table(s, {{int64_t{1}}, {int64_t{0}}, {std::monostate{}}});
    ColumnBatch b = t.combined();
    Expr is_one = ex::cmp(CmpOp::kEq, ex::col("p"), ex::lit(int64_t{1}));
    Expr t_ = ex::cmp(CmpOp::kEq, ex::lit(int64_t{1}), ex::lit(int64_t{1}));
    Expr f_ = ex::cmp(CmpOp::kEq, ex::lit(int64_t{1}), ex::lit(int64_t{2}));
    Column a_false = evaluate_expr(ex::and_({is_one, f_}), b);
    Column o_true = evaluate_expr(ex::or_({is_one, t_}), b);
    Column a_true = evaluate_expr(ex::and_({is_one, t_}), b);
    Column o_false = evaluate_expr(ex::or_({is_one, f_}), b);
    for (size_t r = 0; r < 3; ++r) {
        EXPECT_EQ(a_false.value(r), Value(int64_t{0}));
        EXPECT_EQ(o_true.value(r), Value(int64_t{1}));
    }
    EXPECT_EQ(a_true.value(0), Value(int64_t{1}));
    EXPECT_TRUE(is_null(a_true.value(2)));
    EXPECT_EQ(o_false.value(1), Value(int64_t{0}));
    EXPECT_TRUE(is_null(o_false.value(2)));
}

TEST(Evaluate, ElementAccessOutOfRange) {
    Schema s({Field{"m", TypeKind::kListFloat64, true}});
    Table t = make_table(s, {{ListF64{1.0, 2.0}}, {ListF64{}}, {std::monostate{}}});
    Column c = evaluate_expr(ex::idx("m", 2), t.combined());
    EXPECT_EQ(c.value(0), Value(2.0));
    EXPECT_TRUE(is_null(c.value(1)));
    EXPECT_TRUE(is_null(c.value(2)));
}

TEST(Execute, SortStableNullsLast) {
    Schema s({Field{"k", TypeKind::kInt64, true}, Field{"tag", TypeKind::kUtf8, true}});
    Table t = make_table(s, {{int64_t{2}, std::string("a")},
                             {std::monostate{}, std::string("b")},
                             {int64_t{1}, std::string("c")},
                             {int64_t{2}, std::string("d")},
                             {int64_t{1}, std::string("e")}});
    auto tags = [](const Table& out) {
        std::string s;
        for (const auto& r : rows_of(out)) s += std::get<std::string>(r[1]);
        return s;
    };
    EXPECT_EQ(tags(run("SELECT k, tag FROM t ORDER BY k", t)), "ceadb");
    EXPECT_EQ(tags(run("SELECT k, tag FROM t ORDER BY k DESC", t)), "adceb");
}

TEST(Execute, GroupsInFirstAppearanceOrderAndNullKeys) {
    Schema s({Field{"k", TypeKind::kUtf8, true}, Field{"v", TypeKind::kInt64, true}});
    Table t = make_table(s, {{std::string("z"), int64_t{1}},
                             {std::monostate{}, int64_t{5}},
                             {std::string("a"), int64_t{2}},
                             {std::monostate{}, int64_t{7}},
                             {std::string("z"), std::monostate{}}});
    auto rows = rows_of(run("SELECT k, count(*) AS n, count(v) AS nv, sum(v) AS s FROM t GROUP BY k", t));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], (std::vector<Value>{std::string("z"), int64_t{2}, int64_t{1}, int64_t{1}}));
    EXPECT_EQ(rows[1], (std::vector<Value>{std::monostate{}, int64_t{2}, int64_t{2}, int64_t{12}}));
    EXPECT_EQ(rows[2], (std::vector<Value>{std::string("a"), int64_t{1}, int64_t{1}, int64_t{2}}));
}

TEST(Execute, LowerMedianAndEmptyGlobalAggregate) {
    Schema s({Field{"v", TypeKind::kInt64, true}});
    Table t = make_table(s, {{int64_t{4}}, {int64_t{1}}, {int64_t{3}}, {int64_t{2}}, {std::monostate{}}});
    EXPECT_EQ(rows_of(run("SELECT median(v) AS m FROM t", t))[0][0], Value(int64_t{2}));
    auto empty = rows_of(run("SELECT count(*) AS n, sum(v) AS s, avg(v) AS a FROM t WHERE v > 100", t));
    ASSERT_EQ(empty.size(), 1u);
    EXPECT_EQ(empty[0], (std::vector<Value>{int64_t{0}, std::monostate{}, std::monostate{}}));
}

TEST(Execute, RowidUsesBase) {
    Schema s({Field{"v", TypeKind::kInt64, false}});
    Table t = make_table(s, {{int64_t{10}}, {int64_t{20}}, {int64_t{30}}});
    Plan p = parse_sql("SELECT rowid, v FROM t WHERE v > 10", s);
    ExecContext ctx;
    ctx.batch_rows = 2;
    ctx.add_table("t", t, 100);
    auto rows = rows_of(execute(p, ctx));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][0], Value(int64_t{101}));
    EXPECT_EQ(rows[1][0], Value(int64_t{102}));
}

TEST(Execute, SchemaMismatchIsExecError) {
    Schema s({Field{"v", TypeKind::kInt64, false}});
    Plan p = parse_sql("SELECT v FROM t", s);
    ExecContext ctx;
    ctx.add_table("t", make_table(Schema({Field{"v", TypeKind::kFloat64, false}}), {{1.0}}));
    try {
        execute(p, ctx);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kExecError);
    }
}

TEST(PartialAggregate, SumAndAvgSplits) {
    Schema s({Field{"v", TypeKind::kInt64, false}});
    AggregateNode sum{{}, {Measure{AggFn::kSum, {ex::col("v")}, "s"}}, AggPhase::kFull};
    Table p1 = execute_partial_aggregate(sum, make_table(s, {{int64_t{1}}, {int64_t{2}}}));
    Table p2 = execute_partial_aggregate(sum, make_table(s, {{int64_t{3}}}));
    EXPECT_EQ(rows_of(p1)[0][0], Value(int64_t{3}));
    EXPECT_EQ(rows_of(p2)[0][0], Value(int64_t{3}));
    std::vector<Table> parts = {p1, p2};
    EXPECT_EQ(rows_of(execute_final_aggregate(sum, Table::concat(p1.schema(), parts)))[0][0], Value(int64_t{6}));

    AggregateNode avg{{}, {Measure{AggFn::kAvg, {ex::col("v")}, "a"}}, AggPhase::kFull};
    std::vector<Table> avg_parts = {execute_partial_aggregate(avg, make_table(s, {{int64_t{1}}, {int64_t{2}}})),
                                    execute_partial_aggregate(avg, make_table(s, {{int64_t{3}}, {int64_t{4}}}))};
    EXPECT_EQ(avg_parts[0].schema().names(), (std::vector<std::string>{"a$sum", "a$count"}));
    Table merged = execute_final_aggregate(avg, Table::concat(avg_parts[0].schema(), avg_parts));
    EXPECT_EQ(rows_of(merged)[0][0], Value(2.5));

    AggregateNode count{{}, {Measure{AggFn::kCount, {}, "n"}}, AggPhase::kFull};
    Schema cs({Field{"n", TypeKind::kInt64, false}});
    EXPECT_EQ(rows_of(execute_final_aggregate(count, make_table(cs, {{int64_t{3}}, {int64_t{5}}})))[0][0],
              Value(int64_t{8}));
}

TEST(PartialAggregate, MedianIsNotDecomposable) {
    Schema s({Field{"v", TypeKind::kInt64, false}});
    AggregateNode med{{}, {Measure{AggFn::kMedian, {ex::col("v")}, "m"}}, AggPhase::kFull};
    try {
        execute_partial_aggregate(med, make_table(s, {{int64_t{1}}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kNonDecomposableMeasure);
    }
}

TEST(PartialAggregate, RandomPartitionsMatchMonolithic) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> grp(0, 9), part(0, 2);
    std::normal_distribution<double> val(100, 30);
    Schema s({Field{"g", TypeKind::kInt32, false}, Field{"v", TypeKind::kFloat64, true},
              Field{"i", TypeKind::kInt64, false}});
    std::vector<std::vector<Value>> all;
    std::vector<std::vector<Value>> parts[3];
    for (int r = 0; r < 3000; ++r) {
        std::vector<Value> row = {int64_t{grp(rng)}, r % 13 == 0 ? Value{} : Value{val(rng)}, int64_t{r - 1500}};
        all.push_back(row);
        parts[part(rng)].push_back(row);
    }
    AggregateNode agg{{"g"},
                      {Measure{AggFn::kMin, {ex::col("v")}, "mn"}, Measure{AggFn::kMax, {ex::col("i")}, "mx"},
                       Measure{AggFn::kSum, {ex::col("v")}, "sv"}, Measure{AggFn::kSum, {ex::col("i")}, "si"},
                       Measure{AggFn::kCount, {ex::col("v")}, "n"}, Measure{AggFn::kAvg, {ex::col("v")}, "a"}},
                      AggPhase::kFull};
    Table mono = execute_aggregate(agg, make_table(s, all));
    std::vector<Table> partials;
    for (auto& p : parts) partials.push_back(execute_partial_aggregate(agg, make_table(s, p)));
    Table merged = execute_final_aggregate(agg, Table::concat(partials[0].schema(), partials));
    EXPECT_EQ(compare_tables(merged, mono, {false, 1e-12}), "");
}

TEST(Execute, BatchSizeInvariance) {
    for (const auto& q : corpus_queries()) {
        Table t = generate_dataset(q.dataset, {3000, 5, 0.05, 4096});
        Table whole = run(q.sql, t, 65536);
        bool sorted = q.sql.find("ORDER BY") != std::string::npos;
        for (size_t batch : {1u, 7u}) {
            Table out = run(q.sql, t, batch);
            EXPECT_EQ(compare_tables(out, whole, {sorted, 0.0}), "") << q.name << " batch " << batch;
        }
    }
}

TEST(Execute, CorpusMatchesReference) {
    for (const auto& q : corpus_queries()) {
        for (uint64_t seed : {1u, 2u}) {
            Table t = generate_dataset(q.dataset, {4000, seed, 0.05, 512});
            Plan p = parse_sql(q.sql, t.schema());
            bool sorted = std::holds_alternative<SortNode>(p.nodes.back());
            Table expected = testing::reference_execute(p, t);
            EXPECT_EQ(compare_tables(run(q.sql, t, 333), expected, {sorted, 1e-9}), "") << q.name;
        }
    }
}

TEST(Execute, RandomPlansMatchReference) {
    std::mt19937_64 rng(2026);
    for (int i = 0; i < 300; ++i) {
        Plan p = testing::random_plan(rng);
        Table t = testing::mixed_table(rng, 1 + static_cast<size_t>(rng() % 2000), 1 + rng() % 700);
        ExecContext ctx;
        ctx.batch_rows = 1 + rng() % 500;
        ctx.add_table("mixed", t);
        bool sorted = std::holds_alternative<SortNode>(p.nodes.back());
        Table expected = testing::reference_execute(p, t);
        Table actual = execute(p, ctx);
        ASSERT_EQ(compare_tables(actual, expected, {sorted, 1e-9}), "") << plan_to_text(p);
        // Operator contracts: filters never add rows, sorts keep them.
        if (p.nodes.size() == 2 && std::holds_alternative<FilterNode>(p.nodes[1])) EXPECT_LE(actual.num_rows(), t.num_rows());
    }
}

} // namespace
} // namespace tierq
