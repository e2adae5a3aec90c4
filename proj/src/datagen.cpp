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

#include "tierq/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "tierq/error.hpp"

namespace tierq {

std::string_view dataset_name(Dataset d) {
    switch (d) {
    case Dataset::kLaghosBox: return "laghos-box";
    case Dataset::kDeepwaterThreshold: return "deepwater-threshold";
    case Dataset::kHepDimuon: return "hep-dimuon";
    }
    return "?";
}

std::optional<Dataset> dataset_from_name(std::string_view name) {
    for (auto d : {Dataset::kLaghosBox, Dataset::kDeepwaterThreshold, Dataset::kHepDimuon}) {
        if (dataset_name(d) == name) return d;
    }
    return std::nullopt;
}

Schema dataset_schema(Dataset d) {
    switch (d) {
    case Dataset::kLaghosBox:
        return Schema({Field{"vertex_id", TypeKind::kInt64, false}, Field{"x", TypeKind::kFloat64, false},
                       Field{"y", TypeKind::kFloat64, false}, Field{"z", TypeKind::kFloat64, false},
                       Field{"e", TypeKind::kFloat64, false}});
    case Dataset::kDeepwaterThreshold:
        return Schema({Field{"v02", TypeKind::kFloat64, false}, Field{"v03", TypeKind::kFloat64, false},
                       Field{"timestep", TypeKind::kInt64, false}});
    case Dataset::kHepDimuon:
        return Schema({Field{"MET_pt", TypeKind::kFloat64, false}, Field{"nMuon", TypeKind::kInt32, false},
                       Field{"Muon_pt", TypeKind::kListFloat64, false},
                       Field{"Muon_eta", TypeKind::kListFloat64, false},
                       Field{"Muon_phi", TypeKind::kListFloat64, false},
                       Field{"Muon_charge", TypeKind::kListInt32, false}});
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown dataset");
}

double default_selectivity(Dataset d) {
    switch (d) {
    case Dataset::kLaghosBox: return 1e-4;
    case Dataset::kDeepwaterThreshold: return 1e-3;
    case Dataset::kHepDimuon: return 0.01;
    }
    return 0;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Exactly k distinct row positions out of n.
std::vector<bool> pick_rows(Rng& rng, size_t n, size_t k) {
    std::vector<uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (size_t i = 0; i < k && i < n; ++i) {
        std::uniform_int_distribution<size_t> d(i, n - 1);
        std::swap(idx[i], idx[d(rng)]);
    }
    std::vector<bool> chosen(n, false);
    for (size_t i = 0; i < k && i < n; ++i) chosen[idx[i]] = true;
    return chosen;
}

bool in_box(double v) { return v > 1.5 && v < 1.6; }

Table laghos(Rng& rng, size_t rows, double sel) {
    Schema s = dataset_schema(Dataset::kLaghosBox);
    size_t inside = static_cast<size_t>(std::llround(sel * static_cast<double>(rows)));
    auto chosen = pick_rows(rng, rows, inside);
    // A vertex reappears across a handful of snapshots.
    int64_t vertices = std::max<int64_t>(1, static_cast<int64_t>(rows / 4));
    ColumnBuilder vid(TypeKind::kInt64, rows), x(TypeKind::kFloat64, rows), y(TypeKind::kFloat64, rows),
            z(TypeKind::kFloat64, rows), e(TypeKind::kFloat64, rows);
    for (size_t i = 0; i < rows; ++i) {
        double p[3];
        if (chosen[i]) {
            for (double& v : p) v = 1.5 + 0.1 * uniform(rng, 0.01, 0.99);
        } else {
            do {
                for (double& v : p) v = uniform(rng, 0.0, 4.0);
            } while (in_box(p[0]) && in_box(p[1]) && in_box(p[2]));
        }
        vid.append_int(std::uniform_int_distribution<int64_t>(0, vertices - 1)(rng));
        x.append_double(p[0]);
        y.append_double(p[1]);
        z.append_double(p[2]);
        e.append_double(uniform(rng, 0.0, 100.0));
    }
    std::vector<Column> cols;
    for (auto* b : {&vid, &x, &y, &z, &e}) cols.push_back(b->finish());
    return Table(s, {ColumnBatch(s, std::move(cols))});
}

Table deepwater(Rng& rng, size_t rows, double sel) {
    Schema s = dataset_schema(Dataset::kDeepwaterThreshold);
    auto mixed = pick_rows(rng, rows, static_cast<size_t>(std::llround(sel * static_cast<double>(rows))));
    auto wet = pick_rows(rng, rows, static_cast<size_t>(std::llround(sel * static_cast<double>(rows))));
    size_t per_step = std::max<size_t>(1, rows / 8);
    ColumnBuilder v02(TypeKind::kFloat64, rows), v03(TypeKind::kFloat64, rows), ts(TypeKind::kInt64, rows);
    for (size_t i = 0; i < rows; ++i) {
        v02.append_double(wet[i] ? uniform(rng, 0.1001, 1.0) : uniform(rng, 0.0, 0.1));
        if (mixed[i]) {
            v03.append_double(uniform(rng, 0.0011, 0.9989));
        } else {
            // Pure cells sit at (or within rounding of) 0 or 1.
            bool water = std::bernoulli_distribution(0.5)(rng);
            double eps = uniform(rng, 0.0, 0.0009);
            v03.append_double(water ? 1.0 - eps : eps);
        }
        ts.append_int(static_cast<int64_t>(i / per_step));
    }
    std::vector<Column> cols;
    for (auto* b : {&v02, &v03, &ts}) cols.push_back(b->finish());
    return Table(s, {ColumnBatch(s, std::move(cols))});
}

Table hep(Rng& rng, size_t rows, double sel) {
    Schema s = dataset_schema(Dataset::kHepDimuon);
    ColumnBuilder met(TypeKind::kFloat64, rows), n(TypeKind::kInt32, rows), pt(TypeKind::kListFloat64, rows),
            eta(TypeKind::kListFloat64, rows), phi(TypeKind::kListFloat64, rows), charge(TypeKind::kListInt32, rows);
    std::discrete_distribution<int> multiplicity({30, 25, 30, 10, 5});
    std::bernoulli_distribution z_like(sel);
    const double pi = std::numbers::pi;
    for (size_t i = 0; i < rows; ++i) {
        int k = multiplicity(rng);
        std::vector<double> vpt(k), veta(k), vphi(k);
        std::vector<int32_t> vq(k);
        if (k == 2 && z_like(rng)) {
            double mass = uniform(rng, 65.0, 115.0);
            veta = {uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
            vphi[0] = uniform(rng, -pi, pi);
            vphi[1] = vphi[0] + pi + uniform(rng, -1.0, 1.0);
            double spread = std::cosh(veta[0] - veta[1]) - std::cos(vphi[0] - vphi[1]);
            double product = mass * mass / (2.0 * spread);
            vpt[0] = uniform(rng, 20.0, 60.0);
            vpt[1] = product / vpt[0];
            vq = {1, -1};
            if (std::bernoulli_distribution(0.5)(rng)) std::swap(vq[0], vq[1]);
        } else {
            // Soft muons: too little energy for a pair to reach the Z window.
            for (int j = 0; j < k; ++j) {
                vpt[j] = uniform(rng, 3.0, 12.0);
                veta[j] = uniform(rng, -1.0, 1.0);
                vphi[j] = uniform(rng, -pi, pi);
                vq[j] = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
            }
        }
        met.append_double(uniform(rng, 0.0, 80.0));
        n.append_int(k);
        pt.append_list(std::span<const double>(vpt));
        eta.append_list(std::span<const double>(veta));
        phi.append_list(std::span<const double>(vphi));
        charge.append_list(std::span<const int32_t>(vq));
    }
    std::vector<Column> cols;
    for (auto* b : {&met, &n, &pt, &eta, &phi, &charge}) cols.push_back(b->finish());
    return Table(s, {ColumnBatch(s, std::move(cols))});
}

} // namespace

Table generate_dataset(Dataset d, const GenOptions& opts) {
    double sel = opts.selectivity.value_or(default_selectivity(d));
    if (!(sel >= 0.0 && sel <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "selectivity must be in [0, 1]");
    if (opts.batch_rows == 0) throw Error(ErrorCode::kInvalidArgument, "batch_rows must be positive");
    Rng rng(opts.seed);
    Table t;
    switch (d) {
    case Dataset::kLaghosBox: t = laghos(rng, opts.rows, sel); break;
    case Dataset::kDeepwaterThreshold: t = deepwater(rng, opts.rows, sel); break;
    case Dataset::kHepDimuon: t = hep(rng, opts.rows, sel); break;
    }
    return t.rebatched(opts.batch_rows);
}

const std::vector<CorpusQuery>& corpus_queries() {
    static const std::vector<CorpusQuery> queries = {
            {"Q1", Dataset::kLaghosBox,
             "SELECT min(vertex_id) AS VID, min(x) AS X, min(y) AS Y, min(z) AS Z, avg(e) AS E FROM parquet\n"
             "  WHERE x > 1.5 AND x < 1.6 AND y > 1.5 AND y < 1.6 AND z > 1.5 AND z < 1.6\n"
             "  GROUP BY vertex_id ORDER BY E;"},
            {"Q2", Dataset::kDeepwaterThreshold,
             "SELECT rowid, v03 FROM parquet\n"
             "  WHERE v03 > 0.001 AND v03 < 0.999;"},
            {"Q3", Dataset::kDeepwaterThreshold,
             "SELECT MAX((rowid % (500 * 500)) / 500) AS height, TIMESTEP FROM parquet\n"
             "  WHERE v02 > 0.1\n"
             "  GROUP BY timestep;"},
            {"Q4", Dataset::kHepDimuon,
             "SELECT MET_pt, sqrt( 2 * Muon_pt[1] * Muon_pt[2] * (cosh(Muon_eta[1] - Muon_eta[2]) - "
             "cos(Muon_phi[1] - Muon_phi[2])))\n"
             "  AS Dimuon_mass FROM parquet WHERE nMuon = 2\n"
             "  AND Muon_charge[1] != Muon_charge[2]\n"
             "  AND sqrt(\n"
             "       2 * Muon_pt[1] * Muon_pt[2] *\n"
             "       (cosh(Muon_eta[1] - Muon_eta[2]) -\n"
             "        cos(Muon_phi[1] - Muon_phi[2]))\n"
             "  ) BETWEEN 60 AND 120;"},
            {"Q1s", Dataset::kLaghosBox,
             "SELECT vertex_id AS VID, x AS X, y AS Y, z AS Z, e AS E FROM parquet\n"
             "  WHERE x > 1.5 AND x < 1.6 AND y > 1.5 AND y < 1.6 AND z > 1.5 AND z < 1.6\n"
             "  ORDER BY E;"},
    };
    return queries;
}

const CorpusQuery& corpus_query(std::string_view name) {
    for (const auto& q : corpus_queries()) {
        if (q.name == name) return q;
    }
    throw Error(ErrorCode::kInvalidArgument, "no corpus query named '" + std::string(name) + "'");
}

} // namespace tierq
