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

// Deterministic synthetic datasets shaped like the science workloads, and
// the query corpus that runs over them.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tierq/columnar.hpp"

namespace tierq {

enum class Dataset { kLaghosBox, kDeepwaterThreshold, kHepDimuon };

std::string_view dataset_name(Dataset d);
std::optional<Dataset> dataset_from_name(std::string_view name);
Schema dataset_schema(Dataset d);

struct GenOptions {
    size_t rows = 100000;
    uint64_t seed = 1;
    // laghos-box: fraction of rows inside the (1.5,1.6)^3 box, exact up to
    // rounding. deepwater-threshold: fraction of rows with v03 strictly
    // between 0.001 and 0.999 (and, independently, v02 > 0.1).
    // hep-dimuon: fraction of two-muon rows built as Z-like pairs.
    std::optional<double> selectivity;
    size_t batch_rows = 65536;
};

double default_selectivity(Dataset d);

// Same options always produce the same table.
Table generate_dataset(Dataset d, const GenOptions& opts);

struct CorpusQuery {
    std::string name;
    Dataset dataset;
    std::string sql;
};

// Q1..Q4 plus Q1s, the aggregation-free, sorted variant of Q1.
const std::vector<CorpusQuery>& corpus_queries();
const CorpusQuery& corpus_query(std::string_view name);

} // namespace tierq
