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

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tierq/columnar.hpp"

namespace tierq::testing {

// Removes the directory on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return _path; }

private:
    std::filesystem::path _path;
};

// Random table over the given schema; ~10% nulls in nullable fields, lists of
// length 0..4, short ASCII strings (including ones that need CSV quoting).
Table random_table(std::mt19937_64& rng, const Schema& schema, size_t rows, size_t batch_rows);

// Random schema of 1..max_fields fields across every storable type.
Schema random_schema(std::mt19937_64& rng, size_t max_fields);

// Row-major view used by comparisons.
std::vector<std::vector<Value>> rows_of(const Table& t);

struct CompareOptions {
    bool ordered = false;
    double rel_tol = 1e-9;
};

// Empty string when the tables hold the same rows; otherwise a description of
// the first difference. Unordered comparison sorts rows by a canonical key.
std::string compare_tables(const Table& actual, const Table& expected, const CompareOptions& opts = {});

bool values_close(const Value& a, const Value& b, double rel_tol);

} // namespace tierq::testing
