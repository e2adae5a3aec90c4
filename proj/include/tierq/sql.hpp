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

// SQL subset frontend. Grammar: docs/sql-grammar.md.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tierq/error.hpp"
#include "tierq/plan.hpp"

namespace tierq {

struct SqlDiagnostic {
    ErrorCode code = ErrorCode::kSyntaxError;
    size_t line = 1;
    size_t column = 1;
    std::string message;
};

// Parses one SELECT statement against the schema of the table named in
// FROM. The result is the canonical chain
//   Read -> [Filter] -> [Aggregate] -> [Project] -> [Sort]
// and always validates. Throws kSyntaxError, kUnsupportedFeature,
// kUnknownFunction or kValidation.
Plan parse_sql(std::string_view sql, const Schema& table_schema);

// Table name from the FROM clause, without resolving anything else.
std::string sql_table_name(std::string_view sql);

// Collects diagnostics instead of throwing. Without a schema only the
// syntax is checked.
std::vector<SqlDiagnostic> parse_errors(std::string_view sql, const std::optional<Schema>& table_schema = {});

// Prints a plan produced by parse_sql back as SQL. parse_sql of the result
// is structurally equal to the plan. Throws kInvalidArgument for chains
// outside the canonical shape.
std::string emit_sql(const Plan& plan);

} // namespace tierq
