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

// Cutting a plan into the part that runs next to the data and the part that
// runs on the frontend over its result.

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tierq/plan.hpp"
#include "tierq/soda.hpp"

namespace tierq {

using NameMapping = std::vector<std::pair<std::string, std::string>>;

struct DecomposedPlans {
    // Nodes 0..split_after; emits the intermediate under temp names.
    Plan array_plan;
    // Read of the intermediate followed by the remaining nodes.
    Plan fe_plan;
    Schema intermediate_schema;
    // Original intermediate column name -> generated name.
    NameMapping temp_names;
};

// t_a, t_b, ..., t_z, t_aa, t_ab, ... one per field, skipping any name in
// the schema or in `reserved`.
NameMapping generate_temp_names(const Schema& schema, const std::set<std::string>& reserved = {});

// Output schema of the array-side plan, emit names applied.
Schema infer_intermediate_schema(const Plan& array_plan);

// Throws kInvalidSplit for a split outside the plan or one that would cut
// between a partial aggregate and the nodes depending on its merge.
DecomposedPlans decompose(const Plan& plan, const SplitDecision& split,
                          const std::string& intermediate_ref = "intermediate");

} // namespace tierq
