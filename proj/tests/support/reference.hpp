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

#include <cstdint>

#include "tierq/columnar.hpp"
#include "tierq/plan.hpp"

namespace tierq::testing {

// Naive row-at-a-time interpreter sharing no evaluation code with the
// executor. `table` is the input of the plan's Read.
Table reference_execute(const Plan& plan, const Table& table, uint64_t rowid_base = 0);

} // namespace tierq::testing
