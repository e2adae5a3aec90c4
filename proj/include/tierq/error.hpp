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

#include <stdexcept>
#include <string>
#include <string_view>

namespace tierq {

enum class ErrorCode {
    kSchemaMismatch,
    kParseError,
    kCorruptFrame,
    kVersionUnsupported,
    kGrammarError,
    kUnknownFunction,
    kSyntaxError,
    kUnsupportedFeature,
    kValidation,
    kUnsupportedColumnType,
    kUnclassifiableOperator,
    kEstimationUnavailable,
    kNonDecomposableMeasure,
    kInvalidSplit,
    kPlacementInfeasible,
    kExecError,
    kDuplicateKey,
    kNoSuchBucket,
    kNoSuchObject,
    kDuplicateBucket,
    kIoError,
    kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

/// Every module reports failures through this exception. The code is the
/// stable part of the contract; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
            : std::runtime_error(std::string(error_code_name(code)) + ": " + message), _code(code), _message(message) {}

    ErrorCode code() const { return _code; }
    // The text without the code name.
    const std::string& message() const { return _message; }

private:
    ErrorCode _code;
    std::string _message;
};

} // namespace tierq
