// Copyright 2026 The FinePillar Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace finepillar {

/// Bad user-supplied data: unreadable files, malformed configs, schema
/// violations, missing weights. The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A broken internal invariant. The CLI maps this to exit code 2.
class DefectError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Tensor or matrix operands whose shapes do not line up.
class ShapeError : public DefectError {
 public:
  using DefectError::DefectError;
};

}  // namespace finepillar
