/*
 * Copyright 2026 The alk Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once
// The end-to-end acceptance checks, shared by `alk check` and the
// acceptance test binary.
#include <cstdint>
#include <string>
#include <vector>

namespace alk::cli {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

struct AcceptanceOptions {
  uint64_t seed = 0x5eed2026;
};

// Ids 1..9, in order.
std::vector<int> criterion_ids();
std::string criterion_name(int id);
// Throws alk::Error for an unknown id.
CriterionResult run_criterion(int id, const AcceptanceOptions& options);

}  // namespace alk::cli
