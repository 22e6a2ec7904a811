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
// Micro-benchmarks of the per-chunk operations on each tier.
#include <cstdint>
#include <string>
#include <vector>

namespace alk::cli {

struct BenchOptions {
  unsigned bits = 2048;
  uint32_t s_data = 9;
  uint64_t iterations = 50;
  uint64_t seed = 1;
};

struct BenchRecord {
  std::string op;
  uint64_t iterations = 0;
  double seconds = 0;

  double per_sec() const { return seconds > 0 ? static_cast<double>(iterations) / seconds : 0; }
};

struct BenchReport {
  unsigned bits = 0;
  uint32_t s_data = 0;
  size_t chunk_bytes = 0;
  std::vector<BenchRecord> records;
};

BenchReport run_bench(const BenchOptions& options);

}  // namespace alk::cli
