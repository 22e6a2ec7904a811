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

// Closed-form recovery, decryption-cost, load and cost arithmetic.

#include <cstdint>
#include <string>
#include <vector>

namespace alk::analytics {

// Probability that a given gray survives: it shares its bucket with no other
// of the k grays in at least one of `split_count` sets of m/t buckets.
double p_recover(uint64_t k, uint32_t bucket_count, uint32_t split_count);

// Largest k with p_recover(k, m, t) >= target once rounded to `decimals`
// decimal places (82 at m = 768, t = 1, target 0.9).
uint64_t gray_capacity(uint32_t bucket_count, uint32_t split_count, double target = 0.9,
                       int decimals = 3);

struct DecryptionCost {
  double expected = 0;    // tag decryptions for one tree
  double normalized = 0;  // expected / 2^height
};

// 1 + 1/2 * sum_{i=1..n} 2^i (1 - (1-p)^(2^(n+1-i))).
DecryptionCost expected_decryptions(unsigned height, double p);

// Largest integer r with r + 2 sqrt(r) <= capacity.
uint64_t safe_rate(double capacity);

struct Load {
  double mean = 0;
  double peak = 0;
};

// mean = users * per_day / (window_hours * 3600), peak = mean + sigmas * sqrt(mean).
Load peak_load(double users, double per_day, double window_hours, double sigmas = 3);

// Request body plus modeled header bytes: base64 of the chunk, plus 400.
uint64_t modeled_request_bytes(uint64_t chunk_bytes, uint64_t header_bytes = 400);

struct CapacityParams {
  double users = 138e6;
  double transmissions_per_user_day = 50;
  double active_window_hours = 11;
  uint32_t time_zones = 3;
  double reqs_per_guard_sec = 8000;
  uint32_t bucket_count = 768;
  uint32_t split_count = 1;
  double decryptor_mbps = 18;
  uint64_t chunk_bytes = 3072;
  uint64_t base64_request_bytes = 4496;
  uint64_t blocks_per_file = 911;
  uint64_t transmissions_per_file = 1010;
  double recovery_target = 0.9;

  void validate() const;
};

struct CapacityReport {
  double mean_load = 0;
  double peak_load = 0;
  uint64_t guard_units = 0;
  uint64_t aggregator_units = 0;
  double decryptor_chunks_per_sec = 0;
  uint64_t gray_capacity = 0;
  uint64_t safe_gray_rate = 0;
  double concurrent_whistleblowers = 0;
  double disclosures_per_day = 0;
  double submission_days = 0;
  double daily_load_per_user_kb = 0;
};

// Megabits are 2^20 bits, so 18 Mb/s carries exactly 768 chunks of 3072
// bytes per second.
CapacityReport capacity_report(const CapacityParams& params);

struct BreakEven {
  double daily_infra_usd = 0;
  double daily_payout_usd = 0;
  double markup = 0;
};

inline constexpr double kDaysPerMonth = 365.0 / 12.0;

// Guards plus aggregators: units * 2 servers. Throws alk::Error for a zero
// payout or non-positive inputs.
BreakEven break_even(double users, double ads_per_user_day, double payout_cpm,
                     double unit_cost_usd_month, uint64_t units,
                     double days_per_month = kDaysPerMonth);

struct RecoveryPoint {
  uint64_t k;
  uint32_t bucket_count;
  uint32_t split_count;
  double p;
};

// Recovery surface over k and m for one split count.
std::vector<RecoveryPoint> recovery_grid(const std::vector<uint64_t>& ks,
                                         const std::vector<uint32_t>& ms, uint32_t split_count);

struct CostPoint {
  unsigned height;
  double p;
  double normalized;
};

std::vector<CostPoint> cost_curves(const std::vector<unsigned>& heights,
                                   const std::vector<double>& ps);

}  // namespace alk::analytics
