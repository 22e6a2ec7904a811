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

#include "alk/analytics.hpp"

#include <cmath>

#include "alk/bytes.hpp"
#include "alk/codec.hpp"

namespace alk::analytics {

double p_recover(uint64_t k, uint32_t bucket_count, uint32_t split_count) {
  if (k == 0) throw Error("k must be at least 1");
  if (bucket_count == 0 || split_count == 0 || bucket_count % split_count != 0) {
    throw Error("split count must divide a positive bucket count");
  }
  double per_set = static_cast<double>(bucket_count / split_count);
  double alone = std::pow(1.0 - 1.0 / per_set, static_cast<double>(k - 1));
  return 1.0 - std::pow(1.0 - alone, split_count);
}

uint64_t gray_capacity(uint32_t bucket_count, uint32_t split_count, double target, int decimals) {
  const double scale = std::pow(10.0, decimals);
  auto meets = [&](uint64_t k) {
    return std::round(p_recover(k, bucket_count, split_count) * scale) >= std::round(target * scale);
  };
  if (!meets(1)) return 0;
  uint64_t lo = 1, hi = 2;
  while (meets(hi)) {
    lo = hi;
    hi *= 2;
    if (hi > (uint64_t{1} << 40)) return lo;
  }
  while (hi - lo > 1) {
    uint64_t mid = lo + (hi - lo) / 2;
    (meets(mid) ? lo : hi) = mid;
  }
  return lo;
}

DecryptionCost expected_decryptions(unsigned height, double p) {
  if (!(p >= 0 && p <= 1)) throw Error("p must lie in [0, 1]");
  double sum = 0;
  for (unsigned i = 1; i <= height; ++i) {
    double leaves = std::ldexp(1.0, static_cast<int>(height + 1 - i));
    sum += std::ldexp(1.0, static_cast<int>(i)) * (1.0 - std::pow(1.0 - p, leaves));
  }
  DecryptionCost out;
  out.expected = 1.0 + 0.5 * sum;
  out.normalized = out.expected / std::ldexp(1.0, static_cast<int>(height));
  return out;
}

uint64_t safe_rate(double capacity) {
  if (!(capacity > 0)) throw Error("capacity must be positive");
  auto fits = [&](double r) { return r + 2 * std::sqrt(r) <= capacity * (1 + 1e-12); };
  double root = std::sqrt(1 + capacity) - 1;
  auto r = static_cast<uint64_t>(std::floor(root * root));
  while (fits(static_cast<double>(r + 1))) ++r;
  while (r > 0 && !fits(static_cast<double>(r))) --r;
  return r;
}

Load peak_load(double users, double per_day, double window_hours, double sigmas) {
  if (!(window_hours > 0)) throw Error("window must be positive");
  if (users < 0 || per_day < 0 || sigmas < 0) throw Error("load inputs must be non-negative");
  Load out;
  out.mean = users * per_day / (window_hours * 3600);
  out.peak = out.mean + sigmas * std::sqrt(out.mean);
  return out;
}

uint64_t modeled_request_bytes(uint64_t chunk_bytes, uint64_t header_bytes) {
  return base64_length(chunk_bytes) + header_bytes;
}

void CapacityParams::validate() const {
  if (!(users > 0 && transmissions_per_user_day > 0 && active_window_hours > 0 && time_zones > 0 &&
        reqs_per_guard_sec > 0 && bucket_count > 0 && split_count > 0 && decryptor_mbps > 0 &&
        chunk_bytes > 0 && base64_request_bytes > 0 && blocks_per_file > 0 &&
        transmissions_per_file > 0 && recovery_target > 0 && recovery_target <= 1)) {
    throw Error("capacity parameters must be positive");
  }
  if (bucket_count % split_count != 0) throw Error("split count must divide bucket count");
}

CapacityReport capacity_report(const CapacityParams& params) {
  params.validate();
  CapacityReport r;
  Load load = peak_load(params.users, params.transmissions_per_user_day, params.active_window_hours);
  r.mean_load = load.mean;
  r.peak_load = load.peak;
  r.guard_units = static_cast<uint64_t>(std::ceil(load.peak / params.reqs_per_guard_sec));
  r.aggregator_units = r.guard_units;
  r.decryptor_chunks_per_sec =
      params.decryptor_mbps * 1024 * 1024 / 8 / static_cast<double>(params.chunk_bytes);
  r.gray_capacity = gray_capacity(params.bucket_count, params.split_count, params.recovery_target);
  r.safe_gray_rate = safe_rate(static_cast<double>(r.gray_capacity));
  const double window_seconds = params.active_window_hours * 3600;
  r.concurrent_whistleblowers =
      static_cast<double>(r.safe_gray_rate) * window_seconds / params.transmissions_per_user_day;
  r.disclosures_per_day = r.concurrent_whistleblowers * params.transmissions_per_user_day /
                          static_cast<double>(params.blocks_per_file);
  r.submission_days =
      static_cast<double>(params.transmissions_per_file) / params.transmissions_per_user_day;
  r.daily_load_per_user_kb =
      params.transmissions_per_user_day * static_cast<double>(params.base64_request_bytes) / 1024;
  return r;
}

BreakEven break_even(double users, double ads_per_user_day, double payout_cpm,
                     double unit_cost_usd_month, uint64_t units, double days_per_month) {
  if (!(users > 0 && payout_cpm > 0 && unit_cost_usd_month > 0 && units > 0 && days_per_month > 0)) {
    throw Error("break-even inputs must be positive");
  }
  BreakEven out;
  out.daily_payout_usd = users * ads_per_user_day / 1000 * payout_cpm;
  if (!(out.daily_payout_usd > 0)) throw Error("zero ad payout");
  out.daily_infra_usd = static_cast<double>(units) * 2 * unit_cost_usd_month / days_per_month;
  out.markup = out.daily_infra_usd / out.daily_payout_usd;
  return out;
}

std::vector<RecoveryPoint> recovery_grid(const std::vector<uint64_t>& ks,
                                         const std::vector<uint32_t>& ms, uint32_t split_count) {
  std::vector<RecoveryPoint> out;
  for (uint32_t m : ms) {
    for (uint64_t k : ks) out.push_back({k, m, split_count, p_recover(k, m, split_count)});
  }
  return out;
}

std::vector<CostPoint> cost_curves(const std::vector<unsigned>& heights,
                                   const std::vector<double>& ps) {
  std::vector<CostPoint> out;
  for (unsigned h : heights) {
    for (double p : ps) out.push_back({h, p, expected_decryptions(h, p).normalized});
  }
  return out;
}

}  // namespace alk::analytics
