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

// Deterministic traffic generation and end-to-end experiments.

#include <cstdint>
#include <string>
#include <vector>

#include "alk/relay.hpp"
#include "alk/rng.hpp"

namespace alk::sim {

enum class Topology { kInProcess, kSockets };
enum class Arrivals { kPoisson, kFixed };

struct SimConfig {
  uint64_t seed = 1;
  double users = 0;
  double transmissions_per_user_day = 50;
  double active_window_hours = 11;
  uint32_t whistleblowers = 1;
  double gray_rate_per_sec = 0;
  uint64_t epochs = 10;
  relay::EpochConfig epoch;
  Topology topology = Topology::kInProcess;
  Arrivals gray_arrivals = Arrivals::kPoisson;

  // Fraction of submissions lost between client and guard.
  double loss_rate = 0;
  unsigned key_bits = 512;
  uint32_t s_data = 2;
  unsigned tree_height = 8;
  unsigned workers = 1;
  // Sealed whites are drawn from a pool of this many fresh encryptions.
  uint32_t white_pool = 256;
  // 0: whistleblowers send fresh synthetic chunks. Otherwise each prepares
  // a random file of this size and falls back to whites once it is spent.
  uint64_t file_bytes = 0;
  double rho = 0.9;
  double delta = 0x1p-20;
  // Skip the crypto: grays are thrown into buckets directly and whites are
  // only counted.
  bool fast_path = false;

  // Users spread over the active window, per second.
  double white_rate_per_sec() const;
  // Throws alk::Error on negative rates or an invalid epoch layout.
  void validate() const;
};

struct Event {
  double offset = 0;  // seconds into the epoch
  bool gray = false;
  uint32_t whistleblower = 0;
};

// Streams per-epoch submission events; same seed, same events.
class ScheduleGenerator {
 public:
  ScheduleGenerator(const SimConfig& config, Rng rng);
  std::vector<Event> next_epoch();
  // Just the white and gray counts of the next epoch.
  std::pair<uint64_t, uint64_t> next_counts();

 private:
  double white_mean_;
  double gray_mean_;
  Arrivals gray_arrivals_;
  uint32_t whistleblowers_;
  double epoch_seconds_;
  Rng rng_;
};

struct TrafficSchedule {
  std::vector<std::vector<Event>> epochs;

  uint64_t count(bool gray) const;
};

TrafficSchedule gen_schedule(const SimConfig& config);

struct Metrics {
  uint64_t sent_white = 0;
  uint64_t sent_gray = 0;
  uint64_t lost_white = 0;
  uint64_t lost_gray = 0;
  uint64_t delivered_gray = 0;
  uint64_t recovered = 0;
  uint64_t unrecovered_gray = 0;
  uint64_t duplicates = 0;
  uint64_t blacks = 0;
  uint64_t tag_decryptions = 0;
  uint64_t full_decryptions = 0;
  uint64_t soundness_violations = 0;
  uint64_t files_expected = 0;
  uint64_t files_completed = 0;
  uint64_t files_bit_exact = 0;
  uint64_t files_corrupt = 0;
  double per_chunk_recovery_rate = 0;
  double throughput = 0;  // submissions per wall-clock second
  double latency_p50_ms = 0;
  double latency_p99_ms = 0;
  bool valid = true;
  std::string error;

  // Equality on everything except the wall-clock fields.
  bool same_outcome(const Metrics& other) const;
};

Metrics run_sim(const SimConfig& config);

// Balls into bins: per-chunk probability that one of k grays shares no
// bucket with another gray in at least one of the t sets, over `trials`
// epochs.
double measure_recovery(uint64_t k_gray, uint32_t bucket_count, uint32_t split_count,
                        uint64_t trials, Rng& rng);

}  // namespace alk::sim
