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

#include "alk/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "alk/analytics.hpp"

namespace alk::sim {
namespace {

SimConfig small_config() {
  SimConfig c;
  c.seed = 7;
  c.users = 1440;  // 50 / 11h * 1440 = ~1.8 whites per second
  c.gray_rate_per_sec = 2;
  c.epochs = 6;
  c.epoch.bucket_count = 64;
  c.white_pool = 16;
  return c;
}

TEST(Schedule, ZeroRatesGiveEmptyEpochs) {
  SimConfig c;
  c.epochs = 50;
  TrafficSchedule s = gen_schedule(c);
  ASSERT_EQ(s.epochs.size(), 50u);
  EXPECT_EQ(s.count(false) + s.count(true), 0u);
}

TEST(Schedule, PoissonMeanAndVariance) {
  SimConfig c;
  c.users = 7920;  // exactly 10 whites per second
  c.gray_rate_per_sec = 3;
  c.epochs = 10000;
  EXPECT_DOUBLE_EQ(c.white_rate_per_sec(), 10.0);
  TrafficSchedule s = gen_schedule(c);
  double sum = 0, sq = 0, gray = 0;
  for (const auto& e : s.epochs) {
    double w = 0;
    for (const Event& ev : e) {
      w += !ev.gray;
      gray += ev.gray;
      EXPECT_GE(ev.offset, 0);
      EXPECT_LT(ev.offset, 1);
    }
    sum += w;
    sq += w * w;
  }
  double mean = sum / 10000;
  double var = sq / 10000 - mean * mean;
  EXPECT_NEAR(mean, 10.0, 0.1);
  EXPECT_NEAR(var / mean, 1.0, 0.05);
  EXPECT_NEAR(gray / 10000, 3.0, 0.03);
}

TEST(Schedule, OffsetsSortedAndFixedGrayCount) {
  SimConfig c;
  c.users = 7920;
  c.gray_rate_per_sec = 3;
  c.gray_arrivals = Arrivals::kFixed;
  c.whistleblowers = 4;
  c.epochs = 100;
  for (const auto& e : gen_schedule(c).epochs) {
    uint64_t g = 0;
    for (size_t j = 0; j < e.size(); ++j) {
      g += e[j].gray;
      if (e[j].gray) EXPECT_LT(e[j].whistleblower, 4u);
      if (j > 0) EXPECT_LE(e[j - 1].offset, e[j].offset);
    }
    EXPECT_EQ(g, 3u);
  }
}

TEST(Schedule, SameSeedSameSchedule) {
  SimConfig c = small_config();
  c.epochs = 20;
  TrafficSchedule a = gen_schedule(c), b = gen_schedule(c);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (size_t e = 0; e < a.epochs.size(); ++e) {
    ASSERT_EQ(a.epochs[e].size(), b.epochs[e].size());
    for (size_t j = 0; j < a.epochs[e].size(); ++j) {
      EXPECT_EQ(a.epochs[e][j].offset, b.epochs[e][j].offset);
      EXPECT_EQ(a.epochs[e][j].gray, b.epochs[e][j].gray);
    }
  }
}

TEST(Config, Validation) {
  SimConfig c;
  c.loss_rate = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = SimConfig{};
  c.gray_rate_per_sec = 1;
  c.whistleblowers = 0;
  EXPECT_THROW(c.validate(), Error);
  c = SimConfig{};
  c.epoch.split_count = 5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(RunSim, WhitesOnlyRecoverNothing) {
  SimConfig c = small_config();
  c.gray_rate_per_sec = 0;
  Metrics m = run_sim(c);
  ASSERT_TRUE(m.valid) << m.error;
  EXPECT_GT(m.sent_white, 0u);
  EXPECT_EQ(m.sent_gray, 0u);
  EXPECT_EQ(m.recovered, 0u);
  EXPECT_EQ(m.blacks, 0u);
  EXPECT_EQ(m.full_decryptions, 0u);
  EXPECT_EQ(m.soundness_violations, 0u);
}

TEST(RunSim, GraysRecoveredSoundly) {
  SimConfig c = small_config();
  Metrics m = run_sim(c);
  ASSERT_TRUE(m.valid) << m.error;
  EXPECT_EQ(m.sent_gray, m.delivered_gray);
  EXPECT_GT(m.recovered, 0u);
  EXPECT_LE(m.recovered, m.delivered_gray);
  EXPECT_EQ(m.recovered + m.unrecovered_gray, m.delivered_gray);
  EXPECT_EQ(m.soundness_violations, 0u);
  EXPECT_GT(m.per_chunk_recovery_rate, 0.8);
}

TEST(RunSim, Deterministic) {
  SimConfig c = small_config();
  c.loss_rate = 0.2;
  Metrics a = run_sim(c), b = run_sim(c);
  ASSERT_TRUE(a.valid);
  EXPECT_TRUE(a.same_outcome(b));
  EXPECT_GT(a.lost_white + a.lost_gray, 0u);
  c.seed = 8;
  EXPECT_FALSE(a.same_outcome(run_sim(c)));
}

TEST(RunSim, SocketsMatchInProcess) {
  SimConfig c = small_config();
  c.epochs = 3;
  Metrics a = run_sim(c);
  c.topology = Topology::kSockets;
  Metrics b = run_sim(c);
  ASSERT_TRUE(b.valid) << b.error;
  EXPECT_EQ(a.sent_gray, b.sent_gray);
  EXPECT_EQ(a.sent_white, b.sent_white);
  EXPECT_EQ(b.soundness_violations, 0u);
  EXPECT_GT(b.recovered, 0u);
}

TEST(RunSim, FileDisclosureEndToEnd) {
  SimConfig c = small_config();
  c.file_bytes = 2000;
  c.gray_rate_per_sec = 8;
  c.epoch.bucket_count = 256;
  c.epochs = 12;
  Metrics m = run_sim(c);
  ASSERT_TRUE(m.valid) << m.error;
  EXPECT_EQ(m.files_expected, 1u);
  EXPECT_EQ(m.files_completed, 1u);
  EXPECT_EQ(m.files_bit_exact, 1u);
  EXPECT_EQ(m.files_corrupt, 0u);
  EXPECT_EQ(m.soundness_violations, 0u);
}

TEST(RunSim, FastPathDeploymentLoad) {
  SimConfig c;
  c.users = 138e6;
  c.gray_rate_per_sec = 82;
  c.gray_arrivals = Arrivals::kFixed;
  c.epochs = 600;
  c.fast_path = true;
  Metrics m = run_sim(c);
  ASSERT_TRUE(m.valid);
  EXPECT_EQ(m.sent_gray, 82u * 600);
  EXPECT_NEAR(m.sent_white / 600.0, 174242.4, 100);
  EXPECT_NEAR(m.per_chunk_recovery_rate, 0.90, 0.02);
  EXPECT_GT(m.blacks, 0u);
  EXPECT_TRUE(m.same_outcome(run_sim(c)));
}

TEST(RunSim, FastPathAgreesWithCrypto) {
  SimConfig c;
  c.gray_rate_per_sec = 40;
  c.epoch.bucket_count = 256;
  c.epochs = 8;
  c.white_pool = 8;
  Metrics crypto = run_sim(c);
  c.fast_path = true;
  c.epochs = 2000;
  Metrics fast = run_sim(c);
  ASSERT_TRUE(crypto.valid) << crypto.error;
  EXPECT_EQ(crypto.soundness_violations, 0u);
  // Eight epochs leave a standard error near 0.01.
  EXPECT_NEAR(crypto.per_chunk_recovery_rate, fast.per_chunk_recovery_rate, 0.05);
  EXPECT_NEAR(fast.per_chunk_recovery_rate, analytics::p_recover(40, 256, 1), 0.01);
}

TEST(MeasureRecovery, Basics) {
  Rng rng(uint64_t{3});
  EXPECT_EQ(measure_recovery(1, 768, 1, 10, rng), 1.0);
  EXPECT_NEAR(measure_recovery(82, 768, 1, 20000, rng), 0.900, 0.01);
  EXPECT_GT(measure_recovery(200, 768, 2, 2000, rng), measure_recovery(200, 768, 1, 2000, rng));
  EXPECT_THROW(measure_recovery(5, 768, 5, 1, rng), Error);
}

TEST(MeasureRecovery, AgreesWithClosedForm) {
  Rng rng(uint64_t{11});
  const uint64_t ks[] = {2, 10, 40, 82, 160};
  const uint32_t ms[] = {64, 128, 256, 512, 768};
  constexpr int kBatches = 20;
  constexpr uint64_t kTrials = 200;
  for (uint64_t k : ks) {
    for (uint32_t m : ms) {
      double sum = 0, sq = 0;
      for (int b = 0; b < kBatches; ++b) {
        double x = measure_recovery(k, m, 1, kTrials, rng);
        sum += x;
        sq += x * x;
      }
      double mean = sum / kBatches;
      double sd = std::sqrt(std::max(0.0, (sq - kBatches * mean * mean) / (kBatches - 1)));
      double se = std::max(sd / std::sqrt(kBatches), 1e-4);
      EXPECT_NEAR(mean, analytics::p_recover(k, m, 1), 3 * se) << "k=" << k << " m=" << m;
    }
  }
}

}  // namespace
}  // namespace alk::sim
