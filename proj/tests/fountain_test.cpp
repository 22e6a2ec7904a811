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

#include "alk/fountain.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alk/rng.hpp"

namespace alk::fountain {
namespace {

SourceBlockSet random_set(Rng& rng, uint32_t n, size_t block_size) {
  SourceBlockSet set;
  set.block_size = block_size;
  for (uint32_t j = 0; j < n; ++j) set.blocks.push_back(rng.bytes(block_size));
  return set;
}

// Feeds indices base, base+1, ... until full rank; returns packets used.
uint32_t packets_to_full_rank(uint64_t k, uint32_t n, uint32_t base) {
  Decoder dec(k, n, 1);
  uint32_t used = 0;
  for (uint32_t i = base; !dec.decodable(); ++i, ++used) {
    dec.add_row(coeff_vector(k, i, n), Bytes{0});
  }
  return used;
}

TEST(CoeffVectorTest, FrozenValues) {
  EXPECT_EQ(coeff_vector(1, 0, 16).to_string(), "0100010010010101");
  EXPECT_EQ(coeff_vector(0x0123456789abcdefULL, 7, 70).to_string(),
            "1100011010111010011001011011011011011001001010111101111000000101000010");
  EXPECT_EQ(coeff_vector(42, 3, 4).to_string(), "0111");
}

TEST(CoeffVectorTest, SingleBlockAlwaysOne) {
  for (uint32_t i = 0; i < 200; ++i) {
    EXPECT_EQ(coeff_vector(5, i, 1).to_string(), "1");
  }
}

TEST(CoeffVectorTest, DeterministicAndNonzero) {
  Rng rng(uint64_t{3});
  for (int trial = 0; trial < 500; ++trial) {
    uint64_t k = rng.next_u64();
    uint32_t i = static_cast<uint32_t>(rng.next_u64());
    uint32_t n = 1 + static_cast<uint32_t>(rng.below(300));
    BitVector a = coeff_vector(k, i, n);
    EXPECT_EQ(a, coeff_vector(k, i, n));
    EXPECT_EQ(a.size(), n);
    EXPECT_FALSE(a.none());
  }
  EXPECT_THROW(coeff_vector(1, 0, 0), Error);
}

TEST(CoeffVectorTest, BitBalanceChiSquare) {
  constexpr uint32_t kN = 64;
  constexpr uint32_t kIndices = 10000;
  std::vector<double> ones(kN, 0);
  for (uint32_t i = 0; i < kIndices; ++i) {
    BitVector v = coeff_vector(0xfeed, i, kN);
    for (uint32_t j = 0; j < kN; ++j) ones[j] += v.get(j);
  }
  double chi2 = 0;
  const double expected = kIndices / 2.0;
  for (double o : ones) {
    chi2 += 2 * (o - expected) * (o - expected) / expected;
  }
  // chi-square, 64 degrees of freedom, 99.9% quantile
  EXPECT_LT(chi2, 104.716);
}

TEST(BitVectorTest, Basics) {
  BitVector v = BitVector::from_string("0010000000000000000000000000000000000000000000000000000000000000001");
  EXPECT_EQ(v.size(), 67u);
  EXPECT_EQ(v.count(), 2u);
  EXPECT_EQ(v.find_next(0), 2u);
  EXPECT_EQ(v.find_next(3), 66u);
  EXPECT_EQ(v.find_next(67), BitVector::npos);
  v ^= v;
  EXPECT_TRUE(v.none());
  EXPECT_THROW(BitVector::from_string("01x"), Error);
  BitVector w(3);
  EXPECT_THROW(w ^= BitVector(4), Error);
}

TEST(SplitTest, PadsFinalBlock) {
  Bytes data(10);
  std::iota(data.begin(), data.end(), 1);
  SourceBlockSet set = SourceBlockSet::split(data, 4);
  ASSERT_EQ(set.count(), 3u);
  EXPECT_EQ(set.blocks[2], (Bytes{9, 10, 0, 0}));
  EXPECT_THROW(SourceBlockSet::split({}, 4), Error);
  EXPECT_EQ(SourceBlockSet::split(Bytes(2303), kDefaultBlockSize).count(), 1u);
  EXPECT_EQ(SourceBlockSet::split(Bytes(2304), kDefaultBlockSize).count(), 2u);
}

TEST(EncodeTest, SingleBlockPacketIsTheBlock) {
  Rng rng(uint64_t{1});
  SourceBlockSet set = random_set(rng, 1, 2303);
  for (uint32_t i = 0; i < 10; ++i) {
    EXPECT_EQ(encode_packet(set, 77, i).payload, set.blocks[0]);
  }
}

TEST(EncodeTest, UnitVectorSelectsBlock) {
  Rng rng(uint64_t{2});
  SourceBlockSet set = random_set(rng, 5, 32);
  for (uint32_t j = 0; j < 5; ++j) {
    BitVector e(5);
    e.set(j);
    EXPECT_EQ(combine(set, e), set.blocks[j]);
  }
}

TEST(EncodeTest, MatchesXorOracle) {
  Rng rng(uint64_t{4});
  SourceBlockSet set = random_set(rng, 4, 64);
  for (uint32_t i = 0; i < 50; ++i) {
    std::string bits = coeff_vector(42, i, 4).to_string();
    Bytes expected(64, 0);
    for (size_t j = 0; j < 4; ++j) {
      if (bits[j] != '1') continue;
      for (size_t b = 0; b < 64; ++b) expected[b] ^= set.blocks[j][b];
    }
    FountainPacket p = encode_packet(set, 42, i);
    EXPECT_EQ(p.index, i);
    EXPECT_EQ(p.payload, expected);
  }
}

TEST(DecoderTest, DuplicateLeavesRankUnchanged) {
  Rng rng(uint64_t{5});
  SourceBlockSet set = random_set(rng, 8, 16);
  Decoder dec(9, 8, 16);
  FountainPacket p = encode_packet(set, 9, 0);
  EXPECT_EQ(dec.add(p), 1u);
  EXPECT_EQ(dec.add(p), 1u);
  EXPECT_FALSE(dec.finish().has_value());
}

TEST(DecoderTest, TwoUnitRows) {
  Decoder dec(1, 2, 1);
  dec.add_row(BitVector::from_string("10"), Bytes{0xaa});
  EXPECT_EQ(dec.add_row(BitVector::from_string("01"), Bytes{0x55}), 2u);
  ASSERT_TRUE(dec.decodable());
  auto blocks = dec.finish();
  ASSERT_TRUE(blocks.has_value());
  EXPECT_EQ((*blocks)[0], Bytes{0xaa});
  EXPECT_EQ((*blocks)[1], Bytes{0x55});
}

TEST(DecoderTest, RejectsBadInput) {
  EXPECT_THROW(Decoder(1, 0, 4), Error);
  Decoder dec(1, 3, 4);
  EXPECT_THROW(dec.add_row(BitVector(3), Bytes(5)), Error);
  EXPECT_THROW(dec.add_row(BitVector(2), Bytes(4)), Error);
}

TEST(DecoderTest, ExactRoundTrip) {
  Rng rng(uint64_t{6});
  for (uint32_t n : {1u, 2u, 16u, 100u}) {
    SourceBlockSet set = random_set(rng, n, 2303);
    Decoder dec(1000 + n, n, 2303);
    uint32_t i = 0;
    while (!dec.decodable()) dec.add(encode_packet(set, 1000 + n, i++));
    auto blocks = dec.finish();
    ASSERT_TRUE(blocks.has_value());
    EXPECT_EQ(*blocks, set.blocks);
  }
}

TEST(DecoderTest, OrderIndependent) {
  Rng rng(uint64_t{7});
  SourceBlockSet set = random_set(rng, 12, 40);
  std::vector<FountainPacket> packets;
  for (uint32_t i = 0; i < 30; ++i) packets.push_back(encode_packet(set, 3, i));
  for (int perm = 0; perm < 20; ++perm) {
    std::shuffle(packets.begin(), packets.end(), rng);
    Decoder dec(3, 12, 40);
    for (const auto& p : packets) dec.add(p);
    auto blocks = dec.finish();
    ASSERT_TRUE(blocks.has_value());
    EXPECT_EQ(*blocks, set.blocks);
  }
}

TEST(DecoderTest, MeanOverheadNearOracle) {
  // Uniform nonzero vectors over GF(2)^8 reach full rank after 9.5653
  // packets on average.
  constexpr int kTrials = 4000;
  std::vector<uint32_t> used;
  double sum = 0;
  for (int t = 0; t < kTrials; ++t) {
    used.push_back(packets_to_full_rank(0x1000 + static_cast<uint64_t>(t), 8, 0));
    sum += used.back();
  }
  EXPECT_NEAR(sum / kTrials, 9.5653, 0.08);
  std::nth_element(used.begin(), used.begin() + kTrials / 2, used.end());
  uint32_t median = used[kTrials / 2];
  EXPECT_GE(median, 9u);
  EXPECT_LE(median, 10u);
}

TEST(DecoderTest, OverheadLaw) {
  constexpr int kTrials = 10000;
  for (uint32_t n : {4u, 16u, 64u}) {
    for (uint32_t e : {2u, 4u, 8u}) {
      int failures = 0;
      for (int t = 0; t < kTrials; ++t) {
        uint64_t k = (uint64_t{n} << 40) ^ (uint64_t{e} << 32) ^ static_cast<uint64_t>(t);
        Decoder dec(k, n, 1);
        for (uint32_t i = 0; i < n + e; ++i) dec.add_row(coeff_vector(k, i, n), Bytes{0});
        failures += !dec.decodable();
      }
      double bound = std::ldexp(1.0, -static_cast<int>(e));
      double slack = 3 * std::sqrt(bound * (1 - bound) / kTrials);
      EXPECT_LE(static_cast<double>(failures) / kTrials, bound + slack) << "n=" << n << " e=" << e;
    }
  }
}

}  // namespace
}  // namespace alk::fountain
