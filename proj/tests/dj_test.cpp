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

#include "alk/dj.hpp"

#include <gtest/gtest.h>

#include <array>

#include "test_keys.hpp"

namespace alk::dj {
namespace {

using alk::testing::tiny_keys;
using alk::testing::toy_keys;

mpz_class random_unit(const PublicKey& pk, Rng& rng) {
  for (;;) {
    mpz_class b = rng.below(pk.modulus());
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), b.get_mpz_t(), pk.modulus().get_mpz_t());
    if (b > 0 && g == 1) return b;
  }
}

mpz_class random_payload(const PublicKey& pk, Rng& rng) {
  return from_be(rng.bytes(pk.data_bytes()));
}

TEST(PsiTest, TinyModulusValues) {
  const auto& keys = tiny_keys();
  EXPECT_EQ(psi(keys.pub, 1, 0, 1), 1);
  EXPECT_EQ(psi(keys.pub, 1, 1, 1), 36);
  // 36^2 mod 1225
  EXPECT_EQ(psi(keys.pub, 1, 2, 1), 71);

  PsiPreimage pre = psi_inv(keys.priv, 1, 71);
  EXPECT_EQ(pre.a, 2);
  EXPECT_EQ(pre.b, 1);
  pre = psi_inv(keys.priv, 1, 1);
  EXPECT_EQ(pre.a, 0);
  EXPECT_EQ(pre.b, 1);
}

TEST(PsiTest, TinyModulusExhaustiveRoundTrip) {
  const auto& keys = tiny_keys();
  for (int s = 1; s <= 2; ++s) {
    mpz_class ns = keys.pub.modulus_power(s);
    for (mpz_class a = 0; a < ns; a += 7) {
      for (int b = 1; b < 35; ++b) {
        if (b % 5 == 0 || b % 7 == 0) continue;
        PsiPreimage pre = psi_inv(keys.priv, s, psi(keys.pub, s, a, b));
        ASSERT_EQ(pre.a, a);
        ASSERT_EQ(pre.b, b);
      }
    }
  }
}

TEST(PsiTest, RejectsOutOfDomainInputs) {
  const auto& keys = tiny_keys();
  EXPECT_THROW(psi(keys.pub, 1, 35, 1), Error);
  EXPECT_THROW(psi(keys.pub, 1, -1, 1), Error);
  EXPECT_THROW(psi(keys.pub, 1, 3, 7), Error);
  EXPECT_THROW(psi_inv(keys.priv, 1, 5), Error);
  EXPECT_THROW(psi_inv(keys.priv, 1, 1225), Error);
}

TEST(PsiTest, RandomRoundTripAtToySize) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{1});
  for (unsigned s : {1u, 2u, 3u}) {
    for (int trial = 0; trial < 100; ++trial) {
      mpz_class a = rng.below(keys.pub.modulus_power(s));
      mpz_class b = random_unit(keys.pub, rng);
      PsiPreimage pre = psi_inv(keys.priv, s, psi(keys.pub, s, a, b));
      ASSERT_EQ(pre.a, a);
      ASSERT_EQ(pre.b, b);
    }
  }
}

TEST(PsiTest, HomomorphismProperty) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{2});
  for (unsigned s : {1u, 2u}) {
    mpz_class half = keys.pub.modulus_power(s) / 2;
    mpz_class mod = keys.pub.modulus_power(s + 1);
    for (int trial = 0; trial < 50; ++trial) {
      mpz_class a = rng.below(half), a2 = rng.below(half);
      mpz_class b = random_unit(keys.pub, rng), b2 = random_unit(keys.pub, rng);
      mpz_class lhs = psi(keys.pub, s, a, b) * psi(keys.pub, s, a2, b2) % mod;
      mpz_class bb = b * b2 % keys.pub.modulus();
      ASSERT_EQ(lhs, psi(keys.pub, s, a + a2, bb));
    }
  }
}

TEST(KeygenTest, ToyKeySatisfiesInvariants) {
  const auto& keys = toy_keys();
  const PublicKey& pk = keys.pub;
  EXPECT_EQ(pk.modulus_bits(), 512u);
  EXPECT_EQ(keys.priv.p() * keys.priv.q(), pk.modulus());
  for (const mpz_class* prime : {&keys.priv.p(), &keys.priv.q()}) {
    mpz_class half = (*prime - 1) / 2;
    EXPECT_NE(mpz_probab_prime_p(half.get_mpz_t(), 25), 0) << "not a safe prime";
  }
  EXPECT_EQ(mpz_legendre(pk.g().get_mpz_t(), keys.priv.p().get_mpz_t()), 1);
  EXPECT_EQ(mpz_legendre(pk.h().get_mpz_t(), keys.priv.q().get_mpz_t()), 1);
  EXPECT_TRUE(pk.supports_chunks());
  EXPECT_EQ(pk.chunk_bytes(), 320u);
  EXPECT_EQ(pk.data_bytes(), 127u);
}

TEST(KeygenTest, DistinctSeedsGiveDistinctModuli) {
  Rng a(uint64_t{11}), b(uint64_t{12});
  EXPECT_NE(keygen(512, 1, a).pub.modulus(), keygen(512, 1, b).pub.modulus());
}

TEST(KeygenTest, SameSeedIsDeterministic) {
  Rng a(uint64_t{13}), b(uint64_t{13});
  EXPECT_EQ(keygen(512, 1, a).pub, keygen(512, 1, b).pub);
}

TEST(KeygenTest, RejectsUnsupportedSizes) {
  Rng rng(uint64_t{3});
  EXPECT_THROW(keygen(768, 2, rng), Error);
  EXPECT_THROW(keygen(512, 0, rng), Error);
}

TEST(KeygenTest, KeysSerializeRoundTrip) {
  const auto& keys = toy_keys();
  Bytes pub = keys.pub.serialize();
  EXPECT_EQ(std::string(pub.begin(), pub.begin() + 4), "ALK1");
  EXPECT_EQ(PublicKey::parse(pub), keys.pub);
  PrivateKey sk = PrivateKey::parse(keys.priv.serialize());
  EXPECT_EQ(sk.p(), keys.priv.p());
  EXPECT_EQ(sk.lambda(), keys.priv.lambda());
  pub.push_back(0);
  EXPECT_THROW(PublicKey::parse(pub), Error);
  pub[0] = 'X';
  EXPECT_THROW(PublicKey::parse(pub), Error);
}

TEST(KeygenTest, FromPartsValidates) {
  EXPECT_THROW(PublicKey::from_parts(35, 1, 5, 16), Error);
  EXPECT_THROW(PublicKey::from_parts(35, 0, 4, 16), Error);
  EXPECT_THROW(PublicKey::from_parts(35, 1, 1, 16), Error);
  PublicKey pub = PublicKey::from_parts(35, 1, 4, 16);
  EXPECT_THROW(PrivateKey::from_primes(pub, 5, 5), Error);
  EXPECT_THROW(PrivateKey::from_primes(pub, 1, 35), Error);
  // 3 is not a square mod 5 or 7.
  EXPECT_THROW(PrivateKey::from_primes(PublicKey::from_parts(35, 1, 3, 16), 5, 7), Error);
}

TEST(ChunkMetaTest, PacksBigEndian) {
  ChunkMeta meta{0x0102030405060708ULL, 0x0a0b0c0d, 0x11121314};
  EXPECT_EQ(meta.r0().get_str(16), "102030405060708" "0a0b0c0d" "11121314");
  EXPECT_EQ(ChunkMeta::from_r0(meta.r0()), meta);
  EXPECT_THROW(ChunkMeta::from_r0(mpz_class(1) << 128), Error);
  Rng rng(uint64_t{4});
  EXPECT_NE(ChunkMeta::random(rng, 0, 1).k, 0u);
  EXPECT_THROW(ChunkMeta::random(rng, 0, 0), Error);
}

TEST(TagLayoutTest, DefaultWidths) {
  TagLayout layout = TagLayout::for_modulus(2048, 40);
  EXPECT_EQ(layout.r1_bits, 512u);
  EXPECT_EQ(layout.r0_shift(), 552u);
  EXPECT_EQ(layout.r0_field_bits(), 168u);
  EXPECT_EQ(layout.total_bits(), 720u);
  EXPECT_EQ(TagLayout::for_modulus(512, 40).r1_bits, 256u);
}

TEST(TagLayoutTest, FieldSeparationAgainstBigIntegerOracle) {
  TagLayout layout = TagLayout::for_modulus(2048, 40);
  Rng rng(uint64_t{5});
  // Random multiset of 1000 tags, plus the extreme 2^B copies of maximal fields.
  mpz_class sum = 0, r0_sum = 0, r1_sum = 0;
  for (int j = 0; j < 1000; ++j) {
    mpz_class r0 = rng.bits(kR0Bits), r1 = rng.bits(layout.r1_bits);
    sum += TagPlaintext::compose(layout, r0, r1).value;
    r0_sum += r0;
    r1_sum += r1;
  }
  TagPlaintext agg{sum};
  EXPECT_EQ(agg.r0_field(layout), r0_sum);
  EXPECT_EQ(agg.r1_field(layout), r1_sum);

  mpz_class r0_max = (mpz_class(1) << kR0Bits) - 1;
  mpz_class r1_max = (mpz_class(1) << layout.r1_bits) - 1;
  mpz_class copies = (mpz_class(1) << layout.guard_bits);
  TagPlaintext extreme{TagPlaintext::compose(layout, r0_max, r1_max).value * copies};
  EXPECT_EQ(extreme.r0_field(layout), r0_max * copies);
  EXPECT_EQ(extreme.r1_field(layout), r1_max * copies);
  EXPECT_LE(mpz_sizeinbase(extreme.value.get_mpz_t(), 2), layout.total_bits());
}

TEST(ChkHashTest, DeterministicTruncatedAndCollisionFree) {
  const PublicKey& pk = toy_keys().pub;
  Rng rng(uint64_t{6});
  mpz_class m = random_payload(pk, rng);
  mpz_class r0 = rng.bits(128);
  EXPECT_EQ(chk_hash(pk, m, r0), chk_hash(pk, m, r0));
  mpz_class base = chk_hash(pk, m, r0);
  for (int trial = 0; trial < 10000; ++trial) {
    mpz_class other = rng.bits(128);
    if (other == r0) continue;
    mpz_class h = chk_hash(pk, m, other);
    ASSERT_NE(h, base);
    ASSERT_LT(h, mpz_class(1) << pk.hash_bits());
  }
  EXPECT_THROW(chk_hash(pk, m, mpz_class(1) << 128), Error);
}

TEST(EncryptionTest, FastPathsMatchPsi) {
  const PublicKey& pk = toy_keys().pub;
  Rng rng(uint64_t{7});
  const mpz_class& n = pk.modulus();
  for (int trial = 0; trial < 20; ++trial) {
    mpz_class m = random_payload(pk, rng);
    mpz_class chk = rng.bits(pk.hash_bits());
    mpz_class r1 = rng.bits(pk.layout().r1_bits);
    mpz_class b = 0;
    mpz_class hc, gr;
    mpz_powm(hc.get_mpz_t(), pk.h().get_mpz_t(), chk.get_mpz_t(), n.get_mpz_t());
    mpz_powm(gr.get_mpz_t(), pk.g().get_mpz_t(), r1.get_mpz_t(), n.get_mpz_t());
    b = hc * gr % n;
    EXPECT_EQ(detail::data_component(pk, m, chk, r1), psi(pk, pk.s_data(), m, b));

    TagPlaintext tag = TagPlaintext::compose(pk.layout(), rng.bits(128), r1);
    mpz_class r2 = rng.bits(pk.layout().r1_bits);
    mpz_powm(gr.get_mpz_t(), pk.g().get_mpz_t(), r2.get_mpz_t(), n.get_mpz_t());
    EXPECT_EQ(detail::tag_component(pk, tag, r2), psi(pk, 1, tag.value, gr));
  }
}

TEST(EncryptionTest, DataRoundTrip) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{8});
  for (int trial = 0; trial < 100; ++trial) {
    mpz_class m = random_payload(keys.pub, rng);
    ChunkMeta meta = ChunkMeta::random(rng, static_cast<uint32_t>(rng.next_u64()),
                                       1 + static_cast<uint32_t>(rng.below(1u << 31)));
    Chunk chunk = enc_data(keys.pub, m, meta, rng);
    auto out = dec_vrfy(keys.priv, chunk);
    ASSERT_TRUE(out.has_value());
    ASSERT_EQ(out->m, m);
    ASSERT_EQ(out->meta, meta);
    WhiteTest wt = is_white(keys.priv, chunk);
    ASSERT_FALSE(wt.white);
    ASSERT_EQ(wt.tag.r0_field(keys.pub.layout()), meta.r0());
  }
}

TEST(EncryptionTest, ProbabilisticAndRejectsBadInputs) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{9});
  ChunkMeta meta{42, 0, 1};
  EXPECT_NE(enc_data(keys.pub, 5, meta, rng), enc_data(keys.pub, 5, meta, rng));
  EXPECT_THROW(enc_data(keys.pub, keys.pub.modulus_power(2), meta, rng), Error);
  EXPECT_THROW(enc_data(keys.pub, 5, ChunkMeta{0, 0, 1}, rng), Error);
  EXPECT_THROW(enc_data(tiny_keys().pub, 1, meta, rng), Error);
}

TEST(EncryptionTest, ZeroIsWhite) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{10});
  Chunk z = enc_zero(keys.pub, rng);
  WhiteTest wt = is_white(keys.priv, z);
  EXPECT_TRUE(wt.white);
  EXPECT_NE(wt.tag.r1_field(keys.pub.layout()), 0);
  auto out = dec_vrfy(keys.priv, z);
  ASSERT_TRUE(out.has_value());
  EXPECT_TRUE(out->white());
  EXPECT_EQ(out->m, 0);
  EXPECT_TRUE(out->meta.is_zero());

  Chunk agg = Chunk::identity();
  for (int j = 0; j < 1000; ++j) aggregate_into(keys.pub, agg, enc_zero(keys.pub, rng));
  EXPECT_TRUE(is_white(keys.priv, agg).white);
  ASSERT_TRUE(dec_vrfy(keys.priv, agg).has_value());
  EXPECT_TRUE(dec_vrfy(keys.priv, agg)->white());
}

TEST(AggregateTest, IdentityAndWhiteAbsorption) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{11});
  mpz_class m = random_payload(keys.pub, rng);
  ChunkMeta meta = ChunkMeta::random(rng, 3, 9);
  Chunk gray = enc_data(keys.pub, m, meta, rng);
  EXPECT_EQ(aggregate(keys.pub, gray, Chunk::identity()), gray);
  auto out = dec_vrfy(keys.priv, aggregate(keys.pub, gray, enc_zero(keys.pub, rng)));
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->m, m);
  EXPECT_EQ(out->meta, meta);

  // Identity decrypts as a white: h^0 * g^0 = 1.
  auto id = dec_vrfy(keys.priv, Chunk::identity());
  ASSERT_TRUE(id.has_value());
  EXPECT_TRUE(id->white());
}

TEST(AggregateTest, CommutativeAndAssociative) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{12});
  Chunk a = enc_zero(keys.pub, rng), b = enc_zero(keys.pub, rng);
  Chunk c = enc_data(keys.pub, 77, ChunkMeta{5, 1, 2}, rng);
  EXPECT_EQ(aggregate(keys.pub, a, b), aggregate(keys.pub, b, a));
  EXPECT_EQ(aggregate(keys.pub, aggregate(keys.pub, a, b), c),
            aggregate(keys.pub, a, aggregate(keys.pub, b, c)));
}

TEST(AggregateTest, GrayWithManyWhitesRecovers) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{13});
  mpz_class m = random_payload(keys.pub, rng);
  ChunkMeta meta = ChunkMeta::random(rng, 17, 100);
  Chunk agg = enc_data(keys.pub, m, meta, rng);
  for (int j = 0; j < (1 << 10); ++j) aggregate_into(keys.pub, agg, enc_zero(keys.pub, rng));
  auto out = dec_vrfy(keys.priv, agg);
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->m, m);
  EXPECT_EQ(out->meta, meta);
}

TEST(AggregateTest, TwoGraysAreRejected) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{14});
  for (int trial = 0; trial < 50; ++trial) {
    Chunk x = enc_data(keys.pub, random_payload(keys.pub, rng), ChunkMeta::random(rng, 0, 4), rng);
    Chunk y = enc_data(keys.pub, random_payload(keys.pub, rng), ChunkMeta::random(rng, 1, 4), rng);
    Chunk agg = aggregate(keys.pub, aggregate(keys.pub, x, y), enc_zero(keys.pub, rng));
    ASSERT_FALSE(dec_vrfy(keys.priv, agg).has_value());
    ASSERT_FALSE(is_white(keys.priv, agg).white);
  }
}

TEST(AggregateTest, SameDataTwiceIsRejected) {
  // Same (m, meta) twice sums to (2m, 2r0); H(2m, 2r0) != 2 H(m, r0).
  const auto& keys = toy_keys();
  Rng rng(uint64_t{15});
  ChunkMeta meta = ChunkMeta::random(rng, 0, 4);
  Chunk x = enc_data(keys.pub, 1234, meta, rng);
  Chunk y = enc_data(keys.pub, 1234, meta, rng);
  EXPECT_FALSE(dec_vrfy(keys.priv, aggregate(keys.pub, x, y)).has_value());
}

TEST(AggregateTest, TagSumMatchesIntegerOracle) {
  const auto& keys = toy_keys();
  const TagLayout& layout = keys.pub.layout();
  Rng rng(uint64_t{16});
  ChunkMeta m1 = ChunkMeta::random(rng, 1, 10), m2 = ChunkMeta::random(rng, 2, 10);
  Chunk agg = aggregate(keys.pub, enc_data(keys.pub, 1, m1, rng), enc_data(keys.pub, 2, m2, rng));
  for (int j = 0; j < 100; ++j) aggregate_into(keys.pub, agg, enc_zero(keys.pub, rng));
  WhiteTest wt = is_white(keys.priv, agg);
  EXPECT_FALSE(wt.white);
  EXPECT_EQ(wt.tag.r0_field(layout), m1.r0() + m2.r0());
}

TEST(AggregateTest, RejectsOutOfRangeComponents) {
  const auto& keys = toy_keys();
  Chunk bad{keys.pub.modulus_power(3), 1};
  EXPECT_THROW(aggregate(keys.pub, bad, Chunk::identity()), Error);
  EXPECT_THROW(aggregate(keys.pub, Chunk::identity(), Chunk{1, 0}), Error);
}

TEST(DecVrfyTest, BitFlipsInDataComponentAreRejected) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{17});
  Chunk chunk = enc_data(keys.pub, random_payload(keys.pub, rng), ChunkMeta::random(rng, 0, 3), rng);
  Bytes wire = serialize_chunk(keys.pub, chunk);
  size_t c_bits = keys.pub.c_bytes() * 8;
  for (int trial = 0; trial < 200; ++trial) {
    Bytes mutated = wire;
    size_t bit = rng.below(c_bits);
    mutated[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    Chunk tampered{from_be(ByteView(mutated).first(keys.pub.c_bytes())), chunk.t};
    if (tampered.c == 0 || tampered.c >= keys.pub.modulus_power(3)) continue;
    ASSERT_FALSE(dec_vrfy(keys.priv, tampered).has_value()) << "bit " << bit;
  }
}

TEST(DecVrfyTest, NonUnitsAreInvalidNotFatal) {
  const auto& keys = toy_keys();
  Chunk chunk{keys.priv.p(), 1};
  EXPECT_FALSE(dec_vrfy(keys.priv, chunk).has_value());
}

TEST(SerializationTest, FixedWidthAndRoundTrip) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{18});
  Chunk z = enc_zero(keys.pub, rng);
  Bytes wire = serialize_chunk(keys.pub, z);
  EXPECT_EQ(wire.size(), keys.pub.chunk_bytes());
  EXPECT_EQ(parse_chunk(keys.pub, wire), z);
  EXPECT_EQ(serialize_chunk(keys.pub, Chunk::identity()).size(), keys.pub.chunk_bytes());
  wire.pop_back();
  EXPECT_THROW(parse_chunk(keys.pub, wire), Error);
  EXPECT_THROW(parse_chunk(keys.pub, Bytes(keys.pub.chunk_bytes(), 0)), Error);
}

TEST(UnlinkabilityTest, WhiteAndGrayByteHistogramsMatch) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{19});
  std::array<double, 256> white{}, gray{};
  for (int j = 0; j < 300; ++j) {
    Bytes w = serialize_chunk(keys.pub, enc_zero(keys.pub, rng));
    Bytes g = serialize_chunk(
        keys.pub, enc_data(keys.pub, random_payload(keys.pub, rng), ChunkMeta::random(rng, j, 300), rng));
    ASSERT_EQ(w.size(), g.size());
    for (uint8_t b : w) white[b] += 1;
    for (uint8_t b : g) gray[b] += 1;
  }
  // Two-sample chi-square with equal totals, 255 degrees of freedom; the
  // 99.9% quantile is 330.5.
  double stat = 0;
  for (int b = 0; b < 256; ++b) {
    if (white[b] + gray[b] > 0) stat += (white[b] - gray[b]) * (white[b] - gray[b]) / (white[b] + gray[b]);
  }
  EXPECT_LT(stat, 330.5);
}

}  // namespace
}  // namespace alk::dj
