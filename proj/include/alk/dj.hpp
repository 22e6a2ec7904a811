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

// Aggregatable two-component Damgard-Jurik encryption.
//
// A chunk is a pair (c, t). The data component c encrypts the payload under
// exponent sData; its randomness is a Pedersen commitment h^chk * g^r1 to a
// hash of (payload, r0). The tag component t encrypts, under exponent 1, the
// integer r0 * 2^(r1_bits + B) + r1 where each field carries B guard bits, so
// up to 2^B chunks can be multiplied together before any field overflows.
// Multiplying chunks adds their plaintexts; a product with more than one data
// chunk fails verification.

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <optional>

#include "alk/bytes.hpp"
#include "alk/rng.hpp"

namespace alk::dj {

inline constexpr uint32_t kDefaultSData = 9;
inline constexpr uint32_t kDefaultGuardBits = 40;
inline constexpr unsigned kR0Bits = 128;
inline constexpr unsigned kMaxR1Bits = 512;

// Bit positions of the tag plaintext fields.
struct TagLayout {
  unsigned r1_bits = kMaxR1Bits;
  unsigned guard_bits = kDefaultGuardBits;

  unsigned r0_shift() const { return r1_bits + guard_bits; }
  unsigned r0_field_bits() const { return kR0Bits + guard_bits; }
  unsigned total_bits() const { return r0_shift() + r0_field_bits(); }

  // r1 is 512 bits for moduli of 1024 bits and up, half the modulus below.
  static TagLayout for_modulus(unsigned modulus_bits, unsigned guard_bits);
};

// File identifier, chunk index and source-block count, packed as k||i||n.
struct ChunkMeta {
  uint64_t k = 0;
  uint32_t i = 0;
  uint32_t n = 0;

  mpz_class r0() const;
  bool is_zero() const { return k == 0 && i == 0 && n == 0; }
  // Unpacks a value below 2^128.
  static ChunkMeta from_r0(const mpz_class& r0);
  // Fresh nonzero random k.
  static ChunkMeta random(Rng& rng, uint32_t i, uint32_t n);

  friend bool operator==(const ChunkMeta&, const ChunkMeta&) = default;
};

struct TagPlaintext {
  mpz_class value;

  static TagPlaintext compose(const TagLayout& layout, const mpz_class& r0, const mpz_class& r1);
  mpz_class r0_field(const TagLayout& layout) const;
  mpz_class r1_field(const TagLayout& layout) const;
};

class PublicKey {
 public:
  // Validates 1 < g, h < N, gcd(g, N) = gcd(h, N) = 1 and sData >= 1.
  static PublicKey from_parts(mpz_class n, uint32_t s_data, mpz_class g, mpz_class h,
                              uint32_t guard_bits = kDefaultGuardBits);

  const mpz_class& modulus() const;
  uint32_t s_data() const;
  const mpz_class& g() const;
  const mpz_class& h() const;
  uint32_t guard_bits() const;
  const TagLayout& layout() const;
  unsigned modulus_bits() const;
  // N^j, cached for j <= sData + 1.
  mpz_class modulus_power(unsigned j) const;

  // Byte width of an N-residue.
  size_t residue_bytes() const;
  // Width of the fixed serialization of a data plaintext (sData residues).
  size_t plaintext_bytes() const;
  // Payload bytes that always fit below N^sData.
  size_t data_bytes() const;
  size_t c_bytes() const;
  size_t t_bytes() const;
  size_t chunk_bytes() const { return c_bytes() + t_bytes(); }
  // Width of the commitment hash, |N|/16.
  unsigned hash_bits() const;
  // Whether the tag layout fits below N.
  bool supports_chunks() const;

  // "ALK1" magic, then length-prefixed big-endian N, sData, g, h, B.
  Bytes serialize() const;
  static PublicKey parse(ByteView bytes);
  // Parses the leading key and leaves the reader after field B.
  static PublicKey read(ByteReader& reader);

  friend bool operator==(const PublicKey& a, const PublicKey& b);

  struct State;
  const State& state() const { return *state_; }

 private:
  std::shared_ptr<State> state_;
};

class PrivateKey {
 public:
  // Validates p != q, p * q = N, primality, and that g and h are quadratic
  // residues modulo both primes.
  static PrivateKey from_primes(const PublicKey& pub, mpz_class p, mpz_class q);

  const PublicKey& pub() const;
  const mpz_class& p() const;
  const mpz_class& q() const;
  const mpz_class& lambda() const;

  // "ALS1" magic, the public key, then p and q.
  Bytes serialize() const;
  static PrivateKey parse(ByteView bytes);

  struct State;
  const State& state() const { return *state_; }

 private:
  std::shared_ptr<const State> state_;
};

struct KeyPair {
  PublicKey pub;
  PrivateKey priv;
};

// bits in {512, 1024, 2048}; N is a product of two distinct safe primes with
// their top two bits set, g the square of a random unit, h = g^x with x
// uniform in [1, N/4).
KeyPair keygen(unsigned bits, uint32_t s_data, Rng& rng);

// (1+N)^a * b^(N^s) mod N^(s+1).
mpz_class psi(const PublicKey& pk, unsigned s, const mpz_class& a, const mpz_class& b);

struct PsiPreimage {
  mpz_class a;
  mpz_class b;  // reduced mod N
};

PsiPreimage psi_inv(const PrivateKey& sk, unsigned s, const mpz_class& ciphertext);

// Only the plaintext half of psi_inv.
mpz_class psi_inv_plaintext(const PrivateKey& sk, unsigned s, const mpz_class& ciphertext);

// Truncated SHA-256 over the fixed-width encodings of m and r0.
mpz_class chk_hash(const PublicKey& pk, const mpz_class& m, const mpz_class& r0);

struct Chunk {
  mpz_class c;
  mpz_class t;

  // The group identity (1, 1): a valid white.
  static Chunk identity() { return {1, 1}; }
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

// c as (sData+1)*|N|/8 big-endian bytes, then t as 2*|N|/8 bytes.
Bytes serialize_chunk(const PublicKey& pk, const Chunk& chunk);
Chunk parse_chunk(const PublicKey& pk, ByteView bytes);

Chunk enc_data(const PublicKey& pk, const mpz_class& m, const ChunkMeta& meta, Rng& rng);
Chunk enc_zero(const PublicKey& pk, Rng& rng);
Chunk aggregate(const PublicKey& pk, const Chunk& x, const Chunk& y);
// In-place variant used on hot aggregation paths.
void aggregate_into(const PublicKey& pk, Chunk& acc, const Chunk& x);

struct WhiteTest {
  bool white = false;
  TagPlaintext tag;
};

// Decrypts the tag only.
WhiteTest is_white(const PrivateKey& sk, const Chunk& chunk);
mpz_class decrypt_tag(const PrivateKey& sk, const mpz_class& t);

struct Plaintext {
  mpz_class m;
  ChunkMeta meta;  // all-zero for a white

  bool white() const { return meta.k == 0; }
};

std::optional<Plaintext> dec_vrfy(const PrivateKey& sk, const Chunk& chunk);
// Same, reusing an already known tag plaintext instead of decrypting t.
std::optional<Plaintext> dec_vrfy_with_tag(const PrivateKey& sk, const Chunk& chunk,
                                           const TagPlaintext& tag);

namespace detail {
// Fast paths behind enc_data, exposed so tests can check them against psi.
mpz_class data_component(const PublicKey& pk, const mpz_class& m, const mpz_class& chk,
                         const mpz_class& r1);
mpz_class tag_component(const PublicKey& pk, const TagPlaintext& tag, const mpz_class& r2);
}  // namespace detail

}  // namespace alk::dj
