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

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>

#include "alk/bytes.hpp"

typedef struct evp_cipher_ctx_st EVP_CIPHER_CTX;

namespace alk {

// Deterministic cryptographic random stream (AES-256 in counter mode keyed by
// SHA-256 of the seed). Instances are single-owner; hand each caller its own,
// or fork() a child stream.
class Rng {
 public:
  using result_type = uint64_t;

  explicit Rng(ByteView seed);
  explicit Rng(uint64_t seed);
  // Seeded from the operating system entropy pool. Throws alk::Error when the
  // pool is unavailable.
  static Rng from_os();

  Rng(Rng&&) noexcept;
  Rng& operator=(Rng&&) noexcept;
  ~Rng();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  void fill(std::span<uint8_t> out);
  Bytes bytes(size_t n);
  uint64_t next_u64();
  // Uniform in [0, bound); bound > 0.
  uint64_t below(uint64_t bound);
  double uniform01();

  // Uniform integer with at most `bits` bits.
  mpz_class bits(size_t bits);
  // Uniform in [0, bound); bound > 0.
  mpz_class below(const mpz_class& bound);

  // Independent child stream; advances this stream by 32 bytes.
  Rng fork();

 private:
  void refill();

  std::unique_ptr<EVP_CIPHER_CTX, void (*)(EVP_CIPHER_CTX*)> ctx_;
  std::array<uint8_t, 4096> buffer_{};
  size_t pos_ = 4096;
};

}  // namespace alk
