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

#include "alk/rng.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>

namespace alk {

namespace {

void free_ctx(EVP_CIPHER_CTX* ctx) { EVP_CIPHER_CTX_free(ctx); }

}  // namespace

Rng::Rng(ByteView seed) : ctx_(EVP_CIPHER_CTX_new(), free_ctx) {
  if (!ctx_) throw Error("cipher context allocation failed");
  std::array<uint8_t, 32> key{};
  SHA256(seed.data(), seed.size(), key.data());
  std::array<uint8_t, 16> iv{};
  if (EVP_EncryptInit_ex(ctx_.get(), EVP_aes_256_ctr(), nullptr, key.data(), iv.data()) != 1) {
    throw Error("rng init failed");
  }
}

Rng::Rng(uint64_t seed) : Rng([&] {
  Bytes b;
  put_u64(b, seed);
  return b;
}()) {}

Rng Rng::from_os() {
  std::array<uint8_t, 32> seed{};
  if (RAND_bytes(seed.data(), static_cast<int>(seed.size())) != 1) {
    throw Error("entropy source unavailable");
  }
  return Rng(ByteView(seed));
}

Rng::Rng(Rng&& other) noexcept
    : ctx_(std::move(other.ctx_)), buffer_(other.buffer_), pos_(other.pos_) {}

Rng& Rng::operator=(Rng&& other) noexcept {
  ctx_ = std::move(other.ctx_);
  buffer_ = other.buffer_;
  pos_ = other.pos_;
  return *this;
}

Rng::~Rng() = default;

void Rng::refill() {
  std::array<uint8_t, 4096> zeros{};
  int outl = 0;
  if (EVP_EncryptUpdate(ctx_.get(), buffer_.data(), &outl, zeros.data(),
                        static_cast<int>(zeros.size())) != 1) {
    throw Error("rng keystream failure");
  }
  pos_ = 0;
}

void Rng::fill(std::span<uint8_t> out) {
  size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    size_t n = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

Bytes Rng::bytes(size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

uint64_t Rng::next_u64() {
  std::array<uint8_t, 8> b{};
  fill(b);
  return get_u64(b, 0);
}

uint64_t Rng::below(uint64_t bound) {
  if (bound == 0) throw Error("rng bound must be positive");
  // Rejection sampling on the largest multiple of bound.
  uint64_t limit = max() - (max() % bound + 1) % bound;
  for (;;) {
    uint64_t v = next_u64();
    if (v <= limit) return v % bound;
  }
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

mpz_class Rng::bits(size_t bits) {
  if (bits == 0) return 0;
  Bytes b = bytes((bits + 7) / 8);
  size_t excess = b.size() * 8 - bits;
  b[0] &= static_cast<uint8_t>(0xff >> excess);
  return from_be(b);
}

mpz_class Rng::below(const mpz_class& bound) {
  if (bound <= 0) throw Error("rng bound must be positive");
  size_t nbits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  for (;;) {
    mpz_class v = bits(nbits);
    if (v < bound) return v;
  }
}

Rng Rng::fork() {
  std::array<uint8_t, 32> seed{};
  fill(seed);
  return Rng(ByteView(seed));
}

}  // namespace alk
