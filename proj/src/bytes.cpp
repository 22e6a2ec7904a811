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

#include "alk/bytes.hpp"

#include <algorithm>

namespace alk {

size_t byte_length(const mpz_class& value) {
  if (sgn(value) < 0) throw Error("negative integer has no byte encoding");
  if (value == 0) return 0;
  return (mpz_sizeinbase(value.get_mpz_t(), 2) + 7) / 8;
}

void write_fixed_be(const mpz_class& value, std::span<uint8_t> out) {
  size_t len = byte_length(value);
  if (len > out.size()) throw Error("integer does not fit fixed width");
  std::fill(out.begin(), out.end(), uint8_t{0});
  if (len == 0) return;
  size_t written = 0;
  mpz_export(out.data() + (out.size() - len), &written, 1, 1, 1, 0,
             value.get_mpz_t());
}

Bytes to_fixed_be(const mpz_class& value, size_t width) {
  Bytes out(width);
  write_fixed_be(value, out);
  return out;
}

mpz_class from_be(ByteView bytes) {
  constexpr size_t kLimb = sizeof(mp_limb_t);
  mpz_class v;
  if (bytes.empty()) return v;
  size_t limbs = (bytes.size() + kLimb - 1) / kLimb;
  mp_limb_t* out = mpz_limbs_write(v.get_mpz_t(), static_cast<mp_size_t>(limbs));
  size_t end = bytes.size();
  for (size_t i = 0; i < limbs; ++i) {
    size_t begin = end > kLimb ? end - kLimb : 0;
    mp_limb_t w = 0;
    for (size_t j = begin; j < end; ++j) w = (w << 8) | bytes[j];
    out[i] = w;
    end = begin;
  }
  mpz_limbs_finish(v.get_mpz_t(), static_cast<mp_size_t>(limbs));
  return v;
}

void put_u16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u32(Bytes& out, uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<uint8_t>(v >> shift));
}

void put_u64(Bytes& out, uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<uint8_t>(v >> shift));
}

uint16_t get_u16(ByteView in, size_t offset) {
  if (offset + 2 > in.size()) throw Error("u16 out of range");
  return static_cast<uint16_t>((in[offset] << 8) | in[offset + 1]);
}

uint32_t get_u32(ByteView in, size_t offset) {
  if (offset + 4 > in.size()) throw Error("u32 out of range");
  uint32_t v = 0;
  for (size_t i = 0; i < 4; ++i) v = (v << 8) | in[offset + i];
  return v;
}

uint64_t get_u64(ByteView in, size_t offset) {
  if (offset + 8 > in.size()) throw Error("u64 out of range");
  uint64_t v = 0;
  for (size_t i = 0; i < 8; ++i) v = (v << 8) | in[offset + i];
  return v;
}

uint8_t ByteReader::u8() { return take(1)[0]; }
uint16_t ByteReader::u16() { return get_u16(take(2), 0); }
uint32_t ByteReader::u32() { return get_u32(take(4), 0); }
uint64_t ByteReader::u64() { return get_u64(take(8), 0); }

ByteView ByteReader::take(size_t n) {
  if (n > remaining()) throw Error("truncated input");
  ByteView out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

ByteView ByteReader::take_prefixed() { return take(u32()); }

void put_prefixed(Bytes& out, ByteView field) {
  put_u32(out, static_cast<uint32_t>(field.size()));
  out.insert(out.end(), field.begin(), field.end());
}

void put_prefixed(Bytes& out, const mpz_class& value) {
  put_prefixed(out, to_fixed_be(value, byte_length(value)));
}

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

}  // namespace alk
