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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace alk {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

// Raised for malformed wire data and violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Big-endian, left zero-padded to exactly `width` bytes. Throws if the value
// does not fit.
Bytes to_fixed_be(const mpz_class& value, size_t width);
void write_fixed_be(const mpz_class& value, std::span<uint8_t> out);
mpz_class from_be(ByteView bytes);

// Minimal byte-length of a non-negative integer (0 encodes as empty).
size_t byte_length(const mpz_class& value);

void put_u16(Bytes& out, uint16_t v);
void put_u32(Bytes& out, uint32_t v);
void put_u64(Bytes& out, uint64_t v);
uint16_t get_u16(ByteView in, size_t offset);
uint32_t get_u32(ByteView in, size_t offset);
uint64_t get_u64(ByteView in, size_t offset);

// Sequential reader over a byte buffer; every accessor throws alk::Error on
// underrun.
class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  ByteView take(size_t n);
  // u32 length prefix followed by that many bytes.
  ByteView take_prefixed();
  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  ByteView data_;
  size_t pos_ = 0;
};

void put_prefixed(Bytes& out, ByteView field);
void put_prefixed(Bytes& out, const mpz_class& value);

Bytes to_bytes(std::string_view s);
std::string to_hex(ByteView bytes);

}  // namespace alk
