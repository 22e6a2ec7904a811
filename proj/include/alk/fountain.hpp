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

// Random linear fountain code over GF(2). The coefficient vector of packet i
// of file k is derived from (k, i) alone, so packets carry no coefficient
// bits.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alk/bytes.hpp"

namespace alk::fountain {

inline constexpr size_t kDefaultBlockSize = 2303;

class BitVector {
 public:
  static constexpr size_t npos = static_cast<size_t>(-1);

  BitVector() = default;
  explicit BitVector(size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}
  // From a string of '0'/'1', most significant coefficient (index 0) first.
  static BitVector from_string(const std::string& s);

  size_t size() const { return bits_; }
  bool get(size_t i) const { return (words_[i / 64] >> (i % 64)) & 1; }
  void set(size_t i) { words_[i / 64] |= uint64_t{1} << (i % 64); }
  bool none() const;
  size_t count() const;
  // Lowest set index >= from, or npos.
  size_t find_next(size_t from) const;
  BitVector& operator^=(const BitVector& other);
  std::string to_string() const;

  std::vector<uint64_t>& words() { return words_; }
  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  size_t bits_ = 0;
  std::vector<uint64_t> words_;
};

// Pseudorandom nonzero vector of length n keyed by (k, i); deterministic.
BitVector coeff_vector(uint64_t k, uint32_t i, uint32_t n);

struct SourceBlockSet {
  size_t block_size = kDefaultBlockSize;
  std::vector<Bytes> blocks;

  size_t count() const { return blocks.size(); }
  // Zero-pads the final block. Throws on empty input.
  static SourceBlockSet split(ByteView data, size_t block_size);
  // Throws unless n >= 1 and all blocks have block_size bytes.
  void validate() const;
};

struct FountainPacket {
  uint32_t index = 0;
  Bytes payload;
};

FountainPacket encode_packet(const SourceBlockSet& set, uint64_t k, uint32_t i);
// XOR of the blocks selected by coeffs.
Bytes combine(const SourceBlockSet& set, const BitVector& coeffs);

// Incremental Gaussian elimination. Single owner.
class Decoder {
 public:
  Decoder(uint64_t k, uint32_t n, size_t block_size);

  // Returns the rank after the step; dependent rows leave it unchanged.
  // Throws alk::Error on payload length mismatch.
  size_t add(const FountainPacket& packet);
  size_t add_row(BitVector coeffs, Bytes payload);

  size_t rank() const { return rank_; }
  uint32_t n() const { return n_; }
  bool decodable() const { return rank_ == n_; }
  // The source blocks once rank = n; nullopt means more packets are needed.
  std::optional<std::vector<Bytes>> finish() const;

 private:
  struct Row {
    BitVector coeffs;
    Bytes payload;
  };

  uint64_t k_;
  uint32_t n_;
  size_t block_size_;
  size_t rank_ = 0;
  std::vector<Row> rows_;
  std::vector<int64_t> pivot_row_;  // per column, -1 when empty
};

}  // namespace alk::fountain
