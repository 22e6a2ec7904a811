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

#include <bit>
#include <string_view>

#include "alk/codec.hpp"

namespace alk::fountain {

namespace {

constexpr std::string_view kDomain = "alk fountain v1";

void xor_bytes(Bytes& dst, const Bytes& src) {
  for (size_t j = 0; j < dst.size(); ++j) dst[j] ^= src[j];
}

}  // namespace

BitVector BitVector::from_string(const std::string& s) {
  BitVector v(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '1') {
      v.set(i);
    } else if (s[i] != '0') {
      throw Error("bit string may contain only 0 and 1");
    }
  }
  return v;
}

bool BitVector::none() const {
  for (uint64_t w : words_) {
    if (w != 0) return false;
  }
  return true;
}

size_t BitVector::count() const {
  size_t c = 0;
  for (uint64_t w : words_) c += static_cast<size_t>(std::popcount(w));
  return c;
}

size_t BitVector::find_next(size_t from) const {
  if (from >= bits_) return npos;
  size_t w = from / 64;
  uint64_t word = words_[w] & (~uint64_t{0} << (from % 64));
  for (;;) {
    if (word != 0) {
      size_t idx = w * 64 + static_cast<size_t>(std::countr_zero(word));
      return idx < bits_ ? idx : npos;
    }
    if (++w == words_.size()) return npos;
    word = words_[w];
  }
}

BitVector& BitVector::operator^=(const BitVector& other) {
  if (other.bits_ != bits_) throw Error("bit vector length mismatch");
  for (size_t w = 0; w < words_.size(); ++w) words_[w] ^= other.words_[w];
  return *this;
}

std::string BitVector::to_string() const {
  std::string s(bits_, '0');
  for (size_t i = 0; i < bits_; ++i) {
    if (get(i)) s[i] = '1';
  }
  return s;
}

BitVector coeff_vector(uint64_t k, uint32_t i, uint32_t n) {
  if (n == 0) throw Error("coefficient vector needs n >= 1");
  BitVector v(n);
  for (uint32_t retry = 0;; ++retry) {
    Bytes prefix(kDomain.begin(), kDomain.end());
    put_u64(prefix, k);
    put_u32(prefix, i);
    put_u32(prefix, n);
    put_u32(prefix, retry);
    auto& words = v.words();
    std::fill(words.begin(), words.end(), 0);
    for (uint32_t counter = 0; counter * 256 < n; ++counter) {
      Bytes ctr;
      put_u32(ctr, counter);
      Digest256 block = sha256({ByteView(prefix), ByteView(ctr)});
      for (size_t b = 0; b < 4; ++b) {
        size_t word = counter * 4 + b;
        if (word < words.size()) words[word] = get_u64(block, b * 8);
      }
    }
    if (n % 64 != 0) words.back() &= (uint64_t{1} << (n % 64)) - 1;
    if (!v.none()) return v;
  }
}

SourceBlockSet SourceBlockSet::split(ByteView data, size_t block_size) {
  if (data.empty()) throw Error("cannot split empty data");
  if (block_size == 0) throw Error("block size must be positive");
  SourceBlockSet set;
  set.block_size = block_size;
  for (size_t off = 0; off < data.size(); off += block_size) {
    Bytes block(block_size, 0);
    size_t len = std::min(block_size, data.size() - off);
    std::copy_n(data.begin() + off, len, block.begin());
    set.blocks.push_back(std::move(block));
  }
  return set;
}

void SourceBlockSet::validate() const {
  if (blocks.empty()) throw Error("source block set is empty");
  for (const Bytes& b : blocks) {
    if (b.size() != block_size) throw Error("source blocks differ in size");
  }
}

Bytes combine(const SourceBlockSet& set, const BitVector& coeffs) {
  if (coeffs.size() != set.count()) throw Error("coefficient length mismatch");
  Bytes out(set.block_size, 0);
  for (size_t j = coeffs.find_next(0); j != BitVector::npos; j = coeffs.find_next(j + 1)) {
    xor_bytes(out, set.blocks[j]);
  }
  return out;
}

FountainPacket encode_packet(const SourceBlockSet& set, uint64_t k, uint32_t i) {
  set.validate();
  BitVector coeffs = coeff_vector(k, i, static_cast<uint32_t>(set.count()));
  return FountainPacket{i, combine(set, coeffs)};
}

Decoder::Decoder(uint64_t k, uint32_t n, size_t block_size)
    : k_(k), n_(n), block_size_(block_size), pivot_row_(n, -1) {
  if (n == 0) throw Error("decoder needs n >= 1");
}

size_t Decoder::add(const FountainPacket& packet) {
  return add_row(coeff_vector(k_, packet.index, n_), packet.payload);
}

size_t Decoder::add_row(BitVector coeffs, Bytes payload) {
  if (payload.size() != block_size_) throw Error("packet payload length mismatch");
  if (coeffs.size() != n_) throw Error("coefficient length mismatch");
  // Stored rows have their pivot as lowest set bit, so reducing in ascending
  // column order never reintroduces a cleared column.
  for (size_t col = coeffs.find_next(0); col != BitVector::npos; col = coeffs.find_next(col + 1)) {
    int64_t r = pivot_row_[col];
    if (r < 0) {
      pivot_row_[col] = static_cast<int64_t>(rows_.size());
      rows_.push_back(Row{std::move(coeffs), std::move(payload)});
      return ++rank_;
    }
    coeffs ^= rows_[static_cast<size_t>(r)].coeffs;
    xor_bytes(payload, rows_[static_cast<size_t>(r)].payload);
  }
  return rank_;
}

std::optional<std::vector<Bytes>> Decoder::finish() const {
  if (rank_ < n_) return std::nullopt;
  std::vector<Row> rows = rows_;
  std::vector<Bytes> blocks(n_);
  // Back substitution from the last column; every pivot above col is already
  // a unit row by the time it is used.
  for (size_t col = n_; col-- > 0;) {
    Row& row = rows[static_cast<size_t>(pivot_row_[col])];
    for (size_t j = row.coeffs.find_next(col + 1); j != BitVector::npos;
         j = row.coeffs.find_next(j + 1)) {
      xor_bytes(row.payload, blocks[j]);
    }
    blocks[col] = row.payload;
  }
  return blocks;
}

}  // namespace alk::fountain
