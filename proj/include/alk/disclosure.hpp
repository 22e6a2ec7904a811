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

// Whistleblower-side file preparation and decryptor-side reassembly.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "alk/bytes.hpp"
#include "alk/codec.hpp"
#include "alk/dj.hpp"
#include "alk/envelope.hpp"
#include "alk/fountain.hpp"
#include "alk/rng.hpp"

namespace alk::disclosure {

inline constexpr size_t kHeaderBytes = 40;
inline constexpr double kDefaultRho = 0.9;
inline constexpr double kDefaultDelta = 0x1p-20;

// Prepended to the file before splitting: length (8) || SHA-256 (32).
struct FileHeader {
  uint64_t length = 0;
  Digest256 digest{};

  static FileHeader of(ByteView file);
  Bytes serialize() const;
  static FileHeader parse(ByteView bytes);
};

// n = ceil((len + 40) / block_size). Throws if n does not fit 32 bits.
uint32_t block_count(uint64_t file_length, size_t block_size);
// n'' = ceil((n + log2(1/delta)) / rho).
uint32_t packet_count(uint32_t n, double rho, double delta);

struct Manifest {
  uint64_t k = 0;
  uint32_t n = 0;
  uint32_t cursor = 0;
  size_t sealed_length = 0;
  std::vector<Bytes> sealed;

  uint32_t total() const { return static_cast<uint32_t>(sealed.size()); }
  uint32_t remaining() const { return total() - cursor; }

  // "ALKM", k, n, total, cursor, sealed length, then the sealed chunks.
  Bytes serialize() const;
  static Manifest parse(ByteView bytes);
};

// Splits header || file into blocks of pk.data_bytes(), fountain encodes
// n'' packets and seals enc_data of each.
Manifest prepare_file(ByteView file, const dj::PublicKey& dj_pub, const envelope::PublicKey& env_pub,
                      double rho, double delta, Rng& rng);

// nullopt once all chunks have been used.
std::optional<Bytes> next_chunk(Manifest& manifest);

// Same on a manifest file: reads the chunk at the stored cursor and advances
// it under an exclusive lock, so concurrent senders never reuse a chunk.
std::optional<Bytes> next_chunk_from_file(const std::filesystem::path& path);

enum class AddStatus { kNew, kDuplicate, kComplete, kCorrupt };

const char* to_string(AddStatus status);

struct AddResult {
  AddStatus status = AddStatus::kNew;
  uint64_t k = 0;
  size_t rank = 0;
  std::optional<Bytes> file;  // set with kComplete
};

// Per-file decoders keyed by k. Calls for different k run concurrently;
// calls for the same k are serialized.
class ReassemblyStore {
 public:
  static constexpr uint32_t kDefaultMaxBlocks = 1u << 16;

  explicit ReassemblyStore(size_t block_size, uint32_t max_blocks = kDefaultMaxBlocks)
      : block_size_(block_size), max_blocks_(max_blocks) {}

  // (m, meta) must come from a successful dec_vrfy. Metadata with n above
  // max_blocks, or disagreeing with earlier chunks of the same file, is
  // kCorrupt. A digest mismatch discards the file and reports kCorrupt;
  // later chunks of a finished or discarded file are duplicates.
  AddResult add(const mpz_class& m, const dj::ChunkMeta& meta);

  size_t completed() const;
  size_t corrupt() const;
  size_t in_progress() const;

 private:
  enum class State { kOpen, kDone, kFailed };
  struct Entry {
    std::mutex mu;
    State state = State::kOpen;
    std::unique_ptr<fountain::Decoder> decoder;
    std::unordered_set<uint32_t> seen;
  };

  std::shared_ptr<Entry> entry(uint64_t k);

  size_t block_size_;
  uint32_t max_blocks_;
  mutable std::mutex mu_;
  std::unordered_map<uint64_t, std::shared_ptr<Entry>> files_;
  size_t completed_ = 0;
  size_t corrupt_ = 0;
};

}  // namespace alk::disclosure
