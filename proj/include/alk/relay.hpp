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

// Inter-tier frame protocol, guard request handling and per-epoch bucket
// aggregation.
//
// Frame: length (u32, payload bytes) || type (u8) || payload, big-endian.

#include <atomic>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string_view>
#include <vector>

#include "alk/bytes.hpp"
#include "alk/dj.hpp"
#include "alk/envelope.hpp"
#include "alk/rng.hpp"

namespace alk::relay {

enum class FrameType : uint8_t {
  kHello = 0x00,
  kSealed = 0x01,
  kAggregate = 0x02,
  kEpochMarker = 0x03,
};

inline constexpr uint8_t kProtocolVersion = 1;
inline constexpr size_t kFrameHeaderBytes = 5;
inline constexpr size_t kAggregateHeaderBytes = 8 + 2 + 4;
inline constexpr uint32_t kMaxFramePayload = 1u << 20;

struct Frame {
  uint8_t type = 0;
  Bytes payload;

  bool is(FrameType t) const { return type == static_cast<uint8_t>(t); }
  friend bool operator==(const Frame&, const Frame&) = default;
};

Bytes encode_frame(const Frame& frame);
void append_frame(Bytes& out, const Frame& frame);

// Incremental decoder for a byte stream. Frames of unknown type are skipped.
// Throws alk::Error when a length exceeds kMaxFramePayload.
class FrameReader {
 public:
  void feed(ByteView data);
  std::optional<Frame> next();
  size_t buffered() const { return buf_.size() - pos_; }
  uint64_t skipped() const { return skipped_; }

 private:
  Bytes buf_;
  size_t pos_ = 0;
  uint64_t skipped_ = 0;
};

Frame hello_frame();
// True for a hello frame carrying a supported version.
bool check_hello(const Frame& frame);

Frame sealed_frame(ByteView sealed);

struct AggregateFrame {
  uint64_t epoch = 0;
  uint16_t set = 0;
  uint32_t bucket = 0;
  Bytes chunk;

  Frame encode() const;
  static AggregateFrame decode(const Frame& frame);
};

struct EpochMarker {
  uint64_t epoch = 0;
  uint32_t count = 0;  // aggregate frames sent for this epoch

  Frame encode() const;
  static EpochMarker decode(const Frame& frame);
};

struct EpochConfig {
  double epoch_seconds = 1.0;
  uint32_t bucket_count = 768;
  uint32_t split_count = 1;

  // Throws unless split_count >= 1 divides bucket_count >= 1 and the epoch is
  // positive.
  void validate() const;
  uint32_t buckets_per_set() const { return bucket_count / split_count; }
  // Upstream bytes per epoch for a given chunk width.
  uint64_t flush_bytes(size_t chunk_bytes) const;
};

// Decodes a POST body to a sealed frame; nullopt for anything malformed.
std::optional<Frame> guard_handle(std::string_view body, size_t sealed_length);

// One epoch's buckets, grid[set][bucket].
struct EpochGrid {
  uint64_t epoch = 0;
  std::vector<std::vector<dj::Chunk>> grid;
};

std::vector<Frame> grid_frames(const dj::PublicKey& pk, const EpochGrid& grid);

class Aggregator {
 public:
  Aggregator(dj::PublicKey pk, envelope::PrivateKey env, EpochConfig config, Rng rng,
             uint64_t first_epoch = 0);

  // Opens and aggregates. Returns false for anything dropped.
  bool ingest(const Frame& frame);
  bool ingest_sealed(ByteView sealed);
  // Skips the envelope, for callers that already hold a chunk.
  void ingest_chunk(const dj::Chunk& chunk);

  // Takes the current grid, resets every cell to the identity and advances
  // the epoch. Waits for in-flight ingests.
  EpochGrid flush_grid();
  // Aggregate frames in (set, bucket) order followed by the epoch marker.
  std::vector<Frame> flush();

  uint64_t epoch() const;
  uint64_t accepted() const { return accepted_.load(); }
  uint64_t dropped() const { return dropped_.load(); }
  const EpochConfig& config() const { return config_; }
  const dj::PublicKey& public_key() const { return pk_; }

 private:
  struct Cell {
    std::mutex mu;
    dj::Chunk chunk = dj::Chunk::identity();
  };

  uint32_t pick_bucket();

  dj::PublicKey pk_;
  envelope::PrivateKey env_;
  EpochConfig config_;
  std::mutex rng_mu_;
  Rng rng_;
  mutable std::shared_mutex epoch_mu_;
  uint64_t epoch_;
  std::vector<std::vector<Cell>> cells_;
  std::atomic<uint64_t> accepted_{0};
  std::atomic<uint64_t> dropped_{0};
};

// Holds flushed epochs while upstream is unavailable. Keeps at most
// `capacity` epochs and drops the oldest beyond that.
class Outbox {
 public:
  explicit Outbox(size_t capacity = 1) : capacity_(capacity) {}

  void push(std::vector<Frame> epoch_frames);
  std::optional<std::vector<Frame>> pop();
  // Puts an epoch back at the head after a failed send.
  void requeue(std::vector<Frame> epoch_frames);
  size_t size() const;
  uint64_t dropped_epochs() const;

 private:
  size_t capacity_;
  mutable std::mutex mu_;
  std::deque<std::vector<Frame>> queue_;
  uint64_t dropped_ = 0;
};

}  // namespace alk::relay
