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

#include "alk/relay.hpp"

#include "alk/codec.hpp"

namespace alk::relay {

void append_frame(Bytes& out, const Frame& frame) {
  if (frame.payload.size() > kMaxFramePayload) throw Error("frame payload too large");
  put_u32(out, static_cast<uint32_t>(frame.payload.size()));
  out.push_back(frame.type);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
}

Bytes encode_frame(const Frame& frame) {
  Bytes out;
  out.reserve(kFrameHeaderBytes + frame.payload.size());
  append_frame(out, frame);
  return out;
}

void FrameReader::feed(ByteView data) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  } else if (pos_ > (1u << 16) && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), data.begin(), data.end());
}

std::optional<Frame> FrameReader::next() {
  for (;;) {
    if (buffered() < kFrameHeaderBytes) return std::nullopt;
    uint32_t len = get_u32(buf_, pos_);
    if (len > kMaxFramePayload) throw Error("frame length exceeds limit");
    if (buffered() < kFrameHeaderBytes + len) return std::nullopt;
    uint8_t type = buf_[pos_ + 4];
    auto start = buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + kFrameHeaderBytes);
    pos_ += kFrameHeaderBytes + len;
    if (type > static_cast<uint8_t>(FrameType::kEpochMarker)) {
      ++skipped_;
      continue;
    }
    return Frame{type, Bytes(start, start + len)};
  }
}

Frame hello_frame() { return Frame{static_cast<uint8_t>(FrameType::kHello), Bytes{kProtocolVersion}}; }

bool check_hello(const Frame& frame) {
  return frame.is(FrameType::kHello) && frame.payload.size() == 1 &&
         frame.payload[0] == kProtocolVersion;
}

Frame sealed_frame(ByteView sealed) {
  return Frame{static_cast<uint8_t>(FrameType::kSealed), Bytes(sealed.begin(), sealed.end())};
}

Frame AggregateFrame::encode() const {
  Frame f{static_cast<uint8_t>(FrameType::kAggregate), {}};
  f.payload.reserve(kAggregateHeaderBytes + chunk.size());
  put_u64(f.payload, epoch);
  put_u16(f.payload, set);
  put_u32(f.payload, bucket);
  f.payload.insert(f.payload.end(), chunk.begin(), chunk.end());
  return f;
}

AggregateFrame AggregateFrame::decode(const Frame& frame) {
  if (!frame.is(FrameType::kAggregate)) throw Error("not an aggregate frame");
  ByteReader r(frame.payload);
  AggregateFrame a;
  a.epoch = r.u64();
  a.set = r.u16();
  a.bucket = r.u32();
  ByteView rest = r.take(r.remaining());
  a.chunk.assign(rest.begin(), rest.end());
  return a;
}

Frame EpochMarker::encode() const {
  Frame f{static_cast<uint8_t>(FrameType::kEpochMarker), {}};
  put_u64(f.payload, epoch);
  put_u32(f.payload, count);
  return f;
}

EpochMarker EpochMarker::decode(const Frame& frame) {
  if (!frame.is(FrameType::kEpochMarker)) throw Error("not an epoch marker");
  ByteReader r(frame.payload);
  EpochMarker m;
  m.epoch = r.u64();
  m.count = r.u32();
  if (!r.done()) throw Error("trailing bytes in epoch marker");
  return m;
}

void EpochConfig::validate() const {
  if (!(epoch_seconds > 0)) throw Error("epoch duration must be positive");
  if (bucket_count == 0) throw Error("bucket count must be positive");
  if (split_count == 0 || split_count > 0xffff || bucket_count % split_count != 0) {
    throw Error("split count must divide bucket count");
  }
}

uint64_t EpochConfig::flush_bytes(size_t chunk_bytes) const {
  return uint64_t{bucket_count} * (kFrameHeaderBytes + kAggregateHeaderBytes + chunk_bytes) +
         kFrameHeaderBytes + 12;
}

std::optional<Frame> guard_handle(std::string_view body, size_t sealed_length) {
  if (body.size() != base64_length(sealed_length)) return std::nullopt;
  std::optional<Bytes> raw = base64_decode(body);
  if (!raw || raw->size() != sealed_length) return std::nullopt;
  return Frame{static_cast<uint8_t>(FrameType::kSealed), std::move(*raw)};
}

std::vector<Frame> grid_frames(const dj::PublicKey& pk, const EpochGrid& grid) {
  std::vector<Frame> frames;
  uint32_t count = 0;
  for (size_t s = 0; s < grid.grid.size(); ++s) {
    for (size_t b = 0; b < grid.grid[s].size(); ++b) {
      AggregateFrame a{grid.epoch, static_cast<uint16_t>(s), static_cast<uint32_t>(b),
                       dj::serialize_chunk(pk, grid.grid[s][b])};
      frames.push_back(a.encode());
      ++count;
    }
  }
  frames.push_back(EpochMarker{grid.epoch, count}.encode());
  return frames;
}

Aggregator::Aggregator(dj::PublicKey pk, envelope::PrivateKey env, EpochConfig config, Rng rng,
                       uint64_t first_epoch)
    : pk_(std::move(pk)), env_(env), config_(config), rng_(std::move(rng)), epoch_(first_epoch) {
  config_.validate();
  cells_.reserve(config_.split_count);
  for (uint32_t s = 0; s < config_.split_count; ++s) {
    cells_.emplace_back(config_.buckets_per_set());
  }
}

uint32_t Aggregator::pick_bucket() {
  std::lock_guard lock(rng_mu_);
  return static_cast<uint32_t>(rng_.below(config_.buckets_per_set()));
}

bool Aggregator::ingest(const Frame& frame) {
  if (!frame.is(FrameType::kSealed)) {
    ++dropped_;
    return false;
  }
  return ingest_sealed(frame.payload);
}

bool Aggregator::ingest_sealed(ByteView sealed) {
  std::optional<Bytes> opened = envelope::open(env_, sealed, pk_.chunk_bytes());
  if (!opened) {
    ++dropped_;
    return false;
  }
  dj::Chunk chunk;
  try {
    chunk = dj::parse_chunk(pk_, *opened);
  } catch (const Error&) {
    ++dropped_;
    return false;
  }
  ingest_chunk(chunk);
  return true;
}

void Aggregator::ingest_chunk(const dj::Chunk& chunk) {
  std::shared_lock epoch_lock(epoch_mu_);
  for (auto& set : cells_) {
    Cell& cell = set[pick_bucket()];
    std::lock_guard lock(cell.mu);
    dj::aggregate_into(pk_, cell.chunk, chunk);
  }
  ++accepted_;
}

EpochGrid Aggregator::flush_grid() {
  std::unique_lock lock(epoch_mu_);
  EpochGrid out;
  out.epoch = epoch_++;
  out.grid.resize(cells_.size());
  for (size_t s = 0; s < cells_.size(); ++s) {
    out.grid[s].reserve(cells_[s].size());
    for (Cell& cell : cells_[s]) {
      out.grid[s].push_back(std::move(cell.chunk));
      cell.chunk = dj::Chunk::identity();
    }
  }
  return out;
}

std::vector<Frame> Aggregator::flush() { return grid_frames(pk_, flush_grid()); }

uint64_t Aggregator::epoch() const {
  std::shared_lock lock(epoch_mu_);
  return epoch_;
}

void Outbox::push(std::vector<Frame> epoch_frames) {
  std::lock_guard lock(mu_);
  queue_.push_back(std::move(epoch_frames));
  while (queue_.size() > capacity_) {
    queue_.pop_front();
    ++dropped_;
  }
}

std::optional<std::vector<Frame>> Outbox::pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  std::vector<Frame> front = std::move(queue_.front());
  queue_.pop_front();
  return front;
}

void Outbox::requeue(std::vector<Frame> epoch_frames) {
  std::lock_guard lock(mu_);
  if (queue_.size() >= capacity_) {
    ++dropped_;
    return;
  }
  queue_.push_front(std::move(epoch_frames));
}

size_t Outbox::size() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

uint64_t Outbox::dropped_epochs() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

}  // namespace alk::relay
