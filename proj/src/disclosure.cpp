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

#include "alk/disclosure.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <limits>

namespace alk::disclosure {

namespace {

constexpr uint8_t kManifestMagic[4] = {'A', 'L', 'K', 'M'};
constexpr size_t kCursorOffset = 4 + 8 + 4 + 4;
constexpr size_t kManifestHeaderBytes = kCursorOffset + 4 + 4;

class FdGuard {
 public:
  explicit FdGuard(int fd) : fd_(fd) {}
  ~FdGuard() {
    if (fd_ >= 0) ::close(fd_);
  }
  FdGuard(const FdGuard&) = delete;
  FdGuard& operator=(const FdGuard&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

void pread_exact(int fd, uint8_t* buf, size_t len, off_t offset) {
  while (len > 0) {
    ssize_t got = ::pread(fd, buf, len, offset);
    if (got <= 0) throw Error("short read from manifest");
    buf += got;
    len -= static_cast<size_t>(got);
    offset += got;
  }
}

void pwrite_exact(int fd, const uint8_t* buf, size_t len, off_t offset) {
  while (len > 0) {
    ssize_t put = ::pwrite(fd, buf, len, offset);
    if (put <= 0) throw Error("short write to manifest");
    buf += put;
    len -= static_cast<size_t>(put);
    offset += put;
  }
}

}  // namespace

FileHeader FileHeader::of(ByteView file) { return FileHeader{file.size(), sha256(file)}; }

Bytes FileHeader::serialize() const {
  Bytes out;
  out.reserve(kHeaderBytes);
  put_u64(out, length);
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

FileHeader FileHeader::parse(ByteView bytes) {
  ByteReader r(bytes);
  FileHeader h;
  h.length = r.u64();
  ByteView d = r.take(32);
  std::copy(d.begin(), d.end(), h.digest.begin());
  return h;
}

uint32_t block_count(uint64_t file_length, size_t block_size) {
  if (block_size == 0) throw Error("block size must be positive");
  uint64_t padded = file_length + kHeaderBytes;
  uint64_t n = (padded + block_size - 1) / block_size;
  if (n > std::numeric_limits<uint32_t>::max()) throw Error("file too large for a 32-bit block count");
  return static_cast<uint32_t>(n);
}

uint32_t packet_count(uint32_t n, double rho, double delta) {
  if (!(rho > 0 && rho <= 1)) throw Error("rho must lie in (0, 1]");
  if (!(delta > 0 && delta <= 1)) throw Error("delta must lie in (0, 1]");
  double total = std::ceil((n + std::log2(1 / delta)) / rho - 1e-9);
  if (total > std::numeric_limits<uint32_t>::max()) throw Error("packet count exceeds 32 bits");
  return static_cast<uint32_t>(total);
}

Bytes Manifest::serialize() const {
  Bytes out(kManifestMagic, kManifestMagic + 4);
  put_u64(out, k);
  put_u32(out, n);
  put_u32(out, total());
  put_u32(out, cursor);
  put_u32(out, static_cast<uint32_t>(sealed_length));
  out.reserve(out.size() + sealed.size() * sealed_length);
  for (const Bytes& s : sealed) out.insert(out.end(), s.begin(), s.end());
  return out;
}

Manifest Manifest::parse(ByteView bytes) {
  ByteReader r(bytes);
  ByteView magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kManifestMagic)) throw Error("not a manifest");
  Manifest m;
  m.k = r.u64();
  m.n = r.u32();
  uint32_t total = r.u32();
  m.cursor = r.u32();
  m.sealed_length = r.u32();
  if (m.k == 0 || m.n == 0 || m.cursor > total || m.sealed_length == 0) {
    throw Error("inconsistent manifest header");
  }
  if (r.remaining() != uint64_t{total} * m.sealed_length) throw Error("manifest length mismatch");
  m.sealed.reserve(total);
  for (uint32_t i = 0; i < total; ++i) {
    ByteView s = r.take(m.sealed_length);
    m.sealed.emplace_back(s.begin(), s.end());
  }
  return m;
}

Manifest prepare_file(ByteView file, const dj::PublicKey& dj_pub, const envelope::PublicKey& env_pub,
                      double rho, double delta, Rng& rng) {
  if (file.empty()) throw Error("cannot prepare an empty file");
  if (!dj_pub.supports_chunks()) throw Error("key too small for chunks");
  const size_t block_size = dj_pub.data_bytes();
  const uint32_t n = block_count(file.size(), block_size);
  const uint32_t total = packet_count(n, rho, delta);

  Bytes framed = FileHeader::of(file).serialize();
  framed.insert(framed.end(), file.begin(), file.end());
  fountain::SourceBlockSet set = fountain::SourceBlockSet::split(framed, block_size);

  Manifest manifest;
  dj::ChunkMeta meta = dj::ChunkMeta::random(rng, 0, n);
  manifest.k = meta.k;
  manifest.n = n;
  manifest.sealed_length = envelope::sealed_length(dj_pub.chunk_bytes());
  manifest.sealed.reserve(total);
  for (uint32_t i = 0; i < total; ++i) {
    meta.i = i;
    fountain::FountainPacket packet = fountain::encode_packet(set, meta.k, i);
    dj::Chunk chunk = dj::enc_data(dj_pub, from_be(packet.payload), meta, rng);
    manifest.sealed.push_back(
        envelope::seal(env_pub, dj::serialize_chunk(dj_pub, chunk), dj_pub.chunk_bytes(), rng));
  }
  return manifest;
}

std::optional<Bytes> next_chunk(Manifest& manifest) {
  if (manifest.cursor >= manifest.total()) return std::nullopt;
  return manifest.sealed[manifest.cursor++];
}

std::optional<Bytes> next_chunk_from_file(const std::filesystem::path& path) {
  FdGuard fd(::open(path.c_str(), O_RDWR | O_CLOEXEC));
  if (fd.get() < 0) throw Error("cannot open manifest " + path.string());
  if (::flock(fd.get(), LOCK_EX) != 0) throw Error("cannot lock manifest");
  uint8_t header[kManifestHeaderBytes];
  pread_exact(fd.get(), header, sizeof header, 0);
  if (std::memcmp(header, kManifestMagic, 4) != 0) throw Error("not a manifest");
  ByteView hv(header, sizeof header);
  uint32_t total = get_u32(hv, 16);
  uint32_t cursor = get_u32(hv, kCursorOffset);
  uint32_t sealed_length = get_u32(hv, kCursorOffset + 4);
  if (cursor >= total) return std::nullopt;
  Bytes chunk(sealed_length);
  off_t offset = static_cast<off_t>(kManifestHeaderBytes + uint64_t{cursor} * sealed_length);
  pread_exact(fd.get(), chunk.data(), chunk.size(), offset);
  Bytes next;
  put_u32(next, cursor + 1);
  pwrite_exact(fd.get(), next.data(), next.size(), kCursorOffset);
  if (::fsync(fd.get()) != 0) throw Error("cannot sync manifest");
  return chunk;
}

const char* to_string(AddStatus status) {
  switch (status) {
    case AddStatus::kNew:
      return "new";
    case AddStatus::kDuplicate:
      return "duplicate";
    case AddStatus::kComplete:
      return "complete";
    case AddStatus::kCorrupt:
      return "corrupt";
  }
  return "unknown";
}

std::shared_ptr<ReassemblyStore::Entry> ReassemblyStore::entry(uint64_t k) {
  std::lock_guard lock(mu_);
  auto& slot = files_[k];
  if (!slot) slot = std::make_shared<Entry>();
  return slot;
}

AddResult ReassemblyStore::add(const mpz_class& m, const dj::ChunkMeta& meta) {
  AddResult result;
  result.k = meta.k;
  if (meta.k == 0 || meta.n == 0 || meta.n > max_blocks_ || sgn(m) < 0 ||
      byte_length(m) > block_size_) {
    result.status = AddStatus::kCorrupt;
    return result;
  }
  std::shared_ptr<Entry> e = entry(meta.k);
  std::lock_guard lock(e->mu);
  if (e->state != State::kOpen) {
    result.status = AddStatus::kDuplicate;
    return result;
  }
  if (!e->decoder) {
    e->decoder = std::make_unique<fountain::Decoder>(meta.k, meta.n, block_size_);
  } else if (e->decoder->n() != meta.n) {
    result.status = AddStatus::kCorrupt;
    result.rank = e->decoder->rank();
    return result;
  }
  if (!e->seen.insert(meta.i).second) {
    result.status = AddStatus::kDuplicate;
    result.rank = e->decoder->rank();
    return result;
  }
  result.rank = e->decoder->add(fountain::FountainPacket{meta.i, to_fixed_be(m, block_size_)});
  result.status = AddStatus::kNew;
  if (!e->decoder->decodable()) return result;

  std::optional<std::vector<Bytes>> blocks = e->decoder->finish();
  Bytes framed;
  framed.reserve(blocks->size() * block_size_);
  for (const Bytes& b : *blocks) framed.insert(framed.end(), b.begin(), b.end());
  e->decoder.reset();
  e->seen.clear();

  FileHeader header = FileHeader::parse(framed);
  bool ok = header.length <= framed.size() - kHeaderBytes;
  Bytes file;
  if (ok) {
    auto body = framed.begin() + kHeaderBytes;
    file.assign(body, body + static_cast<std::ptrdiff_t>(header.length));
    ok = sha256(file) == header.digest &&
         std::all_of(body + static_cast<std::ptrdiff_t>(header.length), framed.end(),
                     [](uint8_t b) { return b == 0; });
  }
  std::lock_guard outer(mu_);
  if (ok) {
    e->state = State::kDone;
    ++completed_;
    result.status = AddStatus::kComplete;
    result.file = std::move(file);
  } else {
    e->state = State::kFailed;
    ++corrupt_;
    result.status = AddStatus::kCorrupt;
  }
  return result;
}

size_t ReassemblyStore::completed() const {
  std::lock_guard lock(mu_);
  return completed_;
}

size_t ReassemblyStore::corrupt() const {
  std::lock_guard lock(mu_);
  return corrupt_;
}

size_t ReassemblyStore::in_progress() const {
  std::lock_guard lock(mu_);
  return files_.size() - completed_ - corrupt_;
}

}  // namespace alk::disclosure
