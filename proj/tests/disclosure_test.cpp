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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "alk/bundle.hpp"
#include "test_keys.hpp"

namespace alk::disclosure {
namespace {

using alk::testing::toy_keys;

struct Recovered {
  mpz_class m;
  dj::ChunkMeta meta;
};

const envelope::KeyPair& env_keys() {
  static const envelope::KeyPair keys = [] {
    Rng rng(uint64_t{0xe1});
    return envelope::env_keygen(rng);
  }();
  return keys;
}

std::vector<Recovered> open_all(const Manifest& manifest) {
  const auto& keys = toy_keys();
  std::vector<Recovered> out;
  for (const Bytes& sealed : manifest.sealed) {
    auto opened = envelope::open(env_keys().priv, sealed, keys.pub.chunk_bytes());
    EXPECT_TRUE(opened.has_value());
    auto pt = dj::dec_vrfy(keys.priv, dj::parse_chunk(keys.pub, *opened));
    EXPECT_TRUE(pt.has_value());
    out.push_back({pt->m, pt->meta});
  }
  return out;
}

// Prepared once per binary: a 10 KB file at toy size.
struct Prepared {
  Bytes file;
  Manifest manifest;
  std::vector<Recovered> chunks;
};

const Prepared& prepared_10k() {
  static const Prepared p = [] {
    Rng rng(uint64_t{0x10});
    Prepared out;
    out.file = rng.bytes(10 * 1024);
    out.manifest = prepare_file(out.file, toy_keys().pub, env_keys().pub, 0.9, kDefaultDelta, rng);
    out.chunks = open_all(out.manifest);
    return out;
  }();
  return p;
}

TEST(PlanTest, ReferenceFileSizes) {
  EXPECT_EQ(block_count(2u << 20, 2303), 911u);
  EXPECT_EQ(packet_count(911, 0.9, kDefaultDelta), 1035u);
  uint32_t coarse = packet_count(911, 0.9, 1.0);
  EXPECT_EQ(coarse, 1013u);
  EXPECT_NEAR(coarse, 1010, 1010 * 0.05);
}

TEST(PlanTest, Boundaries) {
  EXPECT_EQ(block_count(0, 2303), 1u);
  EXPECT_EQ(block_count(2303 - 40, 2303), 1u);
  EXPECT_EQ(block_count(2303 - 39, 2303), 2u);
  EXPECT_EQ(packet_count(1, 1.0, 1.0), 1u);
  EXPECT_EQ(packet_count(10, 1.0, 0.25), 12u);
  EXPECT_THROW(packet_count(10, 0.0, 0.5), Error);
  EXPECT_THROW(packet_count(10, 1.5, 0.5), Error);
  EXPECT_THROW(packet_count(10, 0.5, 0.0), Error);
  EXPECT_THROW(block_count(uint64_t{1} << 50, 2), Error);
}

TEST(FileHeaderTest, RoundTrip) {
  Bytes file = to_bytes("hello");
  FileHeader h = FileHeader::of(file);
  Bytes wire = h.serialize();
  ASSERT_EQ(wire.size(), kHeaderBytes);
  FileHeader back = FileHeader::parse(wire);
  EXPECT_EQ(back.length, 5u);
  EXPECT_EQ(back.digest, sha256(file));
}

TEST(PrepareTest, RejectsEmptyFile) {
  Rng rng(uint64_t{1});
  EXPECT_THROW(prepare_file({}, toy_keys().pub, env_keys().pub, 0.9, kDefaultDelta, rng), Error);
}

TEST(PrepareTest, ManifestShape) {
  const Prepared& p = prepared_10k();
  const auto& pub = toy_keys().pub;
  uint32_t n = block_count(p.file.size(), pub.data_bytes());
  EXPECT_EQ(p.manifest.n, n);
  EXPECT_EQ(p.manifest.total(), packet_count(n, 0.9, kDefaultDelta));
  EXPECT_NE(p.manifest.k, 0u);
  for (const Bytes& s : p.manifest.sealed) {
    EXPECT_EQ(s.size(), envelope::sealed_length(pub.chunk_bytes()));
  }
  std::set<uint32_t> indices;
  for (const Recovered& r : p.chunks) {
    EXPECT_EQ(r.meta.k, p.manifest.k);
    EXPECT_EQ(r.meta.n, n);
    indices.insert(r.meta.i);
  }
  EXPECT_EQ(indices.size(), p.manifest.total());
}

TEST(PrepareTest, NextChunkExhausts) {
  Manifest m = prepared_10k().manifest;
  std::set<Bytes> seen;
  for (uint32_t i = 0; i < m.total(); ++i) {
    auto chunk = next_chunk(m);
    ASSERT_TRUE(chunk.has_value());
    seen.insert(*chunk);
  }
  EXPECT_EQ(seen.size(), m.total());
  EXPECT_FALSE(next_chunk(m).has_value());
  EXPECT_EQ(m.remaining(), 0u);
}

TEST(ManifestTest, SerializationRoundTrip) {
  Manifest m = prepared_10k().manifest;
  m.cursor = 3;
  Manifest back = Manifest::parse(m.serialize());
  EXPECT_EQ(back.k, m.k);
  EXPECT_EQ(back.n, m.n);
  EXPECT_EQ(back.cursor, 3u);
  EXPECT_EQ(back.sealed, m.sealed);
  Bytes wire = m.serialize();
  wire.pop_back();
  EXPECT_THROW(Manifest::parse(wire), Error);
  wire = m.serialize();
  wire[0] = 'X';
  EXPECT_THROW(Manifest::parse(wire), Error);
}

TEST(ManifestTest, FileCursorIsExclusiveAcrossThreads) {
  const Manifest& m = prepared_10k().manifest;
  std::filesystem::path path = std::filesystem::temp_directory_path() / "alk_manifest_test.alkm";
  write_file_atomic(path, m.serialize());
  std::vector<std::vector<Bytes>> taken(4);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      while (auto c = next_chunk_from_file(path)) taken[t].push_back(*c);
    });
  }
  for (auto& th : threads) th.join();
  std::multiset<Bytes> all;
  for (const auto& v : taken) all.insert(v.begin(), v.end());
  EXPECT_EQ(all.size(), m.total());
  EXPECT_EQ(std::multiset<Bytes>(m.sealed.begin(), m.sealed.end()), all);
  Manifest after = Manifest::parse(read_file(path));
  EXPECT_EQ(after.cursor, m.total());
  std::filesystem::remove(path);
}

TEST(ReassemblyTest, RandomOrderIsBitIdentical) {
  const Prepared& p = prepared_10k();
  std::vector<Recovered> chunks = p.chunks;
  Rng rng(uint64_t{2});
  std::shuffle(chunks.begin(), chunks.end(), rng);
  ReassemblyStore store(toy_keys().pub.data_bytes());
  std::optional<Bytes> file;
  for (const Recovered& r : chunks) {
    AddResult res = store.add(r.m, r.meta);
    if (res.status == AddStatus::kComplete) {
      EXPECT_FALSE(file.has_value());
      file = res.file;
    } else {
      EXPECT_TRUE(res.status == AddStatus::kNew || res.status == AddStatus::kDuplicate);
    }
  }
  ASSERT_TRUE(file.has_value());
  EXPECT_EQ(*file, p.file);
  EXPECT_EQ(store.completed(), 1u);
  EXPECT_EQ(store.in_progress(), 0u);
}

TEST(ReassemblyTest, SurvivesNinePercentLoss) {
  const Prepared& p = prepared_10k();
  const size_t keep = p.chunks.size() - static_cast<size_t>(std::floor(p.chunks.size() * 0.09));
  Rng rng(uint64_t{3});
  int successes = 0;
  constexpr int kTrials = 200;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<Recovered> chunks = p.chunks;
    std::shuffle(chunks.begin(), chunks.end(), rng);
    chunks.resize(keep);
    ReassemblyStore store(toy_keys().pub.data_bytes());
    for (const Recovered& r : chunks) {
      AddResult res = store.add(r.m, r.meta);
      if (res.status == AddStatus::kComplete && res.file == p.file) ++successes;
    }
  }
  EXPECT_GE(successes, kTrials - 2);
}

TEST(ReassemblyTest, DuplicateIndex) {
  const Prepared& p = prepared_10k();
  ReassemblyStore store(toy_keys().pub.data_bytes());
  EXPECT_EQ(store.add(p.chunks[0].m, p.chunks[0].meta).status, AddStatus::kNew);
  AddResult dup = store.add(p.chunks[0].m, p.chunks[0].meta);
  EXPECT_EQ(dup.status, AddStatus::kDuplicate);
  EXPECT_EQ(dup.rank, 1u);
}

// Encodes framed bytes directly, bypassing encryption.
std::vector<Recovered> fake_chunks(ByteView framed, uint64_t k, size_t block_size, uint32_t count) {
  auto set = fountain::SourceBlockSet::split(framed, block_size);
  uint32_t n = static_cast<uint32_t>(set.count());
  std::vector<Recovered> out;
  for (uint32_t i = 0; i < count; ++i) {
    out.push_back({from_be(fountain::encode_packet(set, k, i).payload), dj::ChunkMeta{k, i, n}});
  }
  return out;
}

Bytes framed_file(ByteView file) {
  Bytes framed = FileHeader::of(file).serialize();
  framed.insert(framed.end(), file.begin(), file.end());
  return framed;
}

TEST(ReassemblyTest, InterleavedFilesStaySeparate) {
  constexpr size_t kBlock = 64;
  Rng rng(uint64_t{4});
  Bytes a = rng.bytes(1000), b = rng.bytes(1500);
  auto ca = fake_chunks(framed_file(a), 11, kBlock, 60);
  auto cb = fake_chunks(framed_file(b), 12, kBlock, 60);
  std::vector<Recovered> mixed = ca;
  mixed.insert(mixed.end(), cb.begin(), cb.end());
  std::shuffle(mixed.begin(), mixed.end(), rng);
  ReassemblyStore store(kBlock);
  std::map<uint64_t, Bytes> done;
  for (const Recovered& r : mixed) {
    AddResult res = store.add(r.m, r.meta);
    if (res.status == AddStatus::kComplete) done[res.k] = *res.file;
  }
  EXPECT_EQ(done[11], a);
  EXPECT_EQ(done[12], b);
  EXPECT_EQ(store.completed(), 2u);
}

TEST(ReassemblyTest, DigestMismatchIsCorrupt) {
  constexpr size_t kBlock = 64;
  Rng rng(uint64_t{5});
  Bytes file = rng.bytes(500);
  Bytes framed = framed_file(file);
  framed[kHeaderBytes + 7] ^= 1;
  ReassemblyStore store(kBlock);
  AddStatus last = AddStatus::kNew;
  for (const Recovered& r : fake_chunks(framed, 21, kBlock, 40)) {
    AddStatus s = store.add(r.m, r.meta).status;
    if (s != AddStatus::kDuplicate) last = s;
  }
  EXPECT_EQ(last, AddStatus::kCorrupt);
  EXPECT_EQ(store.corrupt(), 1u);
  EXPECT_EQ(store.completed(), 0u);
}

TEST(ReassemblyTest, InconsistentMetadataIsCorrupt) {
  ReassemblyStore store(64, 100);
  EXPECT_EQ(store.add(1, dj::ChunkMeta{5, 0, 10}).status, AddStatus::kNew);
  EXPECT_EQ(store.add(1, dj::ChunkMeta{5, 1, 11}).status, AddStatus::kCorrupt);
  EXPECT_EQ(store.add(1, dj::ChunkMeta{6, 0, 101}).status, AddStatus::kCorrupt);
  mpz_class too_big = mpz_class(1) << (64 * 8);
  EXPECT_EQ(store.add(too_big, dj::ChunkMeta{7, 0, 3}).status, AddStatus::kCorrupt);
}

}  // namespace
}  // namespace alk::disclosure
