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

#include "alk/bundle.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_keys.hpp"

namespace alk {
namespace {

using alk::testing::tiny_keys;
using alk::testing::toy_keys;

KeyBundle toy_bundle() {
  Rng rng(uint64_t{0xb0});
  return KeyBundle{toy_keys().pub, envelope::env_keygen(rng).pub};
}

TEST(KeyBundle, RoundTrip) {
  KeyBundle b = toy_bundle();
  KeyBundle back = KeyBundle::parse(b.serialize());
  EXPECT_TRUE(back.dj == b.dj);
  EXPECT_EQ(back.env.bytes, b.env.bytes);
  EXPECT_EQ(back.sealed_length(), 3 * 64 + 2 * 64 + 49u);
}

TEST(KeyBundle, TinyKeyLayout) {
  KeyBundle b{tiny_keys().pub, {}};
  b.env.bytes.fill(0x11);
  const uint32_t sealed = static_cast<uint32_t>(b.sealed_length());
  std::string expect =
      "414c4b31"                  // ALK1
      "0000000123"                // N = 35
      "0000000400000001"          // sData
      "0000000104"                // g
      "0000000110"                // h
      "0000000400000028"          // B = 40
      "00000020" + std::string(64, '1') + "00000004";
  Bytes len;
  put_u32(len, sealed);
  EXPECT_EQ(to_hex(b.serialize()), expect + to_hex(len));
}

TEST(KeyBundle, RejectsDamage) {
  Bytes good = toy_bundle().serialize();
  Bytes bad = good;
  bad[0] = 'X';
  EXPECT_THROW(KeyBundle::parse(bad), Error);
  bad = good;
  bad.back() ^= 1;  // sealed length disagrees with the key
  EXPECT_THROW(KeyBundle::parse(bad), Error);
  bad = good;
  bad.push_back(0);
  EXPECT_THROW(KeyBundle::parse(bad), Error);
  bad.assign(good.begin(), good.end() - 3);
  EXPECT_THROW(KeyBundle::parse(bad), Error);
}

TEST(Files, AtomicWriteAndRead) {
  auto dir = std::filesystem::temp_directory_path() / "alk_bundle_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "pub.alk";
  Bytes data = toy_bundle().serialize();
  write_file_atomic(path, data);
  write_file_atomic(path, data);
  EXPECT_EQ(read_file(path), data);
  EXPECT_FALSE(std::filesystem::exists(dir / "pub.alk.tmp"));
  EXPECT_THROW(read_file(dir / "missing"), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace alk
