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

#include "alk/services.hpp"

#include <gtest/gtest.h>

#include "alk/bundle.hpp"
#include "alk/codec.hpp"
#include "test_keys.hpp"

namespace alk::services {
namespace {

using namespace std::chrono_literals;
using alk::testing::toy_keys;

const envelope::KeyPair& env_keys() {
  static const envelope::KeyPair keys = [] {
    Rng rng(uint64_t{0xe3});
    return envelope::env_keygen(rng);
  }();
  return keys;
}

size_t sealed_len() { return envelope::sealed_length(toy_keys().pub.chunk_bytes()); }

std::string sealed_b64(const dj::Chunk& chunk, Rng& rng) {
  const auto& pub = toy_keys().pub;
  return base64_encode(envelope::seal(env_keys().pub, dj::serialize_chunk(pub, chunk), pub.chunk_bytes(), rng));
}

net::Endpoint local(uint16_t port = 0) { return net::Endpoint{"127.0.0.1", port}; }

uint16_t free_port() {
  net::Listener l = net::Listener::bind(local());
  return l.port();
}

struct Stack {
  explicit Stack(relay::EpochConfig epoch = relay::EpochConfig{1.0, 64, 1},
                 std::filesystem::path out = {})
      : dec(DecryptorOptions{local(), local(), std::move(out), decryptor::DecryptorConfig{}},
            toy_keys().priv) {
    dec.start();
    agg = std::make_unique<AggregatorService>(
        AggregatorOptions{local(), local(dec.port()), epoch, true, 1}, toy_keys().pub,
        env_keys().priv, Rng(uint64_t{77}));
    agg->start();
    guard = std::make_unique<GuardService>(GuardOptions{local(), local(agg->port()), sealed_len()});
    guard->start();
  }

  // Closes the epoch once every request posted so far has reached the
  // aggregator, then waits for the decryptor.
  void close_epoch() {
    guard->drain();
    ASSERT_TRUE(agg->wait_for_frames(guard->counters().forwarded, 10s));
    agg->flush_now();
    ASSERT_TRUE(dec.wait_for_epochs(++epochs, 10s));
  }

  DecryptorService dec;
  std::unique_ptr<AggregatorService> agg;
  std::unique_ptr<GuardService> guard;
  uint64_t epochs = 0;
};

TEST(ServicesTest, GrayThroughAllTiers) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{1});
  Stack stack;
  GuardClient client(local(stack.guard->port()));
  dj::ChunkMeta meta = dj::ChunkMeta::random(rng, 0, 5);
  EXPECT_EQ(client.post(sealed_b64(dj::enc_data(keys.pub, 4242, meta, rng), rng)), 204);
  for (int j = 0; j < 20; ++j) EXPECT_EQ(client.post(sealed_b64(dj::enc_zero(keys.pub, rng), rng)), 204);
  EXPECT_EQ(client.post("garbage"), 204);
  stack.close_epoch();
  DecryptorStatus s = stack.dec.status();
  EXPECT_EQ(s.epochs, 1u);
  EXPECT_EQ(s.aggregates, 64u);
  EXPECT_EQ(s.recovered, 1u);
  EXPECT_EQ(s.blacks, 0u);
  GuardCounters g = stack.guard->counters();
  EXPECT_EQ(g.requests, 22u);
  EXPECT_EQ(g.malformed, 1u);
  EXPECT_EQ(g.forwarded, 21u);
  EXPECT_EQ(stack.agg->counters().accepted, 21u);

  auto text = fetch_status(local(stack.dec.status_port()));
  ASSERT_TRUE(text.has_value());
  EXPECT_NE(text->find("recovered 1\n"), std::string::npos);
  EXPECT_NE(text->find("epochs 1\n"), std::string::npos);
}

std::string raw_post(uint16_t port, const std::string& body) {
  net::Socket s = net::connect_tcp(local(port));
  std::string req = "POST /a HTTP/1.1\r\nHost: guard\r\nContent-Type: text/plain\r\nConnection: close\r\n"
                    "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
  s.write_all(to_bytes(req));
  std::string out;
  uint8_t buf[4096];
  while (size_t n = s.read_some(buf)) out.append(reinterpret_cast<char*>(buf), n);
  return out;
}

TEST(ServicesTest, GuardResponsesIdentical) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{2});
  Stack stack;
  std::string white = raw_post(stack.guard->port(), sealed_b64(dj::enc_zero(keys.pub, rng), rng));
  std::string gray = raw_post(stack.guard->port(),
                              sealed_b64(dj::enc_data(keys.pub, 1, dj::ChunkMeta::random(rng, 0, 1), rng), rng));
  std::string junk = raw_post(stack.guard->port(), "!!!");
  std::string tampered_body = sealed_b64(dj::enc_zero(keys.pub, rng), rng);
  tampered_body[100] = tampered_body[100] == 'A' ? 'B' : 'A';
  std::string tampered = raw_post(stack.guard->port(), tampered_body);
  EXPECT_EQ(white.rfind("HTTP/1.1 204", 0), 0u);
  EXPECT_EQ(white, gray);
  EXPECT_EQ(white, junk);
  EXPECT_EQ(white, tampered);
}

TEST(ServicesTest, ConnectionWithoutHelloIsDropped) {
  Stack stack;
  net::Socket s = net::connect_tcp(local(stack.agg->port()));
  Rng rng(uint64_t{3});
  s.write_all(relay::encode_frame(relay::sealed_frame(rng.bytes(sealed_len()))));
  uint8_t buf[16];
  ASSERT_TRUE(s.wait_readable(5s));
  EXPECT_EQ(s.read_some(buf), 0u);
  EXPECT_EQ(stack.agg->counters().frames, 0u);
}

TEST(ServicesTest, AggregatorBuffersOneEpochWhileUpstreamDown) {
  const auto& keys = toy_keys();
  uint16_t port = free_port();
  AggregatorService agg(AggregatorOptions{local(), local(port), relay::EpochConfig{1.0, 8, 1}, true, 1},
                        keys.pub, env_keys().priv, Rng(uint64_t{4}));
  agg.start();
  agg.flush_now();
  agg.flush_now();
  agg.flush_now();
  AggregatorCounters c = agg.counters();
  EXPECT_EQ(c.epochs_sent, 0u);
  EXPECT_EQ(c.epochs_dropped, 2u);
  DecryptorService dec(DecryptorOptions{local(port), std::nullopt, {}, decryptor::DecryptorConfig{}},
                       keys.priv);
  dec.start();
  agg.flush_now();
  ASSERT_TRUE(dec.wait_for_epochs(2, 10s));
  EXPECT_EQ(agg.counters().epochs_sent, 2u);
  agg.stop();
  dec.stop();
}

TEST(ServicesTest, FileWrittenToOutputDirectory) {
  const auto& keys = toy_keys();
  Rng rng(uint64_t{5});
  std::filesystem::path out = std::filesystem::temp_directory_path() / "alk_services_out";
  std::filesystem::remove_all(out);
  Bytes file = rng.bytes(1000);
  disclosure::Manifest manifest =
      disclosure::prepare_file(file, keys.pub, env_keys().pub, 0.9, disclosure::kDefaultDelta, rng);
  Stack stack(relay::EpochConfig{1.0, 256, 1}, out);
  GuardClient client(local(stack.guard->port()));
  while (auto sealed = disclosure::next_chunk(manifest)) {
    for (int j = 0; j < 3; ++j) client.post(sealed_b64(dj::enc_zero(keys.pub, rng), rng));
    client.post(base64_encode(*sealed));
    if (manifest.cursor % 2 == 0) stack.close_epoch();
  }
  stack.close_epoch();
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.bin", static_cast<unsigned long long>(manifest.k));
  ASSERT_TRUE(std::filesystem::exists(out / name));
  EXPECT_EQ(read_file(out / name), file);
  EXPECT_EQ(stack.dec.status().files_completed, 1u);
  std::filesystem::remove_all(out);
}

}  // namespace
}  // namespace alk::services
