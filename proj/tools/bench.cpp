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

#include "bench.hpp"

#include <chrono>
#include <functional>

#include "alk/codec.hpp"
#include "alk/decryptor.hpp"
#include "alk/envelope.hpp"
#include "alk/relay.hpp"

namespace alk::cli {

namespace {

BenchRecord time_op(const std::string& op, uint64_t iterations, const std::function<void(uint64_t)>& body) {
  auto start = std::chrono::steady_clock::now();
  for (uint64_t j = 0; j < iterations; ++j) body(j);
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {op, iterations, s};
}

}  // namespace

BenchReport run_bench(const BenchOptions& options) {
  if (options.iterations == 0) throw Error("iterations must be at least 1");
  Rng rng(options.seed);
  dj::KeyPair keys = dj::keygen(options.bits, options.s_data, rng);
  envelope::KeyPair env = envelope::env_keygen(rng);
  const dj::PublicKey& pk = keys.pub;
  const size_t width = pk.chunk_bytes();
  const uint64_t n = options.iterations;
  BenchReport report{options.bits, options.s_data, width, {}};

  dj::enc_zero(pk, rng);  // builds the fixed-base tables
  std::vector<dj::Chunk> whites, grays;
  report.records.push_back(time_op("enc_zero", n, [&](uint64_t) { whites.push_back(dj::enc_zero(pk, rng)); }));
  report.records.push_back(time_op("enc_data", n, [&](uint64_t j) {
    mpz_class m = from_be(rng.bytes(pk.data_bytes()));
    grays.push_back(dj::enc_data(pk, m, dj::ChunkMeta::random(rng, static_cast<uint32_t>(j), 1), rng));
  }));
  std::vector<Bytes> sealed;
  report.records.push_back(time_op("seal", n, [&](uint64_t j) {
    sealed.push_back(envelope::seal(env.pub, dj::serialize_chunk(pk, whites[j]), width, rng));
  }));
  std::vector<std::string> bodies;
  for (const Bytes& s : sealed) bodies.push_back(base64_encode(s));
  report.records.push_back(time_op("guard_handle", n, [&](uint64_t j) {
    if (!relay::guard_handle(bodies[j], envelope::sealed_length(width))) throw Error("guard rejected a valid body");
  }));
  report.records.push_back(time_op("open", n, [&](uint64_t j) {
    if (!envelope::open(env.priv, sealed[j], width)) throw Error("open failed");
  }));
  dj::Chunk acc = dj::Chunk::identity();
  report.records.push_back(time_op("aggregate", n, [&](uint64_t j) { dj::aggregate_into(pk, acc, whites[j]); }));
  relay::EpochConfig ec;
  ec.bucket_count = 64;
  relay::Aggregator agg(pk, env.priv, ec, Rng(options.seed + 1));
  report.records.push_back(time_op("aggregator_ingest", n, [&](uint64_t j) {
    if (!agg.ingest_sealed(sealed[j])) throw Error("aggregator rejected a valid chunk");
  }));
  report.records.push_back(time_op("decrypt_tag", n, [&](uint64_t j) { dj::decrypt_tag(keys.priv, grays[j].t); }));
  report.records.push_back(time_op("dec_vrfy", n, [&](uint64_t j) {
    if (!dj::dec_vrfy(keys.priv, grays[j])) throw Error("dec_vrfy failed");
  }));
  // One tree of height 6 holding a single gray: the sparse case.
  std::vector<dj::Chunk> leaves(whites.begin(), whites.begin() + std::min<uint64_t>(n, 63));
  leaves.push_back(grays[0]);
  decryptor::DecTree tree = decryptor::build_tree(pk, leaves, 6);
  report.records.push_back(time_op("tree_decrypt_h6_1gray", std::max<uint64_t>(1, n / 10), [&](uint64_t) {
    decryptor::tree_decrypt(keys.priv, tree);
  }));
  return report;
}

}  // namespace alk::cli
