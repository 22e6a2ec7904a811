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

// Tree decryption of epoch aggregates.
//
// Leaves of a full binary tree are aggregates; every inner node is the
// product of its children. Decrypting a node's tag and its left child's tag
// yields the right child's tag by subtraction, and subtrees whose tag has an
// empty r0 field are white and skipped.

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "alk/dj.hpp"
#include "alk/relay.hpp"

namespace alk::decryptor {

inline constexpr unsigned kDefaultTreeHeight = 8;

struct Provenance {
  uint64_t epoch = 0;
  uint16_t set = 0;
  uint32_t bucket = 0;
};

struct Leaf {
  dj::Chunk chunk;
  Provenance where;
};

// Heap layout: node 1 is the root, node j has children 2j and 2j+1, leaves
// occupy [2^height, 2^(height+1)).
struct DecTree {
  unsigned height = 0;
  std::vector<dj::Chunk> nodes;

  size_t leaf_count() const { return size_t{1} << height; }
  const dj::Chunk& root() const { return nodes[1]; }
  const dj::Chunk& leaf(size_t j) const { return nodes[leaf_count() + j]; }
};

// Pads with identities up to 2^height leaves. Throws if there are more.
DecTree build_tree(const dj::PublicKey& pk, std::span<const dj::Chunk> leaves, unsigned height);

struct TreeStats {
  uint64_t tag_decryptions = 0;
  uint64_t full_decryptions = 0;
  uint64_t invalid_leaves = 0;

  TreeStats& operator+=(const TreeStats& o);
};

struct LeafPlaintext {
  size_t leaf = 0;
  dj::Plaintext plaintext;
};

struct TreeResult {
  std::vector<LeafPlaintext> recovered;  // in leaf order
  std::vector<size_t> invalid;           // black leaves, in leaf order
  TreeStats stats;
};

TreeResult tree_decrypt(const dj::PrivateKey& sk, const DecTree& tree);

struct RecoveredChunk {
  mpz_class m;
  dj::ChunkMeta meta;
  Provenance where;
};

// Probability that a bucket holds two or more of k grays spread over m
// buckets.
double expected_black_fraction(double k, uint32_t m);

// Rolling black-rate alarm over the last `window` epochs. The gray count of
// an epoch is estimated from below as recovered + 2 * blacks per set.
class BlackRateMonitor {
 public:
  BlackRateMonitor(double alert_factor, size_t window, uint64_t min_blacks = 5)
      : factor_(alert_factor), window_(window), min_blacks_(min_blacks) {}

  void record(uint64_t aggregates, uint64_t blacks, uint64_t recovered, uint32_t buckets_per_set,
              uint32_t split_count);
  double observed_rate() const;
  double expected_rate() const;
  bool alert() const;

 private:
  struct Sample {
    uint64_t aggregates;
    uint64_t blacks;
    double expected_blacks;
  };

  double factor_;
  size_t window_;
  uint64_t min_blacks_;
  std::deque<Sample> samples_;
};

struct DecryptorConfig {
  unsigned tree_height = kDefaultTreeHeight;
  unsigned workers = 1;
  uint32_t split_count = 1;
  double black_alert_factor = 3.0;
  size_t black_window_epochs = 60;
};

struct EpochReport {
  uint64_t epoch = 0;
  uint64_t aggregates = 0;
  uint64_t trees = 0;
  uint64_t recovered = 0;   // forwarded, after dedup
  uint64_t duplicates = 0;  // verified but already seen
  uint64_t blacks = 0;
  TreeStats stats;
  std::vector<Provenance> black_where;
};

struct Totals {
  uint64_t epochs = 0;
  uint64_t aggregates = 0;
  uint64_t recovered = 0;
  uint64_t duplicates = 0;
  uint64_t blacks = 0;
  TreeStats stats;
};

class Decryptor {
 public:
  Decryptor(dj::PrivateKey sk, DecryptorConfig config);

  // Leaves in (set, bucket) order are cut into trees of 2^height; trees run
  // on the worker pool. Chunks whose (k, i) was forwarded before are
  // dropped. Appends newly recovered chunks to `out` in leaf order.
  EpochReport process_epoch(uint64_t epoch, const std::vector<Leaf>& leaves,
                            std::vector<RecoveredChunk>& out);

  Totals totals() const;
  bool black_alert() const;
  double black_rate() const;
  const DecryptorConfig& config() const { return config_; }
  const dj::PrivateKey& private_key() const { return sk_; }

 private:
  struct KeyHash {
    size_t operator()(const std::pair<uint64_t, uint32_t>& p) const {
      return std::hash<uint64_t>()(p.first * 0x9e3779b97f4a7c15ULL ^ p.second);
    }
  };

  dj::PrivateKey sk_;
  DecryptorConfig config_;
  mutable std::mutex mu_;
  std::unordered_set<std::pair<uint64_t, uint32_t>, KeyHash> seen_;
  Totals totals_;
  BlackRateMonitor monitor_;
};

// Groups aggregate frames by epoch and releases an epoch when its marker
// arrives.
class EpochCollector {
 public:
  explicit EpochCollector(dj::PublicKey pk, size_t max_pending_epochs = 4)
      : pk_(std::move(pk)), max_pending_(max_pending_epochs) {}

  struct Batch {
    uint64_t epoch = 0;
    std::vector<Leaf> leaves;  // sorted by (set, bucket)
    uint32_t announced = 0;    // count carried by the marker
  };

  // Returns a batch when `frame` is an epoch marker. Malformed aggregate
  // frames are counted and dropped.
  std::optional<Batch> add(const relay::Frame& frame);
  uint64_t malformed() const { return malformed_; }

 private:
  dj::PublicKey pk_;
  size_t max_pending_;
  std::map<uint64_t, std::vector<Leaf>> pending_;
  uint64_t malformed_ = 0;
};

}  // namespace alk::decryptor
