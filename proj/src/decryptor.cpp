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

#include "alk/decryptor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <tuple>

namespace alk::decryptor {

DecTree build_tree(const dj::PublicKey& pk, std::span<const dj::Chunk> leaves, unsigned height) {
  if (height > 20) throw Error("tree height too large");
  DecTree tree;
  tree.height = height;
  const size_t width = tree.leaf_count();
  if (leaves.size() > width) throw Error("more leaves than the tree holds");
  tree.nodes.assign(2 * width, dj::Chunk::identity());
  std::copy(leaves.begin(), leaves.end(), tree.nodes.begin() + static_cast<std::ptrdiff_t>(width));
  for (size_t j = width - 1; j >= 1; --j) {
    tree.nodes[j] = dj::aggregate(pk, tree.nodes[2 * j], tree.nodes[2 * j + 1]);
  }
  return tree;
}

TreeStats& TreeStats::operator+=(const TreeStats& o) {
  tag_decryptions += o.tag_decryptions;
  full_decryptions += o.full_decryptions;
  invalid_leaves += o.invalid_leaves;
  return *this;
}

namespace {

class TreeWalk {
 public:
  TreeWalk(const dj::PrivateKey& sk, const DecTree& tree, TreeResult& out)
      : sk_(sk), tree_(tree), out_(out), layout_(sk.pub().layout()), n_(sk.pub().modulus()) {}

  void visit(size_t node, std::optional<mpz_class> tag) {
    if (!tag) {
      tag = decrypt(node);
      if (!tag) {
        // Tag is not a unit; nothing below can be trusted through sums.
        if (is_leaf(node)) {
          mark_invalid(node);
        } else {
          visit(2 * node, std::nullopt);
          visit(2 * node + 1, std::nullopt);
        }
        return;
      }
    }
    dj::TagPlaintext value{*tag};
    if (value.r0_field(layout_) == 0) return;
    if (is_leaf(node)) {
      ++out_.stats.full_decryptions;
      auto pt = dj::dec_vrfy_with_tag(sk_, tree_.nodes[node], value);
      if (pt && !pt->white()) {
        out_.recovered.push_back({node - tree_.leaf_count(), std::move(*pt)});
      } else {
        mark_invalid(node);
      }
      return;
    }
    std::optional<mpz_class> left = decrypt(2 * node);
    if (!left) {
      visit(2 * node, std::nullopt);
      visit(2 * node + 1, std::nullopt);
      return;
    }
    mpz_class right = *tag - *left;
    if (right < 0) right += n_;
    visit(2 * node, std::move(left));
    visit(2 * node + 1, std::move(right));
  }

 private:
  bool is_leaf(size_t node) const { return node >= tree_.leaf_count(); }

  void mark_invalid(size_t node) {
    ++out_.stats.invalid_leaves;
    out_.invalid.push_back(node - tree_.leaf_count());
  }

  std::optional<mpz_class> decrypt(size_t node) {
    ++out_.stats.tag_decryptions;
    try {
      return dj::decrypt_tag(sk_, tree_.nodes[node].t);
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  const dj::PrivateKey& sk_;
  const DecTree& tree_;
  TreeResult& out_;
  const dj::TagLayout& layout_;
  const mpz_class& n_;
};

}  // namespace

TreeResult tree_decrypt(const dj::PrivateKey& sk, const DecTree& tree) {
  TreeResult out;
  TreeWalk(sk, tree, out).visit(1, std::nullopt);
  return out;
}

double expected_black_fraction(double k, uint32_t m) {
  if (k < 2 || m == 0) return 0;
  double q = 1.0 - 1.0 / m;
  return 1.0 - std::pow(q, k) - k / m * std::pow(q, k - 1);
}

void BlackRateMonitor::record(uint64_t aggregates, uint64_t blacks, uint64_t recovered,
                              uint32_t buckets_per_set, uint32_t split_count) {
  double per_set_grays = static_cast<double>(recovered) +
                         2.0 * static_cast<double>(blacks) / std::max<uint32_t>(split_count, 1);
  double expected = static_cast<double>(split_count) * buckets_per_set *
                    expected_black_fraction(per_set_grays, buckets_per_set);
  samples_.push_back({aggregates, blacks, expected});
  while (samples_.size() > window_) samples_.pop_front();
}

double BlackRateMonitor::observed_rate() const {
  uint64_t aggs = 0, blacks = 0;
  for (const Sample& s : samples_) {
    aggs += s.aggregates;
    blacks += s.blacks;
  }
  return aggs == 0 ? 0 : static_cast<double>(blacks) / static_cast<double>(aggs);
}

double BlackRateMonitor::expected_rate() const {
  uint64_t aggs = 0;
  double blacks = 0;
  for (const Sample& s : samples_) {
    aggs += s.aggregates;
    blacks += s.expected_blacks;
  }
  return aggs == 0 ? 0 : blacks / static_cast<double>(aggs);
}

bool BlackRateMonitor::alert() const {
  uint64_t blacks = 0;
  for (const Sample& s : samples_) blacks += s.blacks;
  return blacks >= min_blacks_ && observed_rate() > factor_ * expected_rate();
}

Decryptor::Decryptor(dj::PrivateKey sk, DecryptorConfig config)
    : sk_(std::move(sk)),
      config_(config),
      monitor_(config.black_alert_factor, config.black_window_epochs) {
  if (config_.workers == 0) config_.workers = 1;
  if (config_.split_count == 0) throw Error("split count must be positive");
}

EpochReport Decryptor::process_epoch(uint64_t epoch, const std::vector<Leaf>& leaves,
                                     std::vector<RecoveredChunk>& out) {
  const size_t width = size_t{1} << config_.tree_height;
  const size_t trees = (leaves.size() + width - 1) / width;
  std::vector<TreeResult> results(trees);
  std::atomic<size_t> next{0};
  auto work = [&] {
    std::vector<dj::Chunk> chunks;
    for (size_t j; (j = next.fetch_add(1)) < trees;) {
      size_t begin = j * width, end = std::min(leaves.size(), begin + width);
      chunks.clear();
      for (size_t x = begin; x < end; ++x) chunks.push_back(leaves[x].chunk);
      results[j] = tree_decrypt(sk_, build_tree(sk_.pub(), chunks, config_.tree_height));
    }
  };
  size_t threads = std::min<size_t>(config_.workers, trees);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (size_t w = 0; w < threads; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  EpochReport report;
  report.epoch = epoch;
  report.aggregates = leaves.size();
  report.trees = trees;
  std::lock_guard lock(mu_);
  for (size_t j = 0; j < trees; ++j) {
    TreeResult& r = results[j];
    report.stats += r.stats;
    for (size_t leaf : r.invalid) report.black_where.push_back(leaves[j * width + leaf].where);
    for (LeafPlaintext& lp : r.recovered) {
      const dj::ChunkMeta& meta = lp.plaintext.meta;
      if (!seen_.insert({meta.k, meta.i}).second) {
        ++report.duplicates;
        continue;
      }
      ++report.recovered;
      out.push_back({std::move(lp.plaintext.m), meta, leaves[j * width + lp.leaf].where});
    }
  }
  report.blacks = report.black_where.size();
  uint32_t per_set = static_cast<uint32_t>(leaves.size() / config_.split_count);
  monitor_.record(report.aggregates, report.blacks, report.recovered, per_set, config_.split_count);
  ++totals_.epochs;
  totals_.aggregates += report.aggregates;
  totals_.recovered += report.recovered;
  totals_.duplicates += report.duplicates;
  totals_.blacks += report.blacks;
  totals_.stats += report.stats;
  return report;
}

Totals Decryptor::totals() const {
  std::lock_guard lock(mu_);
  return totals_;
}

bool Decryptor::black_alert() const {
  std::lock_guard lock(mu_);
  return monitor_.alert();
}

double Decryptor::black_rate() const {
  std::lock_guard lock(mu_);
  return monitor_.observed_rate();
}

std::optional<EpochCollector::Batch> EpochCollector::add(const relay::Frame& frame) {
  if (frame.is(relay::FrameType::kAggregate)) {
    try {
      relay::AggregateFrame a = relay::AggregateFrame::decode(frame);
      dj::Chunk chunk = dj::parse_chunk(pk_, a.chunk);
      pending_[a.epoch].push_back(Leaf{std::move(chunk), Provenance{a.epoch, a.set, a.bucket}});
      while (pending_.size() > max_pending_) pending_.erase(pending_.begin());
    } catch (const Error&) {
      ++malformed_;
    }
    return std::nullopt;
  }
  if (!frame.is(relay::FrameType::kEpochMarker)) return std::nullopt;
  relay::EpochMarker marker;
  try {
    marker = relay::EpochMarker::decode(frame);
  } catch (const Error&) {
    ++malformed_;
    return std::nullopt;
  }
  Batch batch;
  batch.epoch = marker.epoch;
  batch.announced = marker.count;
  auto it = pending_.find(marker.epoch);
  if (it != pending_.end()) {
    batch.leaves = std::move(it->second);
    pending_.erase(it);
  }
  std::stable_sort(batch.leaves.begin(), batch.leaves.end(), [](const Leaf& a, const Leaf& b) {
    return std::tie(a.where.set, a.where.bucket) < std::tie(b.where.set, b.where.bucket);
  });
  return batch;
}

}  // namespace alk::decryptor
