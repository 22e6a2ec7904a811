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

#include "alk/sim.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <random>

#include "alk/codec.hpp"
#include "alk/decryptor.hpp"
#include "alk/disclosure.hpp"
#include "alk/fountain.hpp"
#include "alk/services.hpp"

namespace alk::sim {

double SimConfig::white_rate_per_sec() const {
  return users * transmissions_per_user_day / (active_window_hours * 3600);
}

void SimConfig::validate() const {
  epoch.validate();
  if (users < 0 || transmissions_per_user_day < 0 || gray_rate_per_sec < 0) {
    throw Error("rates must be non-negative");
  }
  if (!(active_window_hours > 0)) throw Error("active window must be positive");
  if (!(loss_rate >= 0 && loss_rate <= 1)) throw Error("loss rate must lie in [0, 1]");
  if (gray_rate_per_sec > 0 && whistleblowers == 0) throw Error("gray traffic needs whistleblowers");
  if (white_pool == 0) throw Error("white pool must be non-empty");
  if (tree_height == 0 || tree_height > 16) throw Error("tree height must lie in [1, 16]");
}

ScheduleGenerator::ScheduleGenerator(const SimConfig& config, Rng rng)
    : white_mean_(config.white_rate_per_sec() * config.epoch.epoch_seconds),
      gray_mean_(config.gray_rate_per_sec * config.epoch.epoch_seconds),
      gray_arrivals_(config.gray_arrivals),
      whistleblowers_(config.whistleblowers),
      epoch_seconds_(config.epoch.epoch_seconds),
      rng_(std::move(rng)) {}

std::pair<uint64_t, uint64_t> ScheduleGenerator::next_counts() {
  auto poisson = [this](double mean) -> uint64_t {
    if (mean <= 0) return 0;
    return std::poisson_distribution<uint64_t>(mean)(rng_);
  };
  uint64_t whites = poisson(white_mean_);
  uint64_t grays = gray_arrivals_ == Arrivals::kFixed
                       ? static_cast<uint64_t>(std::llround(gray_mean_))
                       : poisson(gray_mean_);
  return {whites, grays};
}

std::vector<Event> ScheduleGenerator::next_epoch() {
  auto [whites, grays] = next_counts();
  std::vector<Event> events;
  events.reserve(whites + grays);
  for (uint64_t j = 0; j < whites; ++j) events.push_back({rng_.uniform01() * epoch_seconds_, false, 0});
  for (uint64_t j = 0; j < grays; ++j) {
    uint32_t w = static_cast<uint32_t>(rng_.below(whistleblowers_));
    events.push_back({rng_.uniform01() * epoch_seconds_, true, w});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.offset < b.offset; });
  return events;
}

uint64_t TrafficSchedule::count(bool gray) const {
  uint64_t n = 0;
  for (const auto& epoch : epochs) {
    for (const Event& e : epoch) n += e.gray == gray;
  }
  return n;
}

TrafficSchedule gen_schedule(const SimConfig& config) {
  config.validate();
  Rng root(config.seed);
  ScheduleGenerator gen(config, root.fork());
  TrafficSchedule schedule;
  schedule.epochs.reserve(config.epochs);
  for (uint64_t e = 0; e < config.epochs; ++e) schedule.epochs.push_back(gen.next_epoch());
  return schedule;
}

bool Metrics::same_outcome(const Metrics& o) const {
  return sent_white == o.sent_white && sent_gray == o.sent_gray && lost_white == o.lost_white &&
         lost_gray == o.lost_gray && delivered_gray == o.delivered_gray && recovered == o.recovered &&
         unrecovered_gray == o.unrecovered_gray && duplicates == o.duplicates && blacks == o.blacks &&
         tag_decryptions == o.tag_decryptions && full_decryptions == o.full_decryptions &&
         soundness_violations == o.soundness_violations && files_expected == o.files_expected &&
         files_completed == o.files_completed && files_bit_exact == o.files_bit_exact &&
         files_corrupt == o.files_corrupt && per_chunk_recovery_rate == o.per_chunk_recovery_rate &&
         valid == o.valid;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  size_t idx = static_cast<size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

// Whistleblower-side state and the ground-truth ledger.
class Clients {
 public:
  Clients(const SimConfig& config, const dj::PublicKey& pk, const envelope::PublicKey& env, Rng rng)
      : config_(config), pk_(pk), env_(env), rng_(std::move(rng)) {
    for (uint32_t j = 0; j < config.white_pool; ++j) {
      dj::Chunk white = dj::enc_zero(pk_, rng_);
      pool_.push_back(base64_encode(seal(white)));
    }
    for (uint32_t w = 0; w < config.whistleblowers; ++w) {
      Source src;
      if (config.file_bytes > 0) {
        src.file = rng_.bytes(config.file_bytes);
        src.manifest = disclosure::prepare_file(src.file, pk_, env_, config.rho, config.delta, rng_);
        src.k = src.manifest->k;
        record_file(src);
      } else {
        src.k = dj::ChunkMeta::random(rng_, 0, 1).k;
      }
      files_[src.k] = src.file;
      sources_.push_back(std::move(src));
    }
  }

  const std::string& white() { return pool_[rng_.below(pool_.size())]; }

  // Base64 body of the next data chunk, or nullopt once the file is spent.
  std::optional<std::string> gray(uint32_t w) {
    Source& src = sources_[w];
    if (src.manifest) {
      std::optional<Bytes> sealed = disclosure::next_chunk(*src.manifest);
      if (!sealed) return std::nullopt;
      return base64_encode(*sealed);
    }
    dj::ChunkMeta meta{src.k, src.next_i++, 1};
    mpz_class m = from_be(rng_.bytes(pk_.data_bytes()));
    ledger_[{meta.k, meta.i}] = m;
    return base64_encode(seal(dj::enc_data(pk_, m, meta, rng_)));
  }

  bool lost() { return config_.loss_rate > 0 && rng_.uniform01() < config_.loss_rate; }

  bool genuine(const decryptor::RecoveredChunk& c) const {
    auto it = ledger_.find({c.meta.k, c.meta.i});
    return it != ledger_.end() && it->second == c.m;
  }

  bool matches_file(uint64_t k, const Bytes& file) const {
    auto it = files_.find(k);
    return it != files_.end() && it->second == file;
  }

 private:
  struct Source {
    uint64_t k = 0;
    uint32_t next_i = 0;
    Bytes file;
    std::optional<disclosure::Manifest> manifest;
  };

  Bytes seal(const dj::Chunk& chunk) {
    return envelope::seal(env_, dj::serialize_chunk(pk_, chunk), pk_.chunk_bytes(), rng_);
  }

  void record_file(const Source& src) {
    Bytes framed = disclosure::FileHeader::of(src.file).serialize();
    framed.insert(framed.end(), src.file.begin(), src.file.end());
    auto set = fountain::SourceBlockSet::split(framed, pk_.data_bytes());
    for (uint32_t i = 0; i < src.manifest->total(); ++i) {
      ledger_[{src.k, i}] = from_be(fountain::encode_packet(set, src.k, i).payload);
    }
  }

  const SimConfig& config_;
  const dj::PublicKey& pk_;
  const envelope::PublicKey& env_;
  Rng rng_;
  std::vector<std::string> pool_;
  std::vector<Source> sources_;
  std::map<std::pair<uint64_t, uint32_t>, mpz_class> ledger_;
  std::map<uint64_t, Bytes> files_;
};

struct Harness {
  Metrics m;
  std::vector<double> latencies;
  uint64_t submissions = 0;
};

void attach_hooks(services::RecoveryPipeline& pipeline, const SimConfig& config, const Clients& clients,
                  Harness& h) {
  pipeline.set_reassembly(config.file_bytes > 0);
  pipeline.on_chunk([&](const decryptor::RecoveredChunk& c) {
    if (!clients.genuine(c)) ++h.m.soundness_violations;
  });
  pipeline.on_file([&](uint64_t k, const Bytes& file) {
    ++h.m.files_completed;
    if (clients.matches_file(k, file)) ++h.m.files_bit_exact;
  });
}

// Walks the schedule and hands every delivered body to `submit`.
template <typename Submit, typename Close>
void drive(const SimConfig& config, Rng schedule_rng, Clients& clients, Harness& h, Submit submit,
           Close close_epoch) {
  ScheduleGenerator gen(config, std::move(schedule_rng));
  for (uint64_t e = 0; e < config.epochs; ++e) {
    for (const Event& ev : gen.next_epoch()) {
      std::optional<std::string> body;
      bool gray = false;
      if (ev.gray) body = clients.gray(ev.whistleblower);
      if (body) {
        gray = true;
      } else {
        body = clients.white();
      }
      ++(gray ? h.m.sent_gray : h.m.sent_white);
      if (clients.lost()) {
        ++(gray ? h.m.lost_gray : h.m.lost_white);
        continue;
      }
      if (gray) ++h.m.delivered_gray;
      ++h.submissions;
      submit(*body);
    }
    auto start = Clock::now();
    close_epoch();
    h.latencies.push_back(ms_since(start));
  }
}

void run_in_process(const SimConfig& config, const dj::KeyPair& keys, const envelope::KeyPair& env,
                    Rng& root, Harness& h, services::RecoveryPipeline& pipeline, Clients& clients) {
  relay::Aggregator agg(keys.pub, env.priv, config.epoch, root.fork());
  decryptor::EpochCollector collector(keys.pub);
  const size_t sealed_length = envelope::sealed_length(keys.pub.chunk_bytes());
  drive(
      config, root.fork(), clients, h,
      [&](const std::string& body) {
        if (auto frame = relay::guard_handle(body, sealed_length)) agg.ingest(*frame);
      },
      [&] {
        for (const relay::Frame& f : agg.flush()) {
          if (auto batch = collector.add(f)) pipeline.process(batch->epoch, batch->leaves);
        }
      });
}

void run_sockets(const SimConfig& config, const dj::KeyPair& keys, const envelope::KeyPair& env,
                 Rng& root, Harness& h, services::DecryptorService& dec, Clients& clients) {
  using namespace std::chrono_literals;
  const net::Endpoint local{"127.0.0.1", 0};
  services::AggregatorService agg(services::AggregatorOptions{local, {"127.0.0.1", dec.port()}, config.epoch, true, 1},
                                  keys.pub, env.priv, root.fork());
  agg.start();
  services::GuardService guard(
      services::GuardOptions{local, {"127.0.0.1", agg.port()}, envelope::sealed_length(keys.pub.chunk_bytes())});
  guard.start();
  auto client = std::make_unique<services::GuardClient>(net::Endpoint{"127.0.0.1", guard.port()});
  uint64_t epochs = 0;
  drive(
      config, root.fork(), clients, h,
      [&](const std::string& body) {
        if (client->post(body) != 204) throw Error("guard request failed");
      },
      [&] {
        guard.drain();
        if (!agg.wait_for_frames(guard.counters().forwarded, 60s)) throw Error("aggregator stalled");
        agg.flush_now();
        if (!dec.wait_for_epochs(++epochs, 60s)) throw Error("decryptor stalled");
      });
  client.reset();
  guard.stop();
  agg.stop();
}

Metrics run_fast(const SimConfig& config, Harness& h) {
  Rng root(config.seed);
  ScheduleGenerator gen(config, root.fork());
  Rng rng = root.fork();
  const uint32_t sets = config.epoch.split_count;
  const uint32_t per_set = config.epoch.buckets_per_set();
  std::vector<uint32_t> counts(per_set);
  std::vector<uint32_t> choice;
  for (uint64_t e = 0; e < config.epochs; ++e) {
    auto start = Clock::now();
    auto [whites, grays] = gen.next_counts();
    h.m.sent_white += whites;
    h.m.sent_gray += grays;
    uint64_t k = 0;
    for (uint64_t j = 0; j < grays; ++j) {
      if (config.loss_rate > 0 && rng.uniform01() < config.loss_rate) {
        ++h.m.lost_gray;
      } else {
        ++k;
      }
    }
    h.m.delivered_gray += k;
    h.submissions += whites + k;
    std::vector<uint32_t> hits(k, 0);
    choice.resize(k);
    for (uint32_t s = 0; s < sets; ++s) {
      std::fill(counts.begin(), counts.end(), 0);
      for (uint64_t j = 0; j < k; ++j) {
        choice[j] = static_cast<uint32_t>(rng.below(per_set));
        ++counts[choice[j]];
      }
      for (uint32_t c : counts) h.m.blacks += c >= 2;
      for (uint64_t j = 0; j < k; ++j) hits[j] += counts[choice[j]] == 1;
    }
    for (uint32_t n : hits) {
      if (n > 0) {
        ++h.m.recovered;
        h.m.duplicates += n - 1;
      }
    }
    h.latencies.push_back(ms_since(start));
  }
  return h.m;
}

void finish(Metrics& m, double seconds, const Harness& h) {
  m.unrecovered_gray = m.delivered_gray - std::min(m.delivered_gray, m.recovered);
  m.per_chunk_recovery_rate =
      m.delivered_gray == 0 ? 0 : static_cast<double>(m.recovered) / static_cast<double>(m.delivered_gray);
  m.throughput = seconds > 0 ? static_cast<double>(h.submissions) / seconds : 0;
  m.latency_p50_ms = percentile(h.latencies, 0.5);
  m.latency_p99_ms = percentile(h.latencies, 0.99);
}

}  // namespace

Metrics run_sim(const SimConfig& config) {
  config.validate();
  Harness h;
  auto start = Clock::now();
  if (config.fast_path) {
    run_fast(config, h);
    finish(h.m, std::chrono::duration<double>(Clock::now() - start).count(), h);
    return h.m;
  }
  try {
    Rng root(config.seed);
    Rng key_rng = root.fork();
    dj::KeyPair keys = dj::keygen(config.key_bits, config.s_data, key_rng);
    Rng env_rng = root.fork();
    envelope::KeyPair env = envelope::env_keygen(env_rng);
    Clients clients(config, keys.pub, env.pub, root.fork());
    h.m.files_expected = config.file_bytes > 0 ? config.whistleblowers : 0;
    decryptor::DecryptorConfig dconf;
    dconf.tree_height = config.tree_height;
    dconf.workers = config.workers;
    dconf.split_count = config.epoch.split_count;
    start = Clock::now();

    const decryptor::Decryptor* dec = nullptr;
    const disclosure::ReassemblyStore* store = nullptr;
    std::unique_ptr<services::RecoveryPipeline> pipeline;
    std::unique_ptr<services::DecryptorService> service;
    if (config.topology == Topology::kInProcess) {
      pipeline = std::make_unique<services::RecoveryPipeline>(keys.priv, dconf);
      attach_hooks(*pipeline, config, clients, h);
      run_in_process(config, keys, env, root, h, *pipeline, clients);
      dec = &pipeline->decryptor();
      store = &pipeline->store();
    } else {
      service = std::make_unique<services::DecryptorService>(
          services::DecryptorOptions{{"127.0.0.1", 0}, std::nullopt, {}, dconf}, keys.priv);
      attach_hooks(service->pipeline(), config, clients, h);
      service->start();
      run_sockets(config, keys, env, root, h, *service, clients);
      service->stop();
      dec = &service->pipeline().decryptor();
      store = &service->pipeline().store();
    }
    decryptor::Totals t = dec->totals();
    h.m.recovered = t.recovered;
    h.m.duplicates = t.duplicates;
    h.m.blacks = t.blacks;
    h.m.tag_decryptions = t.stats.tag_decryptions;
    h.m.full_decryptions = t.stats.full_decryptions;
    h.m.files_corrupt = store->corrupt();
  } catch (const std::exception& e) {
    h.m.valid = false;
    h.m.error = e.what();
  }
  finish(h.m, std::chrono::duration<double>(Clock::now() - start).count(), h);
  return h.m;
}

double measure_recovery(uint64_t k_gray, uint32_t bucket_count, uint32_t split_count, uint64_t trials,
                        Rng& rng) {
  if (trials == 0) throw Error("trials must be at least 1");
  if (k_gray == 0) return 1.0;
  if (split_count == 0 || bucket_count % split_count != 0) throw Error("split count must divide bucket count");
  const uint32_t per_set = bucket_count / split_count;
  std::vector<uint32_t> counts(per_set);
  std::vector<uint32_t> choice(k_gray * split_count);
  uint64_t recovered = 0;
  for (uint64_t t = 0; t < trials; ++t) {
    std::vector<bool> alone(k_gray, false);
    for (uint32_t s = 0; s < split_count; ++s) {
      std::fill(counts.begin(), counts.end(), 0);
      for (uint64_t j = 0; j < k_gray; ++j) {
        uint32_t b = static_cast<uint32_t>(rng.below(per_set));
        choice[j] = b;
        ++counts[b];
      }
      for (uint64_t j = 0; j < k_gray; ++j) {
        if (counts[choice[j]] == 1) alone[j] = true;
      }
    }
    recovered += static_cast<uint64_t>(std::count(alone.begin(), alone.end(), true));
  }
  return static_cast<double>(recovered) / static_cast<double>(k_gray * trials);
}

}  // namespace alk::sim
