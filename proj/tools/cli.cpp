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

#include "cli.hpp"

#include <sys/stat.h>

#include <CLI11.hpp>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "acceptance.hpp"
#include "alk/analytics.hpp"
#include "alk/bundle.hpp"
#include "alk/codec.hpp"
#include "alk/disclosure.hpp"
#include "alk/services.hpp"
#include "alk/sim.hpp"
#include "bench.hpp"

namespace alk::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

struct UsageError : Error {
  using Error::Error;
};

volatile std::sig_atomic_t g_stop = 0;
extern "C" void on_signal(int) { g_stop = 1; }

class Output {
 public:
  Output(std::ostream& out, const bool& json) : out_(out), json_(json) {}

  void emit(const json& record, const std::string& text) {
    if (json_) {
      out_ << record.dump() << "\n";
    } else {
      out_ << text;
      if (!text.empty() && text.back() != '\n') out_ << "\n";
    }
    out_.flush();
  }

 private:
  std::ostream& out_;
  const bool& json_;
};

// Two-column text table.
class Table {
 public:
  template <typename T>
  Table& row(const std::string& name, const T& value) {
    std::ostringstream v;
    v << std::setprecision(10) << value;
    rows_.emplace_back(name, v.str());
    return *this;
  }

  std::string str() const {
    size_t w = 0;
    for (const auto& [k, v] : rows_) w = std::max(w, k.size());
    std::ostringstream out;
    for (const auto& [k, v] : rows_) out << std::left << std::setw(static_cast<int>(w + 2)) << k << v << "\n";
    return out.str();
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

net::Endpoint endpoint(const std::string& text) {
  try {
    return net::Endpoint::parse(text);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

fs::path key_file(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::is_regular_file(p)) throw UsageError("missing key file " + p.string());
  return p;
}

KeyBundle load_bundle(const fs::path& dir) { return KeyBundle::parse(read_file(key_file(dir, kBundleFile))); }

void write_private(const fs::path& path, ByteView data) {
  mode_t old = ::umask(077);
  try {
    write_file_atomic(path, data);
  } catch (...) {
    ::umask(old);
    throw;
  }
  ::umask(old);
}

Rng seeded(const std::optional<uint64_t>& seed) { return seed ? Rng(*seed) : Rng::from_os(); }

template <typename F>
void as_usage(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// Runs until SIGINT/SIGTERM or `duration` seconds; logs every `interval`.
void serve(double duration, double interval, const std::function<void()>& log) {
  g_stop = 0;
  auto old_int = std::signal(SIGINT, on_signal);
  auto old_term = std::signal(SIGTERM, on_signal);
  auto start = Clock::now();
  auto last = start;
  auto elapsed = [](Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); };
  while (!g_stop && !(duration > 0 && elapsed(start) >= duration)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (interval > 0 && elapsed(last) >= interval) {
      log();
      last = Clock::now();
    }
  }
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
}

struct ServiceFlags {
  double duration = 0;
  double log_interval = 10;

  void add(CLI::App* cmd) {
    cmd->add_option("--duration", duration, "Stop after this many seconds (0: run until interrupted)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--log-interval", log_interval, "Seconds between counter records (0: off)")
        ->check(CLI::NonNegativeNumber);
  }
};

json metrics_json(const sim::Metrics& m) {
  return json{{"record", "metrics"},
              {"valid", m.valid},
              {"error", m.error},
              {"sent_white", m.sent_white},
              {"sent_gray", m.sent_gray},
              {"lost_white", m.lost_white},
              {"lost_gray", m.lost_gray},
              {"delivered_gray", m.delivered_gray},
              {"recovered", m.recovered},
              {"unrecovered_gray", m.unrecovered_gray},
              {"duplicates", m.duplicates},
              {"blacks", m.blacks},
              {"tag_decryptions", m.tag_decryptions},
              {"full_decryptions", m.full_decryptions},
              {"soundness_violations", m.soundness_violations},
              {"files_expected", m.files_expected},
              {"files_completed", m.files_completed},
              {"files_bit_exact", m.files_bit_exact},
              {"files_corrupt", m.files_corrupt},
              {"per_chunk_recovery_rate", m.per_chunk_recovery_rate},
              {"throughput", m.throughput},
              {"latency_p50_ms", m.latency_p50_ms},
              {"latency_p99_ms", m.latency_p99_ms}};
}

std::string metrics_text(const json& j) {
  Table t;
  for (const auto& [k, v] : j.items()) {
    if (k == "record" || (k == "error" && v.get<std::string>().empty())) continue;
    t.row(k, v.is_string() ? v.get<std::string>() : v.dump());
  }
  return t.str();
}

void write_grids(const fs::path& dir, uint32_t split_count) {
  fs::create_directories(dir);
  std::vector<uint64_t> ks;
  for (uint64_t k = 1; k <= 300; ++k) ks.push_back(k);
  std::ofstream rec(dir / "recovery.tsv");
  rec << "k\tbuckets\tsplit\tp_recover\n";
  for (uint32_t t : {1u, split_count == 1 ? 4u : split_count}) {
    for (const auto& p : analytics::recovery_grid(ks, {256, 512, 768, 1024, 1536, 2048}, t)) {
      rec << p.k << "\t" << p.bucket_count << "\t" << p.split_count << "\t" << p.p << "\n";
    }
  }
  std::vector<double> ps;
  for (int j = 0; j <= 100; ++j) ps.push_back(j / 100.0);
  std::ofstream cost(dir / "decryptions.tsv");
  cost << "height\tp\tnormalized\n";
  for (const auto& c : analytics::cost_curves({4, 5, 6, 7, 8, 9, 10}, ps)) {
    cost << c.height << "\t" << c.p << "\t" << c.normalized << "\n";
  }
  if (!rec || !cost) throw Error("cannot write grids to " + dir.string());
}

struct Context {
  Context(std::ostream& out, std::ostream& err) : output(out, json), err(err) {}

  bool json = false;
  Output output;
  std::ostream& err;
  std::vector<std::pair<CLI::App*, std::function<int()>>> actions;
};

void add_keygen(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("keygen", "Generate the DJ key pair and the envelope key pair");
  struct Args {
    unsigned bits = 2048;
    uint32_t s_data = dj::kDefaultSData;
    std::string dir;
    std::optional<uint64_t> seed;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--bits", a->bits, "Modulus size")->check(CLI::IsMember({512, 1024, 2048}))->capture_default_str();
  cmd->add_option("--sdata", a->s_data, "Data exponent s (chunk holds s*|N|/8 - 1 bytes)")
      ->check(CLI::Range(1u, 64u))
      ->capture_default_str();
  cmd->add_option("--out", a->dir, "Key directory")->required();
  cmd->add_option("--seed", a->seed, "Deterministic seed (default: OS randomness)");
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    Rng rng = seeded(a->seed);
    fs::create_directories(a->dir);
    dj::KeyPair keys = dj::keygen(a->bits, a->s_data, rng);
    envelope::KeyPair env = envelope::env_keygen(rng);
    KeyBundle bundle{keys.pub, env.pub};
    write_file_atomic(fs::path(a->dir) / kBundleFile, bundle.serialize());
    write_private(fs::path(a->dir) / kDjKeyFile, keys.priv.serialize());
    write_private(fs::path(a->dir) / kEnvKeyFile, env.priv.serialize());
    json j{{"record", "keygen"},        {"dir", a->dir},
           {"bits", a->bits},              {"s_data", a->s_data},
           {"chunk_bytes", keys.pub.chunk_bytes()}, {"data_bytes", keys.pub.data_bytes()},
           {"sealed_bytes", bundle.sealed_length()}};
    ctx.output.emit(j, Table()
                       .row("keys", a->dir)
                       .row("chunk bytes", keys.pub.chunk_bytes())
                       .row("data bytes", keys.pub.data_bytes())
                       .row("sealed bytes", bundle.sealed_length())
                       .str());
    return kOk;
  });
}

void add_prepare(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("prepare", "Fountain encode and seal a file into a manifest");
  struct Args {
    std::string file;
    std::string keys;
    std::string manifest;
    double rho = disclosure::kDefaultRho;
    unsigned delta_bits = 20;
    std::optional<uint64_t> seed;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--file", a->file, "File to disclose")->required()->check(CLI::ExistingFile);
  cmd->add_option("--keys", a->keys, "Key directory holding " + std::string(kBundleFile))
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--out", a->manifest, "Manifest path (default: FILE.alkm)");
  cmd->add_option("--rho", a->rho, "Expected delivery rate")->check(CLI::Range(0.01, 1.0))->capture_default_str();
  cmd->add_option("--delta-bits", a->delta_bits, "Decoding failure bound 2^-bits")
      ->check(CLI::Range(0u, 64u))
      ->capture_default_str();
  cmd->add_option("--seed", a->seed, "Deterministic seed (default: OS randomness)");
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    KeyBundle bundle = load_bundle(a->keys);
    fs::path target = a->manifest.empty() ? fs::path(a->file + ".alkm") : fs::path(a->manifest);
    Rng rng = seeded(a->seed);
    disclosure::Manifest m = disclosure::prepare_file(read_file(a->file), bundle.dj, bundle.env, a->rho,
                                                      std::ldexp(1.0, -static_cast<int>(a->delta_bits)), rng);
    write_file_atomic(target, m.serialize());
    json j{{"record", "manifest"}, {"path", target.string()}, {"k", hex64(m.k)},
           {"blocks", m.n},        {"chunks", m.total()},     {"sealed_bytes", m.sealed_length}};
    ctx.output.emit(j, Table()
                       .row("manifest", target.string())
                       .row("file id", hex64(m.k))
                       .row("blocks", m.n)
                       .row("chunks", m.total())
                       .str());
    return kOk;
  });
}

void add_send(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("send", "Drain a manifest against a guard at a fixed rate");
  struct Args {
    std::string manifest;
    std::string guard;
    double rate = 1;
    uint64_t max = 0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--manifest", a->manifest, "Manifest from prepare")->required()->check(CLI::ExistingFile);
  cmd->add_option("--guard", a->guard, "Guard address host:port")->required();
  cmd->add_option("--rate", a->rate, "Chunks per second")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--max", a->max, "Stop after this many chunks (0: all)");
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    net::Endpoint ep = endpoint(a->guard);
    services::GuardClient client(ep);
    g_stop = 0;
    auto old = std::signal(SIGINT, on_signal);
    uint64_t sent = 0, failed = 0;
    auto start = Clock::now();
    while (!g_stop && (a->max == 0 || sent + failed < a->max)) {
      auto due = start + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(static_cast<double>(sent + failed) / a->rate));
      std::this_thread::sleep_until(due);
      std::optional<Bytes> chunk = disclosure::next_chunk_from_file(a->manifest);
      if (!chunk) break;
      (client.post(base64_encode(*chunk)) == 204 ? sent : failed)++;
    }
    std::signal(SIGINT, old);
    uint32_t remaining = disclosure::Manifest::parse(read_file(a->manifest)).remaining();
    json j{{"record", "send"}, {"sent", sent}, {"failed", failed}, {"remaining", remaining}};
    ctx.output.emit(j, Table().row("sent", sent).row("failed", failed).row("remaining", remaining).str());
    return sent == 0 && failed > 0 ? kFailure : kOk;
  });
}

void add_guard(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("guard", "Run a guard: POST /a in, sealed frames out");
  struct Args {
    std::string listen = "127.0.0.1:8080";
    std::string upstream;
    std::string keys;
    size_t queue_limit = 1 << 16;
    ServiceFlags flags;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--listen", a->listen, "HTTP listen address")->capture_default_str();
  cmd->add_option("--upstream", a->upstream, "Aggregator address host:port")->required();
  cmd->add_option("--keys", a->keys, "Key directory holding " + std::string(kBundleFile))
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--queue-limit", a->queue_limit, "Frames buffered before dropping")->capture_default_str();
  a->flags.add(cmd);
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    services::GuardOptions o{endpoint(a->listen), endpoint(a->upstream), load_bundle(a->keys).sealed_length(), a->queue_limit};
    services::GuardService guard(o);
    guard.start();
    ctx.output.emit(json{{"record", "listening"}, {"service", "guard"}, {"port", guard.port()}},
                "guard listening on port " + std::to_string(guard.port()));
    auto log = [&] {
      services::GuardCounters c = guard.counters();
      ctx.output.emit(json{{"record", "counters"},
                       {"service", "guard"},
                       {"requests", c.requests},
                       {"forwarded", c.forwarded},
                       {"malformed", c.malformed},
                       {"upstream_drops", c.upstream_drops}},
                  "requests " + std::to_string(c.requests) + " forwarded " + std::to_string(c.forwarded) +
                      " malformed " + std::to_string(c.malformed) + " upstream_drops " +
                      std::to_string(c.upstream_drops));
    };
    serve(a->flags.duration, a->flags.log_interval, log);
    guard.stop();
    log();
    return kOk;
  });
}

void add_aggregator(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("aggregator", "Run an aggregator: open envelopes, multiply into buckets");
  struct Args {
    std::string listen = "127.0.0.1:9000";
    std::string upstream;
    std::string keys;
    relay::EpochConfig epoch;
    size_t outbox = 1;
    std::optional<uint64_t> seed;
    ServiceFlags flags;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--listen", a->listen, "Frame listen address")->capture_default_str();
  cmd->add_option("--upstream", a->upstream, "Decryptor address host:port")->required();
  cmd->add_option("--keys", a->keys, "Key directory holding " + std::string(kBundleFile) + " and " + kEnvKeyFile)
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--epoch-seconds", a->epoch.epoch_seconds, "Epoch length")->capture_default_str();
  cmd->add_option("--buckets", a->epoch.bucket_count, "Aggregates per epoch")->capture_default_str();
  cmd->add_option("--split", a->epoch.split_count, "Independent bucket sets per epoch")->capture_default_str();
  cmd->add_option("--outbox", a->outbox, "Epochs buffered while the decryptor is unreachable")
      ->capture_default_str();
  cmd->add_option("--seed", a->seed, "Bucket choice seed (default: OS randomness)");
  a->flags.add(cmd);
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    as_usage([&] { a->epoch.validate(); });
    KeyBundle bundle = load_bundle(a->keys);
    envelope::PrivateKey env = envelope::PrivateKey::parse(read_file(key_file(a->keys, kEnvKeyFile)));
    services::AggregatorService agg({endpoint(a->listen), endpoint(a->upstream), a->epoch, false, a->outbox}, bundle.dj, env,
                                    seeded(a->seed));
    agg.start();
    ctx.output.emit(json{{"record", "listening"}, {"service", "aggregator"}, {"port", agg.port()}},
                "aggregator listening on port " + std::to_string(agg.port()));
    auto log = [&] {
      services::AggregatorCounters c = agg.counters();
      ctx.output.emit(json{{"record", "counters"},
                       {"service", "aggregator"},
                       {"frames", c.frames},
                       {"accepted", c.accepted},
                       {"dropped", c.dropped},
                       {"epochs_sent", c.epochs_sent},
                       {"epochs_dropped", c.epochs_dropped}},
                  "frames " + std::to_string(c.frames) + " accepted " + std::to_string(c.accepted) + " dropped " +
                      std::to_string(c.dropped) + " epochs_sent " + std::to_string(c.epochs_sent) +
                      " epochs_dropped " + std::to_string(c.epochs_dropped));
    };
    serve(a->flags.duration, a->flags.log_interval, log);
    agg.stop();
    log();
    return kOk;
  });
}

void add_decryptor(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("decryptor", "Run the decryptor: tree decryption and file reassembly");
  struct Args {
    std::string listen = "127.0.0.1:9100";
    std::string status;
    std::string out_dir;
    std::string keys;
    decryptor::DecryptorConfig config;
    ServiceFlags flags;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--listen", a->listen, "Frame listen address")->capture_default_str();
  cmd->add_option("--status", a->status, "Status endpoint host:port (GET /status)");
  cmd->add_option("--out", a->out_dir, "Directory for recovered files");
  cmd->add_option("--keys", a->keys, "Key directory holding " + std::string(kDjKeyFile))
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--tree-height", a->config.tree_height, "Decryption tree height")
      ->check(CLI::Range(1u, 20u))
      ->capture_default_str();
  cmd->add_option("--workers", a->config.workers, "Decryption threads")->check(CLI::Range(1u, 256u))
      ->capture_default_str();
  cmd->add_option("--split", a->config.split_count, "Bucket sets per epoch")->capture_default_str();
  cmd->add_option("--alert-factor", a->config.black_alert_factor, "Black-rate alert threshold over expectation")
      ->capture_default_str();
  cmd->add_option("--alert-window", a->config.black_window_epochs, "Epochs in the black-rate window")
      ->capture_default_str();
  a->flags.add(cmd);
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    dj::PrivateKey sk = dj::PrivateKey::parse(read_file(key_file(a->keys, kDjKeyFile)));
    std::optional<net::Endpoint> status_ep;
    if (!a->status.empty()) status_ep = endpoint(a->status);
    if (!a->out_dir.empty()) fs::create_directories(a->out_dir);
    services::DecryptorService dec({endpoint(a->listen), status_ep, a->out_dir, a->config}, std::move(sk));
    dec.start();
    json hello{{"record", "listening"}, {"service", "decryptor"}, {"port", dec.port()}};
    if (status_ep) hello["status_port"] = dec.status_port();
    ctx.output.emit(hello, "decryptor listening on port " + std::to_string(dec.port()));
    auto log = [&] {
      services::DecryptorStatus s = dec.status();
      ctx.output.emit(json{{"record", "counters"},
                       {"service", "decryptor"},
                       {"epochs", s.epochs},
                       {"recovered", s.recovered},
                       {"blacks", s.blacks},
                       {"files_completed", s.files_completed},
                       {"black_alert", s.black_alert}},
                  "epochs " + std::to_string(s.epochs) + " recovered " + std::to_string(s.recovered) +
                      " blacks " + std::to_string(s.blacks) + " files " + std::to_string(s.files_completed) +
                      (s.black_alert ? " BLACK-RATE ALERT" : ""));
    };
    serve(a->flags.duration, a->flags.log_interval, log);
    dec.stop();
    log();
    return kOk;
  });
}

void add_simulate(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("simulate", "Run the traffic simulator end to end");
  struct Args {
    sim::SimConfig c;
    bool deployment = false;
    std::optional<double> users;
    std::optional<double> gray_rate;
    std::optional<uint64_t> epochs;
    std::optional<uint32_t> buckets;
    std::optional<std::string> arrivals;
    std::optional<bool> fast;
    std::string topology = "inprocess";
    unsigned delta_bits = 20;
  };
  auto a = std::make_shared<Args>();
  cmd->add_flag("--paper-defaults", a->deployment,
                "138e6 users, 82 grays per epoch, 768 buckets, 600 epochs, balls-into-bins path");
  cmd->add_option("--seed", a->c.seed, "Seed")->capture_default_str();
  cmd->add_option("--users", a->users, "Users generating white traffic");
  cmd->add_option("--per-day", a->c.transmissions_per_user_day, "Transmissions per user and day")
      ->capture_default_str();
  cmd->add_option("--window-hours", a->c.active_window_hours, "Daily active window")->capture_default_str();
  cmd->add_option("--whistleblowers", a->c.whistleblowers, "Concurrent whistleblowers")->capture_default_str();
  cmd->add_option("--gray-rate", a->gray_rate, "Gray chunks per second");
  cmd->add_option("--arrivals", a->arrivals, "Gray arrivals: poisson or fixed")
      ->check(CLI::IsMember({"poisson", "fixed"}));
  cmd->add_option("--epochs", a->epochs, "Epochs to simulate");
  cmd->add_option("--epoch-seconds", a->c.epoch.epoch_seconds, "Epoch length")->capture_default_str();
  cmd->add_option("--buckets", a->buckets, "Aggregates per epoch");
  cmd->add_option("--split", a->c.epoch.split_count, "Bucket sets per epoch")->capture_default_str();
  cmd->add_option("--topology", a->topology, "inprocess or sockets")
      ->check(CLI::IsMember({"inprocess", "sockets"}))
      ->capture_default_str();
  cmd->add_option("--loss", a->c.loss_rate, "Client-to-guard loss rate")->capture_default_str();
  cmd->add_option("--key-bits", a->c.key_bits, "DJ modulus size")->check(CLI::IsMember({512, 1024, 2048}))
      ->capture_default_str();
  cmd->add_option("--sdata", a->c.s_data, "Data exponent s")->capture_default_str();
  cmd->add_option("--tree-height", a->c.tree_height, "Decryption tree height")->capture_default_str();
  cmd->add_option("--workers", a->c.workers, "Decryption threads")->capture_default_str();
  cmd->add_option("--white-pool", a->c.white_pool, "Pre-sealed whites to draw from")->capture_default_str();
  cmd->add_option("--file-bytes", a->c.file_bytes, "Each whistleblower discloses a random file of this size")
      ->capture_default_str();
  cmd->add_option("--rho", a->c.rho, "Expected delivery rate for file preparation")->capture_default_str();
  cmd->add_option("--delta-bits", a->delta_bits, "Decoding failure bound 2^-bits")->capture_default_str();
  cmd->add_option("--fast", a->fast, "Balls-into-bins instead of crypto (true/false)");
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    if (a->deployment) {
      a->c.users = 138e6;
      a->c.gray_rate_per_sec = 82;
      a->c.gray_arrivals = sim::Arrivals::kFixed;
      a->c.epoch.bucket_count = 768;
      a->c.epochs = 600;
      a->c.fast_path = true;
    }
    if (a->users) a->c.users = *a->users;
    if (a->gray_rate) a->c.gray_rate_per_sec = *a->gray_rate;
    if (a->arrivals) a->c.gray_arrivals = *a->arrivals == "fixed" ? sim::Arrivals::kFixed : sim::Arrivals::kPoisson;
    if (a->epochs) a->c.epochs = *a->epochs;
    if (a->buckets) a->c.epoch.bucket_count = *a->buckets;
    if (a->fast) a->c.fast_path = *a->fast;
    a->c.topology = a->topology == "sockets" ? sim::Topology::kSockets : sim::Topology::kInProcess;
    a->c.delta = std::ldexp(1.0, -static_cast<int>(a->delta_bits));
    as_usage([&] { a->c.validate(); });
    sim::Metrics m = sim::run_sim(a->c);
    json j = metrics_json(m);
    ctx.output.emit(j, metrics_text(j));
    return m.valid ? kOk : kFailure;
  });
}

void add_report(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("report", "Capacity, recovery and break-even arithmetic");
  struct Args {
    analytics::CapacityParams p;
    bool deployment = false;
    double ads = 5;
    double cpm = 0.25;
    double unit_cost = 400;
    double days_per_month = analytics::kDaysPerMonth;
    std::string grid_dir;
  };
  auto a = std::make_shared<Args>();
  cmd->add_flag("--paper-defaults", a->deployment, "Use the deployment figures (these are also the defaults)");
  cmd->add_option("--users", a->p.users, "Users")->capture_default_str();
  cmd->add_option("--per-day", a->p.transmissions_per_user_day, "Transmissions per user and day")
      ->capture_default_str();
  cmd->add_option("--window-hours", a->p.active_window_hours, "Daily active window")->capture_default_str();
  cmd->add_option("--reqs-per-guard", a->p.reqs_per_guard_sec, "Requests per second per guard unit")
      ->capture_default_str();
  cmd->add_option("--buckets", a->p.bucket_count, "Aggregates per epoch")->capture_default_str();
  cmd->add_option("--split", a->p.split_count, "Bucket sets per epoch")->capture_default_str();
  cmd->add_option("--decryptor-mbps", a->p.decryptor_mbps, "Decryptor link in 2^20 bit/s")->capture_default_str();
  cmd->add_option("--chunk-bytes", a->p.chunk_bytes, "Chunk size")->capture_default_str();
  cmd->add_option("--request-bytes", a->p.base64_request_bytes, "Modeled request size")->capture_default_str();
  cmd->add_option("--blocks-per-file", a->p.blocks_per_file, "Source blocks per disclosure")->capture_default_str();
  cmd->add_option("--transmissions-per-file", a->p.transmissions_per_file, "Chunks sent per disclosure")
      ->capture_default_str();
  cmd->add_option("--recovery-target", a->p.recovery_target, "Recovery probability target")->capture_default_str();
  cmd->add_option("--ads-per-day", a->ads, "Ads per user and day")->capture_default_str();
  cmd->add_option("--cpm", a->cpm, "Payout per thousand ads, USD")->capture_default_str();
  cmd->add_option("--unit-cost", a->unit_cost, "Server cost per month, USD")->capture_default_str();
  cmd->add_option("--days-per-month", a->days_per_month, "Days per billing month")->capture_default_str();
  cmd->add_option("--grid-dir", a->grid_dir, "Write recovery.tsv and decryptions.tsv here");
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    if (a->deployment) a->p = {};
    as_usage([&] { a->p.validate(); });
    analytics::CapacityReport r = analytics::capacity_report(a->p);
    analytics::BreakEven b = analytics::break_even(a->p.users, a->ads, a->cpm, a->unit_cost, r.guard_units, a->days_per_month);
    json cap{{"record", "capacity"},
             {"mean_load", r.mean_load},
             {"peak_load", r.peak_load},
             {"guard_units", r.guard_units},
             {"aggregator_units", r.aggregator_units},
             {"decryptor_chunks_per_sec", r.decryptor_chunks_per_sec},
             {"gray_capacity", r.gray_capacity},
             {"safe_gray_rate", r.safe_gray_rate},
             {"concurrent_whistleblowers", r.concurrent_whistleblowers},
             {"disclosures_per_day", r.disclosures_per_day},
             {"submission_days", r.submission_days},
             {"daily_load_per_user_kb", r.daily_load_per_user_kb},
             {"p_recover_at_capacity", analytics::p_recover(r.gray_capacity, a->p.bucket_count, a->p.split_count)}};
    json be{{"record", "break_even"},
            {"daily_infra_usd", b.daily_infra_usd},
            {"daily_payout_usd", b.daily_payout_usd},
            {"markup", b.markup}};
    if (ctx.json) {
      ctx.output.emit(cap, "");
      ctx.output.emit(be, "");
    } else {
      Table t;
      t.row("mean load (req/s)", r.mean_load)
          .row("peak load (req/s)", r.peak_load)
          .row("guard units", r.guard_units)
          .row("aggregator units", r.aggregator_units)
          .row("decryptor chunks/s", r.decryptor_chunks_per_sec)
          .row("gray capacity (grays/epoch)", r.gray_capacity)
          .row("recovery at capacity", cap["p_recover_at_capacity"].get<double>())
          .row("safe gray rate (chunks/s)", r.safe_gray_rate)
          .row("concurrent whistleblowers", r.concurrent_whistleblowers)
          .row("disclosures per day", r.disclosures_per_day)
          .row("submission days", r.submission_days)
          .row("daily load per user (KB)", r.daily_load_per_user_kb)
          .row("infrastructure (USD/day)", b.daily_infra_usd)
          .row("ad payout (USD/day)", b.daily_payout_usd)
          .row("break-even markup (%)", 100 * b.markup);
      ctx.output.emit(json{}, t.str());
    }
    if (!a->grid_dir.empty()) {
      write_grids(a->grid_dir, a->p.split_count);
      ctx.output.emit(json{{"record", "grids"}, {"dir", a->grid_dir}}, "grids written to " + a->grid_dir);
    }
    return kOk;
  });
}

void add_recover_status(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("recover-status", "Query a decryptor's status endpoint");
  struct Args {
    std::string status;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--status", a->status, "Status endpoint host:port")->required();
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    std::optional<std::string> text = services::fetch_status(endpoint(a->status));
    if (!text) {
      ctx.err << "alk: no status from " << a->status << "\n";
      return kFailure;
    }
    json j{{"record", "status"}};
    std::istringstream in(*text);
    std::string name;
    double value;
    while (in >> name >> value) j[name] = value;
    ctx.output.emit(j, *text);
    return kOk;
  });
}

void add_bench(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("bench", "Time the per-chunk operations of every tier");
  struct Args {
    BenchOptions o;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--bits", a->o.bits, "Modulus size")->check(CLI::IsMember({512, 1024, 2048}))
      ->capture_default_str();
  cmd->add_option("--sdata", a->o.s_data, "Data exponent s")->capture_default_str();
  cmd->add_option("--iterations", a->o.iterations, "Iterations per operation")->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed", a->o.seed, "Seed")->capture_default_str();
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    BenchReport r = run_bench(a->o);
    std::ostringstream text;
    text << "bits " << r.bits << ", s " << r.s_data << ", chunk " << r.chunk_bytes << " bytes\n";
    Table t;
    for (const BenchRecord& rec : r.records) {
      std::ostringstream v;
      v << std::fixed << std::setprecision(1) << rec.per_sec() << " /s  (" << rec.iterations << " in "
        << std::setprecision(3) << rec.seconds << " s)";
      t.row(rec.op, v.str());
      if (ctx.json) {
        ctx.output.emit(json{{"record", "bench"},
                         {"op", rec.op},
                         {"bits", r.bits},
                         {"s_data", r.s_data},
                         {"iterations", rec.iterations},
                         {"seconds", rec.seconds},
                         {"per_sec", rec.per_sec()}},
                    "");
      }
    }
    if (!ctx.json) ctx.output.emit(json{}, text.str() + t.str());
    return kOk;
  });
}

void add_check(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("check", "Run acceptance criteria; one PASS/FAIL line each");
  struct Args {
    std::vector<int> ids;
    AcceptanceOptions o;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--criterion", a->ids, "Criterion id 1-9 (repeatable; default all)")->check(CLI::Range(1, 9));
  cmd->add_option("--seed", a->o.seed, "Seed")->capture_default_str();
  ctx.actions.emplace_back(cmd, [&ctx, a] {
    if (a->ids.empty()) a->ids = criterion_ids();
    bool all = true;
    for (int id : a->ids) {
      CriterionResult r = run_criterion(id, a->o);
      all = all && r.pass;
      std::ostringstream line;
      line << (r.pass ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " ("
           << std::fixed << std::setprecision(1) << r.seconds << " s)";
      ctx.output.emit(json{{"record", "criterion"},
                       {"id", r.id},
                       {"name", r.name},
                       {"pass", r.pass},
                       {"detail", r.detail},
                       {"seconds", r.seconds}},
                  line.str());
    }
    return all ? kOk : kFailure;
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unobservable submission pipeline: keys, services, simulation and reports", "alk"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file (TOML or INI); flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  Context ctx(out, err);
  app.add_flag("--json", ctx.json, "Line-delimited JSON records instead of text");
  add_keygen(app, ctx);
  add_prepare(app, ctx);
  add_send(app, ctx);
  add_guard(app, ctx);
  add_aggregator(app, ctx);
  add_decryptor(app, ctx);
  add_simulate(app, ctx);
  add_report(app, ctx);
  add_recover_status(app, ctx);
  add_bench(app, ctx);
  add_check(app, ctx);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  try {
    for (auto& [cmd, action] : ctx.actions) {
      if (cmd->parsed()) return action();
    }
    return kUsage;
  } catch (const UsageError& e) {
    err << "alk: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "alk: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace alk::cli
