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

// Long-running guard, aggregator and decryptor services.
//
// Guards accept POST /a over HTTP and forward sealed frames over one
// persistent TCP connection. Aggregators and decryptors speak the frame
// protocol and expect a hello frame first on every connection.

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "alk/decryptor.hpp"
#include "alk/disclosure.hpp"
#include "alk/net.hpp"
#include "alk/relay.hpp"

namespace alk::services {

// Upstream connection that sends a hello on connect and reconnects on the
// next send after a failure.
class FrameSender {
 public:
  explicit FrameSender(net::Endpoint upstream) : upstream_(std::move(upstream)) {}

  // False if the connection failed; the frames may be partially written.
  bool send(const std::vector<relay::Frame>& frames);
  void close();

 private:
  std::mutex mu_;
  net::Endpoint upstream_;
  net::Socket sock_;
};

// Decryption plus reassembly, shared by the decryptor service and the
// in-process simulator.
class RecoveryPipeline {
 public:
  using ChunkHook = std::function<void(const decryptor::RecoveredChunk&)>;
  using FileHook = std::function<void(uint64_t k, const Bytes& file)>;

  RecoveryPipeline(dj::PrivateKey sk, decryptor::DecryptorConfig config);

  // Hooks run on the processing thread; set them before processing starts.
  void on_chunk(ChunkHook hook) { on_chunk_ = std::move(hook); }
  void on_file(FileHook hook) { on_file_ = std::move(hook); }
  // Off: recovered chunks are reported but not fed to reassembly.
  void set_reassembly(bool on) { reassemble_ = on; }

  decryptor::EpochReport process(uint64_t epoch, const std::vector<decryptor::Leaf>& leaves);

  const decryptor::Decryptor& decryptor() const { return dec_; }
  const disclosure::ReassemblyStore& store() const { return store_; }

 private:
  decryptor::Decryptor dec_;
  disclosure::ReassemblyStore store_;
  ChunkHook on_chunk_;
  FileHook on_file_;
  bool reassemble_ = true;
};

struct GuardOptions {
  net::Endpoint listen;
  net::Endpoint upstream;
  size_t sealed_length = 0;
  size_t queue_limit = 1 << 16;
};

struct GuardCounters {
  uint64_t requests = 0;
  uint64_t forwarded = 0;
  uint64_t malformed = 0;
  uint64_t upstream_drops = 0;
};

class GuardService {
 public:
  explicit GuardService(GuardOptions options);
  ~GuardService();

  // Binds and starts serving; returns once the port is known.
  void start();
  void stop();
  uint16_t port() const { return port_; }
  GuardCounters counters() const;
  // Waits until every queued frame has been sent or dropped.
  void drain();

 private:
  struct Http;
  void forward_loop();

  GuardOptions options_;
  std::unique_ptr<Http> http_;
  std::thread http_thread_;
  std::thread forward_thread_;
  FrameSender sender_;
  uint16_t port_ = 0;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<relay::Frame> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  GuardCounters counters_;
};

// Accept loop plus one reader thread per connection, shared by the
// aggregator and decryptor services.
class FrameServer {
 public:
  using Handler = std::function<void(const relay::Frame&, void* conn_state)>;
  using StateFactory = std::function<std::shared_ptr<void>()>;

  FrameServer(net::Endpoint listen, StateFactory factory, Handler handler);
  ~FrameServer();

  void start();
  void stop();
  uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve(std::shared_ptr<net::Socket> sock);

  net::Endpoint listen_;
  StateFactory factory_;
  Handler handler_;
  net::Listener listener_;
  uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::thread> conn_threads_;
  std::vector<std::weak_ptr<net::Socket>> conns_;
};

struct AggregatorOptions {
  net::Endpoint listen;
  net::Endpoint upstream;
  relay::EpochConfig epoch;
  // When set, epochs advance only through flush_now().
  bool manual_epochs = false;
  size_t outbox_epochs = 1;
};

struct AggregatorCounters {
  uint64_t frames = 0;
  uint64_t accepted = 0;
  uint64_t dropped = 0;
  uint64_t epochs_sent = 0;
  uint64_t epochs_dropped = 0;
};

class AggregatorService {
 public:
  AggregatorService(AggregatorOptions options, dj::PublicKey pk, envelope::PrivateKey env, Rng rng);
  ~AggregatorService();

  void start();
  // Flushes the running epoch before returning.
  void stop();
  uint16_t port() const { return server_.port(); }
  // Closes the current epoch and tries to deliver everything buffered.
  void flush_now();
  AggregatorCounters counters() const;
  // Waits until `frames` sealed frames have been handled.
  bool wait_for_frames(uint64_t frames, std::chrono::milliseconds timeout);

 private:
  void epoch_loop();
  void deliver();

  AggregatorOptions options_;
  relay::Aggregator agg_;
  relay::Outbox outbox_;
  FrameSender sender_;
  FrameServer server_;
  std::thread epoch_thread_;
  std::mutex flush_mu_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  bool started_ = false;
  uint64_t frames_ = 0;
  std::atomic<uint64_t> epochs_sent_{0};
};

struct DecryptorOptions {
  net::Endpoint listen;
  std::optional<net::Endpoint> status;
  std::filesystem::path output_dir;  // empty: files are not written
  decryptor::DecryptorConfig config;
};

struct DecryptorStatus {
  uint64_t epochs = 0;
  uint64_t aggregates = 0;
  uint64_t recovered = 0;
  uint64_t duplicates = 0;
  uint64_t blacks = 0;
  uint64_t tag_decryptions = 0;
  uint64_t full_decryptions = 0;
  uint64_t files_completed = 0;
  uint64_t files_corrupt = 0;
  double black_rate = 0;
  bool black_alert = false;

  // One "name value" pair per line.
  std::string to_text() const;
};

class DecryptorService {
 public:
  DecryptorService(DecryptorOptions options, dj::PrivateKey sk);
  ~DecryptorService();

  void start();
  void stop();
  uint16_t port() const { return server_.port(); }
  uint16_t status_port() const { return status_port_; }
  DecryptorStatus status() const;
  bool wait_for_epochs(uint64_t epochs, std::chrono::milliseconds timeout);
  RecoveryPipeline& pipeline() { return pipeline_; }

 private:
  struct Http;

  DecryptorOptions options_;
  dj::PublicKey pk_;
  RecoveryPipeline pipeline_;
  FrameServer server_;
  std::unique_ptr<Http> http_;
  std::thread http_thread_;
  uint16_t status_port_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  uint64_t epochs_ = 0;
};

// Fetches GET /status from a decryptor status endpoint; nullopt on failure.
std::optional<std::string> fetch_status(const net::Endpoint& ep);

// Keep-alive HTTP client for a guard's POST /a.
class GuardClient {
 public:
  explicit GuardClient(const net::Endpoint& guard);
  ~GuardClient();

  // HTTP status, or -1 when the request failed.
  int post(const std::string& base64_body);

 private:
  struct Http;
  std::unique_ptr<Http> http_;
};

}  // namespace alk::services
