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

#include <httplib.h>

#include <sstream>

#include "alk/bundle.hpp"

namespace alk::services {

bool FrameSender::send(const std::vector<relay::Frame>& frames) {
  std::lock_guard lock(mu_);
  try {
    if (!sock_.valid()) {
      sock_ = net::connect_tcp(upstream_);
      sock_.write_all(relay::encode_frame(relay::hello_frame()));
    }
    Bytes buf;
    for (const relay::Frame& f : frames) {
      relay::append_frame(buf, f);
      if (buf.size() >= (1u << 16)) {
        sock_.write_all(buf);
        buf.clear();
      }
    }
    if (!buf.empty()) sock_.write_all(buf);
    return true;
  } catch (const Error&) {
    sock_.close();
    return false;
  }
}

void FrameSender::close() {
  std::lock_guard lock(mu_);
  sock_.close();
}

RecoveryPipeline::RecoveryPipeline(dj::PrivateKey sk, decryptor::DecryptorConfig config)
    : dec_(sk, config), store_(sk.pub().data_bytes()) {}

decryptor::EpochReport RecoveryPipeline::process(uint64_t epoch,
                                                 const std::vector<decryptor::Leaf>& leaves) {
  std::vector<decryptor::RecoveredChunk> chunks;
  decryptor::EpochReport report = dec_.process_epoch(epoch, leaves, chunks);
  for (const decryptor::RecoveredChunk& c : chunks) {
    if (on_chunk_) on_chunk_(c);
    if (!reassemble_) continue;
    disclosure::AddResult r = store_.add(c.m, c.meta);
    if (r.status == disclosure::AddStatus::kComplete && on_file_) on_file_(r.k, *r.file);
  }
  return report;
}

struct GuardService::Http {
  httplib::Server server;
};

GuardService::GuardService(GuardOptions options)
    : options_(std::move(options)), http_(std::make_unique<Http>()), sender_(options_.upstream) {
  if (options_.sealed_length == 0) throw Error("guard needs the sealed chunk length");
}

GuardService::~GuardService() { stop(); }

void GuardService::start() {
  http_->server.set_tcp_nodelay(true);
  http_->server.Post("/a", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<relay::Frame> frame = relay::guard_handle(req.body, options_.sealed_length);
    {
      std::lock_guard lock(mu_);
      ++counters_.requests;
      if (!frame) {
        ++counters_.malformed;
      } else if (queue_.size() >= options_.queue_limit) {
        ++counters_.upstream_drops;
      } else {
        queue_.push_back(std::move(*frame));
        cv_.notify_all();
      }
    }
    res.status = 204;
  });
  int port = options_.listen.port == 0
                 ? http_->server.bind_to_any_port(options_.listen.host)
                 : (http_->server.bind_to_port(options_.listen.host, options_.listen.port)
                        ? options_.listen.port
                        : -1);
  if (port <= 0) throw Error("guard cannot bind " + options_.listen.to_string());
  port_ = static_cast<uint16_t>(port);
  http_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
  forward_thread_ = std::thread([this] { forward_loop(); });
  http_->server.wait_until_ready();
}

void GuardService::stop() {
  if (!http_thread_.joinable()) return;
  http_->server.stop();
  http_thread_.join();
  drain();
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    cv_.notify_all();
  }
  forward_thread_.join();
  sender_.close();
}

void GuardService::forward_loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) return;
    std::vector<relay::Frame> batch;
    batch.swap(queue_);
    busy_ = true;
    lock.unlock();
    bool ok = sender_.send(batch);
    lock.lock();
    busy_ = false;
    (ok ? counters_.forwarded : counters_.upstream_drops) += batch.size();
    cv_.notify_all();
  }
}

void GuardService::drain() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

GuardCounters GuardService::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

FrameServer::FrameServer(net::Endpoint listen, StateFactory factory, Handler handler)
    : listen_(std::move(listen)), factory_(std::move(factory)), handler_(std::move(handler)) {}

FrameServer::~FrameServer() { stop(); }

void FrameServer::start() {
  listener_ = net::Listener::bind(listen_);
  port_ = listener_.port();
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void FrameServer::stop() {
  if (!running_.exchange(false)) return;
  accept_thread_.join();
  listener_.close();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    for (auto& weak : conns_) {
      if (auto s = weak.lock()) s->shutdown();
    }
    threads.swap(conn_threads_);
  }
  for (auto& t : threads) t.join();
}

void FrameServer::accept_loop() {
  while (running_) {
    std::optional<net::Socket> sock = listener_.accept(std::chrono::milliseconds(100));
    if (!sock) continue;
    auto shared = std::make_shared<net::Socket>(std::move(*sock));
    std::lock_guard lock(mu_);
    conns_.push_back(shared);
    conn_threads_.emplace_back([this, shared] { serve(shared); });
  }
}

void FrameServer::serve(std::shared_ptr<net::Socket> sock) {
  std::shared_ptr<void> state = factory_ ? factory_() : nullptr;
  relay::FrameReader reader;
  bool greeted = false;
  std::vector<uint8_t> buf(1 << 16);
  try {
    while (running_) {
      if (!sock->wait_readable(std::chrono::milliseconds(100))) continue;
      size_t n = sock->read_some(buf);
      if (n == 0) break;
      reader.feed(ByteView(buf.data(), n));
      while (auto frame = reader.next()) {
        if (!greeted) {
          if (!relay::check_hello(*frame)) return;
          greeted = true;
          continue;
        }
        handler_(*frame, state.get());
      }
    }
  } catch (const Error&) {
    // Broken stream or oversize frame: drop the connection.
  }
}

AggregatorService::AggregatorService(AggregatorOptions options, dj::PublicKey pk,
                                     envelope::PrivateKey env, Rng rng)
    : options_(std::move(options)),
      agg_(std::move(pk), env, options_.epoch, std::move(rng)),
      outbox_(options_.outbox_epochs),
      sender_(options_.upstream),
      server_(options_.listen, nullptr, [this](const relay::Frame& frame, void*) {
        if (!frame.is(relay::FrameType::kSealed)) return;
        agg_.ingest(frame);
        std::lock_guard lock(mu_);
        ++frames_;
        cv_.notify_all();
      }) {}

AggregatorService::~AggregatorService() { stop(); }

void AggregatorService::start() {
  server_.start();
  started_ = true;
  if (!options_.manual_epochs) epoch_thread_ = std::thread([this] { epoch_loop(); });
}

void AggregatorService::stop() {
  if (!started_) return;
  started_ = false;
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    cv_.notify_all();
  }
  if (epoch_thread_.joinable()) epoch_thread_.join();
  server_.stop();
  flush_now();
  sender_.close();
}

void AggregatorService::epoch_loop() {
  auto period = std::chrono::duration<double>(options_.epoch.epoch_seconds);
  auto next = std::chrono::steady_clock::now() +
              std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
  std::unique_lock lock(mu_);
  while (!cv_.wait_until(lock, next, [this] { return stopping_; })) {
    lock.unlock();
    flush_now();
    lock.lock();
    next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
  }
}

void AggregatorService::flush_now() {
  std::lock_guard lock(flush_mu_);
  deliver();
  outbox_.push(agg_.flush());
  deliver();
}

void AggregatorService::deliver() {
  while (auto epoch = outbox_.pop()) {
    if (!sender_.send(*epoch)) {
      outbox_.requeue(std::move(*epoch));
      return;
    }
    ++epochs_sent_;
  }
}

AggregatorCounters AggregatorService::counters() const {
  AggregatorCounters c;
  {
    std::lock_guard lock(mu_);
    c.frames = frames_;
  }
  c.accepted = agg_.accepted();
  c.dropped = agg_.dropped();
  c.epochs_sent = epochs_sent_.load();
  c.epochs_dropped = outbox_.dropped_epochs();
  return c;
}

bool AggregatorService::wait_for_frames(uint64_t frames, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return frames_ >= frames; });
}

std::string DecryptorStatus::to_text() const {
  std::ostringstream out;
  out << "epochs " << epochs << "\n"
      << "aggregates " << aggregates << "\n"
      << "recovered " << recovered << "\n"
      << "duplicates " << duplicates << "\n"
      << "blacks " << blacks << "\n"
      << "tag_decryptions " << tag_decryptions << "\n"
      << "full_decryptions " << full_decryptions << "\n"
      << "files_completed " << files_completed << "\n"
      << "files_corrupt " << files_corrupt << "\n"
      << "black_rate " << black_rate << "\n"
      << "black_alert " << (black_alert ? 1 : 0) << "\n";
  return out.str();
}

struct DecryptorService::Http {
  httplib::Server server;
};

DecryptorService::DecryptorService(DecryptorOptions options, dj::PrivateKey sk)
    : options_(std::move(options)),
      pk_(sk.pub()),
      pipeline_(sk, options_.config),
      server_(
          options_.listen,
          [this] { return std::static_pointer_cast<void>(std::make_shared<decryptor::EpochCollector>(pk_)); },
          [this](const relay::Frame& frame, void* state) {
            auto* collector = static_cast<decryptor::EpochCollector*>(state);
            std::optional<decryptor::EpochCollector::Batch> batch = collector->add(frame);
            if (!batch) return;
            pipeline_.process(batch->epoch, batch->leaves);
            std::lock_guard lock(mu_);
            ++epochs_;
            cv_.notify_all();
          }),
      http_(std::make_unique<Http>()) {
  if (!options_.output_dir.empty()) {
    std::filesystem::create_directories(options_.output_dir);
    pipeline_.on_file([dir = options_.output_dir](uint64_t k, const Bytes& file) {
      char name[32];
      std::snprintf(name, sizeof name, "%016llx.bin", static_cast<unsigned long long>(k));
      write_file_atomic(dir / name, file);
    });
  }
}

DecryptorService::~DecryptorService() { stop(); }

void DecryptorService::start() {
  server_.start();
  if (options_.status) {
    http_->server.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(status().to_text(), "text/plain");
    });
    int port = options_.status->port == 0
                   ? http_->server.bind_to_any_port(options_.status->host)
                   : (http_->server.bind_to_port(options_.status->host, options_.status->port)
                          ? options_.status->port
                          : -1);
    if (port <= 0) throw Error("cannot bind status endpoint");
    status_port_ = static_cast<uint16_t>(port);
    http_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
  }
}

void DecryptorService::stop() {
  if (http_thread_.joinable()) {
    http_->server.stop();
    http_thread_.join();
  }
  server_.stop();
}

DecryptorStatus DecryptorService::status() const {
  DecryptorStatus s;
  decryptor::Totals t = pipeline_.decryptor().totals();
  s.epochs = t.epochs;
  s.aggregates = t.aggregates;
  s.recovered = t.recovered;
  s.duplicates = t.duplicates;
  s.blacks = t.blacks;
  s.tag_decryptions = t.stats.tag_decryptions;
  s.full_decryptions = t.stats.full_decryptions;
  s.files_completed = pipeline_.store().completed();
  s.files_corrupt = pipeline_.store().corrupt();
  s.black_rate = pipeline_.decryptor().black_rate();
  s.black_alert = pipeline_.decryptor().black_alert();
  return s;
}

bool DecryptorService::wait_for_epochs(uint64_t epochs, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return epochs_ >= epochs; });
}

std::optional<std::string> fetch_status(const net::Endpoint& ep) {
  httplib::Client client(ep.host, ep.port);
  client.set_connection_timeout(2);
  auto res = client.Get("/status");
  if (!res || res->status != 200) return std::nullopt;
  return res->body;
}

struct GuardClient::Http {
  explicit Http(const net::Endpoint& ep) : client(ep.host, ep.port) {
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);
    client.set_connection_timeout(5);
  }
  httplib::Client client;
};

GuardClient::GuardClient(const net::Endpoint& guard) : http_(std::make_unique<Http>(guard)) {}

GuardClient::~GuardClient() = default;

int GuardClient::post(const std::string& base64_body) {
  auto res = http_->client.Post("/a", base64_body, "text/plain");
  return res ? res->status : -1;
}

}  // namespace alk::services
