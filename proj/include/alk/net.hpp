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

// Minimal blocking TCP helpers.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "alk/bytes.hpp"

namespace alk::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  // "host:port"; throws alk::Error.
  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  // Wakes a thread blocked in read on this socket.
  void shutdown();

  // Throws alk::Error on failure.
  void write_all(ByteView data) const;
  // 0 on orderly close; throws on error.
  size_t read_some(std::span<uint8_t> buf) const;
  // Waits up to `timeout` for readability.
  bool wait_readable(std::chrono::milliseconds timeout) const;

 private:
  int fd_ = -1;
};

// Throws alk::Error if the connection cannot be made.
Socket connect_tcp(const Endpoint& ep);

class Listener {
 public:
  // Port 0 picks an ephemeral port.
  static Listener bind(const Endpoint& ep, int backlog = 64);

  uint16_t port() const { return port_; }
  // nullopt on timeout.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void close() { sock_.close(); }

 private:
  Socket sock_;
  uint16_t port_ = 0;
};

}  // namespace alk::net
