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

// Outer IND-CCA envelope around serialized chunks: X25519 key encapsulation,
// HKDF-SHA256, AES-256-OCB. Aggregators hold the private key.
//
// Wire form: version (1) || ephemeral public key (32) || body || tag (16).
// The body has the same length as the chunk, so every sealed chunk under one
// DJ key has the same size.

#include <array>
#include <cstdint>
#include <optional>

#include "alk/bytes.hpp"
#include "alk/rng.hpp"

namespace alk::envelope {

inline constexpr uint8_t kVersion = 0x01;
inline constexpr size_t kKeyBytes = 32;
inline constexpr size_t kTagBytes = 16;
inline constexpr size_t kOverhead = 1 + kKeyBytes + kTagBytes;

struct PublicKey {
  std::array<uint8_t, kKeyBytes> bytes{};
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct PrivateKey {
  std::array<uint8_t, kKeyBytes> scalar{};
  PublicKey pub;

  // "ALE1" || scalar.
  Bytes serialize() const;
  static PrivateKey parse(ByteView bytes);
  static PrivateKey from_scalar(const std::array<uint8_t, kKeyBytes>& scalar);
};

struct KeyPair {
  PublicKey pub;
  PrivateKey priv;
};

KeyPair env_keygen(Rng& rng);

constexpr size_t sealed_length(size_t chunk_width) { return chunk_width + kOverhead; }

// Throws alk::Error if chunk_bytes is not exactly chunk_width long.
Bytes seal(const PublicKey& pub, ByteView chunk_bytes, size_t chunk_width, Rng& rng);

// nullopt on any tampering, truncation, or wrong key.
std::optional<Bytes> open(const PrivateKey& priv, ByteView sealed, size_t chunk_width);

}  // namespace alk::envelope
