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

#include <filesystem>

#include "alk/bytes.hpp"
#include "alk/dj.hpp"
#include "alk/envelope.hpp"

namespace alk {

// What clients embed: the DJ public key file followed by two more
// length-prefixed fields, the envelope public key and the sealed-chunk length.
struct KeyBundle {
  dj::PublicKey dj;
  envelope::PublicKey env;

  size_t sealed_length() const { return envelope::sealed_length(dj.chunk_bytes()); }

  Bytes serialize() const;
  static KeyBundle parse(ByteView bytes);
};

Bytes read_file(const std::filesystem::path& path);
// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, ByteView data);

}  // namespace alk
