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

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "alk/bytes.hpp"

namespace alk {

using Digest256 = std::array<uint8_t, 32>;

Digest256 sha256(ByteView data);
// Hash of the concatenation of all parts.
Digest256 sha256(std::initializer_list<ByteView> parts);

std::string base64_encode(ByteView data);
// Strict standard-alphabet decoding with padding; nullopt on any malformation.
std::optional<Bytes> base64_decode(std::string_view text);
size_t base64_length(size_t raw_bytes);

}  // namespace alk
