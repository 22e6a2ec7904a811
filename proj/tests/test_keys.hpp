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

#include "alk/dj.hpp"
#include "alk/rng.hpp"

namespace alk::testing {

// One 512-bit, sData = 2 key per test binary.
inline const dj::KeyPair& toy_keys() {
  static const dj::KeyPair keys = [] {
    Rng rng(uint64_t{0x70b5eed});
    return dj::keygen(512, 2, rng);
  }();
  return keys;
}

// N = 35 = 5 * 7 with g = 4, h = 16; only good for psi-level checks.
inline const dj::KeyPair& tiny_keys() {
  static const dj::KeyPair keys = [] {
    dj::PublicKey pub = dj::PublicKey::from_parts(35, 1, 4, 16);
    return dj::KeyPair{pub, dj::PrivateKey::from_primes(pub, 5, 7)};
  }();
  return keys;
}

}  // namespace alk::testing
