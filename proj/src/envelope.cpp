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

#include "alk/envelope.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <sodium.h>

#include <algorithm>
#include <memory>
#include <string_view>

namespace alk::envelope {

namespace {

constexpr std::array<uint8_t, 4> kPrivateMagic = {'A', 'L', 'E', '1'};
constexpr std::string_view kInfo = "alk envelope v1";
constexpr size_t kNonceBytes = 12;

using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;
using KdfCtxPtr = std::unique_ptr<EVP_KDF_CTX, decltype(&EVP_KDF_CTX_free)>;

void init_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error("libsodium init failed");
}

PublicKey derive_public(const std::array<uint8_t, kKeyBytes>& scalar) {
  init_sodium();
  PublicKey pub;
  if (crypto_scalarmult_base(pub.bytes.data(), scalar.data()) != 0) {
    throw Error("x25519 public key derivation failed");
  }
  return pub;
}

// Shared secret; nullopt for degenerate peer keys.
std::optional<std::array<uint8_t, kKeyBytes>> agree(const std::array<uint8_t, kKeyBytes>& scalar,
                                                    const std::array<uint8_t, kKeyBytes>& peer) {
  init_sodium();
  std::array<uint8_t, kKeyBytes> secret{};
  if (crypto_scalarmult(secret.data(), scalar.data(), peer.data()) != 0) return std::nullopt;
  return secret;
}

EVP_KDF* hkdf() {
  static EVP_KDF* const kdf = EVP_KDF_fetch(nullptr, "HKDF", nullptr);
  return kdf;
}

struct SessionKey {
  std::array<uint8_t, 32> key{};
  std::array<uint8_t, kNonceBytes> nonce{};
};

SessionKey kdf(const std::array<uint8_t, kKeyBytes>& secret, const PublicKey& ephemeral,
               const PublicKey& recipient) {
  Bytes info(kInfo.begin(), kInfo.end());
  info.insert(info.end(), ephemeral.bytes.begin(), ephemeral.bytes.end());
  info.insert(info.end(), recipient.bytes.begin(), recipient.bytes.end());
  std::array<uint8_t, 32 + kNonceBytes> okm{};
  KdfCtxPtr ctx(hkdf() ? EVP_KDF_CTX_new(hkdf()) : nullptr, EVP_KDF_CTX_free);
  char digest[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, digest, 0),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_KEY, const_cast<uint8_t*>(secret.data()), secret.size()),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_INFO, info.data(), info.size()),
      OSSL_PARAM_construct_end(),
  };
  if (!ctx || EVP_KDF_derive(ctx.get(), okm.data(), okm.size(), params) != 1) throw Error("hkdf failed");
  SessionKey out;
  std::copy_n(okm.begin(), 32, out.key.begin());
  std::copy_n(okm.begin() + 32, kNonceBytes, out.nonce.begin());
  return out;
}

CipherCtxPtr ocb_context(const SessionKey& sk, bool encrypt) {
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  if (!ctx || EVP_CipherInit_ex(ctx.get(), EVP_aes_256_ocb(), nullptr, nullptr, nullptr, encrypt) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN, kNonceBytes, nullptr) != 1 ||
      (encrypt && EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, kTagBytes, nullptr) != 1) ||
      EVP_CipherInit_ex(ctx.get(), nullptr, nullptr, sk.key.data(), sk.nonce.data(), encrypt) != 1) {
    throw Error("aes-ocb init failed");
  }
  return ctx;
}

}  // namespace

PrivateKey PrivateKey::from_scalar(const std::array<uint8_t, kKeyBytes>& scalar) {
  PrivateKey priv;
  priv.scalar = scalar;
  priv.pub = derive_public(scalar);
  return priv;
}

Bytes PrivateKey::serialize() const {
  Bytes out(kPrivateMagic.size() + kKeyBytes);
  std::copy(kPrivateMagic.begin(), kPrivateMagic.end(), out.begin());
  std::copy(scalar.begin(), scalar.end(), out.begin() + kPrivateMagic.size());
  return out;
}

PrivateKey PrivateKey::parse(ByteView bytes) {
  if (bytes.size() != kPrivateMagic.size() + kKeyBytes ||
      !std::equal(kPrivateMagic.begin(), kPrivateMagic.end(), bytes.begin())) {
    throw Error("bad envelope private key");
  }
  std::array<uint8_t, kKeyBytes> scalar{};
  std::copy_n(bytes.begin() + kPrivateMagic.size(), kKeyBytes, scalar.begin());
  return from_scalar(scalar);
}

KeyPair env_keygen(Rng& rng) {
  std::array<uint8_t, kKeyBytes> scalar{};
  rng.fill(scalar);
  PrivateKey priv = PrivateKey::from_scalar(scalar);
  return KeyPair{priv.pub, priv};
}

Bytes seal(const PublicKey& pub, ByteView chunk_bytes, size_t chunk_width, Rng& rng) {
  if (chunk_bytes.size() != chunk_width) throw Error("sealed input must be exactly one chunk");
  KeyPair eph = env_keygen(rng);
  auto secret = agree(eph.priv.scalar, pub.bytes);
  if (!secret) throw Error("envelope key agreement failed");
  SessionKey sk = kdf(*secret, eph.pub, pub);

  Bytes out(sealed_length(chunk_width));
  out[0] = kVersion;
  std::copy(eph.pub.bytes.begin(), eph.pub.bytes.end(), out.begin() + 1);
  CipherCtxPtr ctx = ocb_context(sk, true);
  int len = 0;
  if (EVP_EncryptUpdate(ctx.get(), nullptr, &len, out.data(), 1 + kKeyBytes) != 1) {
    throw Error("aes-ocb aad failed");
  }
  uint8_t* body = out.data() + 1 + kKeyBytes;
  int total = 0;
  if (EVP_EncryptUpdate(ctx.get(), body, &len, chunk_bytes.data(),
                        static_cast<int>(chunk_bytes.size())) != 1) {
    throw Error("aes-ocb encrypt failed");
  }
  total += len;
  if (EVP_EncryptFinal_ex(ctx.get(), body + total, &len) != 1) throw Error("aes-ocb final failed");
  total += len;
  if (static_cast<size_t>(total) != chunk_width ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_GET_TAG, kTagBytes, body + chunk_width) != 1) {
    throw Error("aes-ocb tag failed");
  }
  return out;
}

std::optional<Bytes> open(const PrivateKey& priv, ByteView sealed, size_t chunk_width) {
  if (sealed.size() != sealed_length(chunk_width) || sealed[0] != kVersion) return std::nullopt;
  PublicKey eph;
  std::copy_n(sealed.begin() + 1, kKeyBytes, eph.bytes.begin());
  auto secret = agree(priv.scalar, eph.bytes);
  if (!secret) return std::nullopt;
  SessionKey sk = kdf(*secret, eph, priv.pub);

  CipherCtxPtr ctx = ocb_context(sk, false);
  const uint8_t* body = sealed.data() + 1 + kKeyBytes;
  Bytes tag(body + chunk_width, body + chunk_width + kTagBytes);
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, kTagBytes, tag.data()) != 1) {
    return std::nullopt;
  }
  int len = 0;
  if (EVP_DecryptUpdate(ctx.get(), nullptr, &len, sealed.data(), 1 + kKeyBytes) != 1) {
    return std::nullopt;
  }
  Bytes out(chunk_width);
  int total = 0;
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, body, static_cast<int>(chunk_width)) != 1) {
    return std::nullopt;
  }
  total += len;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) return std::nullopt;
  total += len;
  if (static_cast<size_t>(total) != chunk_width) return std::nullopt;
  return out;
}

}  // namespace alk::envelope
