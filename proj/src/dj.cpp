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

#include "alk/dj.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <vector>

#include "alk/codec.hpp"

namespace alk::dj {

namespace {

constexpr std::array<uint8_t, 4> kPublicMagic = {'A', 'L', 'K', '1'};
constexpr std::array<uint8_t, 4> kPrivateMagic = {'A', 'L', 'S', '1'};

mpz_class mod_pos(const mpz_class& a, const mpz_class& m) {
  mpz_class r;
  mpz_mod(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
  return r;
}

mpz_class powm(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return r;
}

mpz_class invert(const mpz_class& a, const mpz_class& m) {
  mpz_class r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0) {
    throw Error("value not invertible");
  }
  return r;
}

mpz_class gcd(const mpz_class& a, const mpz_class& b) {
  mpz_class r;
  mpz_gcd(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

unsigned bit_length(const mpz_class& v) {
  return v == 0 ? 0 : static_cast<unsigned>(mpz_sizeinbase(v.get_mpz_t(), 2));
}

// base^e mod m for exponents up to max_bits, by 8-bit windows over a table of
// base^(d * 256^row).
class FixedBaseTable {
 public:
  FixedBaseTable(const mpz_class& base, const mpz_class& mod, unsigned max_bits)
      : base_(base), mod_(mod), rows_((max_bits + 7) / 8) {
    table_.resize(static_cast<size_t>(rows_) * 255);
    mpz_class unit = mod_pos(base, mod);
    for (unsigned r = 0; r < rows_; ++r) {
      mpz_class* row = &table_[static_cast<size_t>(r) * 255];
      row[0] = unit;
      for (int d = 1; d < 255; ++d) row[d] = mod_pos(row[d - 1] * unit, mod);
      unit = mod_pos(row[254] * unit, mod);
    }
  }

  mpz_class pow(const mpz_class& e) const {
    if (bit_length(e) > rows_ * 8) return powm(base_, e, mod_);
    mpz_class acc = 1;
    if (e == 0) return acc;
    size_t count = 0;
    std::vector<uint8_t> digits((mpz_sizeinbase(e.get_mpz_t(), 2) + 7) / 8);
    mpz_export(digits.data(), &count, -1, 1, 0, 0, e.get_mpz_t());
    bool first = true;
    for (size_t r = 0; r < count; ++r) {
      uint8_t d = digits[r];
      if (d == 0) continue;
      const mpz_class& f = table_[r * 255 + d - 1];
      if (first) {
        acc = f;
        first = false;
      } else {
        acc *= f;
        mpz_mod(acc.get_mpz_t(), acc.get_mpz_t(), mod_.get_mpz_t());
      }
    }
    return acc;
  }

 private:
  mpz_class base_;
  mpz_class mod_;
  unsigned rows_;
  std::vector<mpz_class> table_;
};

// Precomputed fixed bases: g^(N^s), h^(N^s) mod N^(s+1) and g^N mod N^2.
struct EncTables {
  std::unique_ptr<FixedBaseTable> g_data;
  std::unique_ptr<FixedBaseTable> h_data;
  std::unique_ptr<FixedBaseTable> g_tag;
};

}  // namespace

TagLayout TagLayout::for_modulus(unsigned modulus_bits, unsigned guard_bits) {
  TagLayout layout;
  layout.guard_bits = guard_bits;
  layout.r1_bits = modulus_bits >= 1024 ? kMaxR1Bits : std::max(1u, modulus_bits / 2);
  return layout;
}

mpz_class ChunkMeta::r0() const {
  mpz_class v = k;
  v <<= 32;
  v += i;
  v <<= 32;
  v += n;
  return v;
}

ChunkMeta ChunkMeta::from_r0(const mpz_class& r0) {
  if (sgn(r0) < 0 || bit_length(r0) > kR0Bits) throw Error("r0 exceeds 128 bits");
  Bytes b = to_fixed_be(r0, 16);
  return ChunkMeta{get_u64(b, 0), get_u32(b, 8), get_u32(b, 12)};
}

ChunkMeta ChunkMeta::random(Rng& rng, uint32_t i, uint32_t n) {
  if (n == 0) throw Error("chunk meta requires n >= 1");
  uint64_t k = 0;
  while (k == 0) k = rng.next_u64();
  return ChunkMeta{k, i, n};
}

TagPlaintext TagPlaintext::compose(const TagLayout& layout, const mpz_class& r0,
                                   const mpz_class& r1) {
  if (bit_length(r0) > kR0Bits) throw Error("r0 exceeds 128 bits");
  if (bit_length(r1) > layout.r1_bits) throw Error("r1 exceeds its field");
  mpz_class v = r0;
  v <<= layout.r0_shift();
  v += r1;
  return TagPlaintext{v};
}

mpz_class TagPlaintext::r0_field(const TagLayout& layout) const {
  mpz_class v = value >> layout.r0_shift();
  mpz_fdiv_r_2exp(v.get_mpz_t(), v.get_mpz_t(), layout.r0_field_bits());
  return v;
}

mpz_class TagPlaintext::r1_field(const TagLayout& layout) const {
  mpz_class v;
  mpz_fdiv_r_2exp(v.get_mpz_t(), value.get_mpz_t(), layout.r0_shift());
  return v;
}

// ---------------------------------------------------------------------------
// Keys

struct PublicKey::State {
  mpz_class n;
  mpz_class g;
  mpz_class h;
  uint32_t s_data = 0;
  uint32_t guard_bits = 0;
  unsigned bits = 0;
  TagLayout layout;
  std::vector<mpz_class> npow;  // N^0 .. N^(s_data+1)

  std::once_flag tables_once;
  EncTables tables;

  const EncTables& enc_tables() {
    std::call_once(tables_once, [this] {
      unsigned s = s_data;
      const mpz_class& mod_data = npow[s + 1];
      const mpz_class& mod_tag = npow[2];
      mpz_class gs = powm(g, npow[s], mod_data);
      mpz_class hs = powm(h, npow[s], mod_data);
      mpz_class g1 = powm(g, n, mod_tag);
      unsigned hash_bits = std::max(8u, bits / 16);
      tables.g_data = std::make_unique<FixedBaseTable>(gs, mod_data, layout.r1_bits);
      tables.h_data = std::make_unique<FixedBaseTable>(hs, mod_data, hash_bits);
      tables.g_tag = std::make_unique<FixedBaseTable>(g1, mod_tag, layout.r1_bits);
    });
    return tables;
  }
};

PublicKey PublicKey::from_parts(mpz_class n, uint32_t s_data, mpz_class g, mpz_class h,
                                uint32_t guard_bits) {
  if (n <= 3 || mpz_even_p(n.get_mpz_t())) throw Error("modulus must be odd and > 3");
  if (s_data < 1) throw Error("sData must be >= 1");
  if (g <= 1 || g >= n || h <= 1 || h >= n) throw Error("g and h must lie in (1, N)");
  if (gcd(g, n) != 1 || gcd(h, n) != 1) throw Error("g and h must be units mod N");
  if (guard_bits < 1 || guard_bits > 64) throw Error("guard bits out of range");
  auto st = std::make_shared<State>();
  st->n = std::move(n);
  st->g = std::move(g);
  st->h = std::move(h);
  st->s_data = s_data;
  st->guard_bits = guard_bits;
  st->bits = bit_length(st->n);
  st->layout = TagLayout::for_modulus(st->bits, guard_bits);
  st->npow.resize(s_data + 2);
  st->npow[0] = 1;
  for (uint32_t j = 1; j < s_data + 2; ++j) st->npow[j] = st->npow[j - 1] * st->n;
  PublicKey pk;
  pk.state_ = std::move(st);
  return pk;
}

const mpz_class& PublicKey::modulus() const { return state_->n; }
uint32_t PublicKey::s_data() const { return state_->s_data; }
const mpz_class& PublicKey::g() const { return state_->g; }
const mpz_class& PublicKey::h() const { return state_->h; }
uint32_t PublicKey::guard_bits() const { return state_->guard_bits; }
const TagLayout& PublicKey::layout() const { return state_->layout; }
unsigned PublicKey::modulus_bits() const { return state_->bits; }

mpz_class PublicKey::modulus_power(unsigned j) const {
  if (j < state_->npow.size()) return state_->npow[j];
  mpz_class r;
  mpz_pow_ui(r.get_mpz_t(), state_->n.get_mpz_t(), j);
  return r;
}

size_t PublicKey::residue_bytes() const { return (state_->bits + 7) / 8; }
size_t PublicKey::plaintext_bytes() const { return state_->s_data * residue_bytes(); }

size_t PublicKey::data_bytes() const {
  return (bit_length(state_->npow[state_->s_data]) - 1) / 8;
}

size_t PublicKey::c_bytes() const { return (state_->s_data + 1) * residue_bytes(); }
size_t PublicKey::t_bytes() const { return 2 * residue_bytes(); }
unsigned PublicKey::hash_bits() const { return std::max(8u, state_->bits / 16); }

bool PublicKey::supports_chunks() const {
  return state_->layout.total_bits() < state_->bits - 1 && hash_bits() <= 256;
}

Bytes PublicKey::serialize() const {
  Bytes out(kPublicMagic.begin(), kPublicMagic.end());
  Bytes word;
  put_prefixed(out, state_->n);
  put_u32(word, state_->s_data);
  put_prefixed(out, word);
  put_prefixed(out, state_->g);
  put_prefixed(out, state_->h);
  word.clear();
  put_u32(word, state_->guard_bits);
  put_prefixed(out, word);
  return out;
}

PublicKey PublicKey::read(ByteReader& reader) {
  ByteView magic = reader.take(4);
  if (!std::equal(magic.begin(), magic.end(), kPublicMagic.begin())) {
    throw Error("bad public key magic");
  }
  mpz_class n = from_be(reader.take_prefixed());
  ByteView s = reader.take_prefixed();
  if (s.size() != 4) throw Error("bad sData field");
  mpz_class g = from_be(reader.take_prefixed());
  mpz_class h = from_be(reader.take_prefixed());
  ByteView b = reader.take_prefixed();
  if (b.size() != 4) throw Error("bad guard-bit field");
  return from_parts(n, get_u32(s, 0), g, h, get_u32(b, 0));
}

PublicKey PublicKey::parse(ByteView bytes) {
  ByteReader reader(bytes);
  PublicKey pk = read(reader);
  if (!reader.done()) throw Error("trailing bytes after public key");
  return pk;
}

bool operator==(const PublicKey& a, const PublicKey& b) {
  const auto& x = *a.state_;
  const auto& y = *b.state_;
  return x.n == y.n && x.s_data == y.s_data && x.g == y.g && x.h == y.h &&
         x.guard_bits == y.guard_bits;
}

// Per-exponent decryption constants.
struct DecContext {
  unsigned s = 0;
  mpz_class p_mod;     // p^(s+1)
  mpz_class q_mod;     // q^(s+1)
  mpz_class crt_coef;  // (p^(s+1))^-1 mod q^(s+1)
  mpz_class lambda_inv;  // lambda^-1 mod N^s
  mpz_class root_exp;    // (N^s)^-1 mod lambda
  std::vector<mpz_class> npow;      // N^0 .. N^(s+1)
  std::vector<mpz_class> inv_fact;  // (k!)^-1 mod N^s, k = 0..s
};

struct PrivateKey::State {
  PublicKey pub;
  mpz_class p;
  mpz_class q;
  mpz_class lambda;
  DecContext tag_ctx;
  DecContext data_ctx;

  DecContext make_context(unsigned s) const {
    DecContext ctx;
    ctx.s = s;
    const mpz_class& n = pub.modulus();
    mpz_pow_ui(ctx.p_mod.get_mpz_t(), p.get_mpz_t(), s + 1);
    mpz_pow_ui(ctx.q_mod.get_mpz_t(), q.get_mpz_t(), s + 1);
    ctx.crt_coef = invert(ctx.p_mod, ctx.q_mod);
    ctx.npow.resize(s + 2);
    ctx.npow[0] = 1;
    for (unsigned j = 1; j < s + 2; ++j) ctx.npow[j] = ctx.npow[j - 1] * n;
    ctx.lambda_inv = invert(lambda, ctx.npow[s]);
    ctx.root_exp = invert(mod_pos(ctx.npow[s], lambda), lambda);
    ctx.inv_fact.resize(s + 1);
    mpz_class fact = 1;
    for (unsigned k = 0; k <= s; ++k) {
      if (k > 1) fact *= k;
      ctx.inv_fact[k] = invert(fact, ctx.npow[s]);
    }
    return ctx;
  }

  const DecContext* context_for(unsigned s) const {
    if (s == 1) return &tag_ctx;
    if (s == data_ctx.s) return &data_ctx;
    return nullptr;
  }
};

PrivateKey PrivateKey::from_primes(const PublicKey& pub, mpz_class p, mpz_class q) {
  if (p == q) throw Error("p and q must be distinct");
  if (p * q != pub.modulus()) throw Error("p * q does not match N");
  if (mpz_probab_prime_p(p.get_mpz_t(), 25) == 0 || mpz_probab_prime_p(q.get_mpz_t(), 25) == 0) {
    throw Error("factors must be prime");
  }
  for (const mpz_class* v : {&pub.g(), &pub.h()}) {
    if (mpz_legendre(v->get_mpz_t(), p.get_mpz_t()) != 1 ||
        mpz_legendre(v->get_mpz_t(), q.get_mpz_t()) != 1) {
      throw Error("g and h must be quadratic residues");
    }
  }
  auto st = std::make_shared<State>();
  st->pub = pub;
  st->p = std::move(p);
  st->q = std::move(q);
  mpz_lcm(st->lambda.get_mpz_t(), mpz_class(st->p - 1).get_mpz_t(),
          mpz_class(st->q - 1).get_mpz_t());
  if (gcd(st->lambda, pub.modulus()) != 1) throw Error("gcd(N, lambda) must be 1");
  st->tag_ctx = st->make_context(1);
  st->data_ctx = st->make_context(pub.s_data());
  PrivateKey sk;
  sk.state_ = std::move(st);
  return sk;
}

const PublicKey& PrivateKey::pub() const { return state_->pub; }
const mpz_class& PrivateKey::p() const { return state_->p; }
const mpz_class& PrivateKey::q() const { return state_->q; }
const mpz_class& PrivateKey::lambda() const { return state_->lambda; }

Bytes PrivateKey::serialize() const {
  Bytes out(kPrivateMagic.begin(), kPrivateMagic.end());
  put_prefixed(out, state_->pub.serialize());
  put_prefixed(out, state_->p);
  put_prefixed(out, state_->q);
  return out;
}

PrivateKey PrivateKey::parse(ByteView bytes) {
  ByteReader reader(bytes);
  ByteView magic = reader.take(4);
  if (!std::equal(magic.begin(), magic.end(), kPrivateMagic.begin())) {
    throw Error("bad private key magic");
  }
  PublicKey pub = PublicKey::parse(reader.take_prefixed());
  mpz_class p = from_be(reader.take_prefixed());
  mpz_class q = from_be(reader.take_prefixed());
  if (!reader.done()) throw Error("trailing bytes after private key");
  return from_primes(pub, p, q);
}

// ---------------------------------------------------------------------------
// Key generation

namespace {

const std::vector<uint32_t>& small_odd_primes() {
  static const std::vector<uint32_t> primes = [] {
    constexpr uint32_t kLimit = 1 << 16;
    std::vector<bool> composite(kLimit, false);
    std::vector<uint32_t> out;
    for (uint32_t i = 3; i < kLimit; i += 2) {
      if (composite[i]) continue;
      out.push_back(i);
      for (uint64_t j = static_cast<uint64_t>(i) * i; j < kLimit; j += 2 * i) composite[j] = true;
    }
    return out;
  }();
  return primes;
}

// Safe prime p = 2q + 1 of exactly `bits` bits with the top two bits set.
mpz_class random_safe_prime(unsigned bits, Rng& rng) {
  constexpr unsigned kWindow = 1 << 15;
  constexpr int kMaxWindows = 4000;
  const auto& primes = small_odd_primes();
  std::vector<uint8_t> sieve(kWindow);
  for (int attempt = 0; attempt < kMaxWindows; ++attempt) {
    // q has bits-1 bits; its top two bits become the top two bits of p.
    mpz_class q = rng.bits(bits - 1);
    mpz_setbit(q.get_mpz_t(), bits - 2);
    mpz_setbit(q.get_mpz_t(), bits - 3);
    mpz_setbit(q.get_mpz_t(), 0);
    // Candidates are q + 2j for j in [0, kWindow).
    std::fill(sieve.begin(), sieve.end(), uint8_t{0});
    for (uint32_t sp : primes) {
      uint64_t r = mpz_fdiv_ui(q.get_mpz_t(), sp);
      uint64_t inv2 = (sp + 1) / 2;
      // q + 2j == 0 (mod sp)  and  2(q + 2j) + 1 == 0, i.e. q + 2j == (sp-1)/2.
      for (uint64_t target : {uint64_t{0}, uint64_t{(sp - 1) / 2}}) {
        uint64_t j = ((target + sp - r) % sp) * inv2 % sp;
        for (; j < kWindow; j += sp) sieve[j] = 1;
      }
    }
    for (unsigned j = 0; j < kWindow; ++j) {
      if (sieve[j]) continue;
      mpz_class cand_q = q + 2 * j;
      mpz_class cand_p = 2 * cand_q + 1;
      if (bit_length(cand_p) != bits || !mpz_tstbit(cand_p.get_mpz_t(), bits - 2)) break;
      // Fermat base 2 on p first; it rejects almost all candidates cheaply.
      if (powm(2, cand_p - 1, cand_p) != 1) continue;
      if (mpz_probab_prime_p(cand_q.get_mpz_t(), 30) == 0) continue;
      if (mpz_probab_prime_p(cand_p.get_mpz_t(), 30) == 0) continue;
      return cand_p;
    }
  }
  throw Error("prime generation timeout");
}

}  // namespace

KeyPair keygen(unsigned bits, uint32_t s_data, Rng& rng) {
  if (bits != 512 && bits != 1024 && bits != 2048) {
    throw Error("modulus size must be 512, 1024 or 2048 bits");
  }
  if (s_data < 1) throw Error("sData must be >= 1");
  mpz_class p = random_safe_prime(bits / 2, rng);
  mpz_class q;
  do {
    q = random_safe_prime(bits / 2, rng);
  } while (q == p);
  mpz_class n = p * q;
  mpz_class g;
  do {
    mpz_class a = rng.below(n);
    if (a <= 1 || gcd(a, n) != 1) continue;
    g = mod_pos(a * a, n);
  } while (g <= 1);
  mpz_class quarter = n / 4;
  mpz_class x = 1 + rng.below(quarter - 1);
  mpz_class h = powm(g, x, n);
  PublicKey pub = PublicKey::from_parts(n, s_data, g, h);
  PrivateKey priv = PrivateKey::from_primes(pub, p, q);
  return KeyPair{std::move(pub), std::move(priv)};
}

// ---------------------------------------------------------------------------
// The isomorphism

namespace {

// (1+N)^a mod N^(s+1) by the binomial expansion sum_j C(a, j) N^j.
mpz_class one_plus_n_pow(const PublicKey& pk, unsigned s, const mpz_class& a) {
  const mpz_class mod = pk.modulus_power(s + 1);
  if (s == 1) return mod_pos(1 + a * pk.modulus(), mod);
  mpz_class result = 1;
  mpz_class falling = 1;  // a (a-1) ... (a-j+1)
  mpz_class fact = 1;
  for (unsigned j = 1; j <= s; ++j) {
    falling = mod_pos(falling * (a - (j - 1)), mod);
    fact *= j;
    mpz_class inv;
    if (mpz_invert(inv.get_mpz_t(), fact.get_mpz_t(), mod.get_mpz_t()) == 0) {
      return powm(1 + pk.modulus(), a, mod);
    }
    result += mod_pos(falling * inv, mod) * pk.modulus_power(j);
  }
  return mod_pos(result, mod);
}

// Damgard-Jurik extraction of i from u = (1+N)^i mod N^(s+1).
mpz_class extract_exponent(const DecContext& ctx, const mpz_class& u) {
  const mpz_class& n = ctx.npow[1];
  mpz_class i = 0;
  for (unsigned j = 1; j <= ctx.s; ++j) {
    const mpz_class& nj = ctx.npow[j];
    mpz_class t1 = (mod_pos(u, ctx.npow[j + 1]) - 1) / n;
    mpz_class t2 = i;
    for (unsigned k = 2; k <= j; ++k) {
      i -= 1;
      t2 = mod_pos(t2 * i, nj);
      t1 = mod_pos(t1 - t2 * ctx.npow[k - 1] * ctx.inv_fact[k], nj);
    }
    i = mod_pos(t1, nj);
  }
  return i;
}

void require_unit(const PrivateKey& sk, const mpz_class& c, const mpz_class& mod) {
  if (sgn(c) <= 0 || c >= mod) throw Error("ciphertext out of range");
  if (mpz_divisible_p(c.get_mpz_t(), sk.p().get_mpz_t()) ||
      mpz_divisible_p(c.get_mpz_t(), sk.q().get_mpz_t())) {
    throw Error("ciphertext is not a unit");
  }
}

mpz_class lambda_power(const DecContext& ctx, const mpz_class& lambda, const mpz_class& c) {
  mpz_class up = powm(mod_pos(c, ctx.p_mod), lambda, ctx.p_mod);
  mpz_class uq = powm(mod_pos(c, ctx.q_mod), lambda, ctx.q_mod);
  return up + ctx.p_mod * mod_pos((uq - up) * ctx.crt_coef, ctx.q_mod);
}

}  // namespace

mpz_class psi(const PublicKey& pk, unsigned s, const mpz_class& a, const mpz_class& b) {
  if (s < 1) throw Error("exponent s must be >= 1");
  const mpz_class ns = pk.modulus_power(s);
  if (sgn(a) < 0 || a >= ns) throw Error("plaintext out of range");
  if (sgn(b) <= 0 || gcd(b, pk.modulus()) != 1) throw Error("randomness is not a unit");
  const mpz_class mod = pk.modulus_power(s + 1);
  mpz_class r = powm(mod_pos(b, pk.modulus()), ns, mod);
  return mod_pos(one_plus_n_pow(pk, s, a) * r, mod);
}

mpz_class psi_inv_plaintext(const PrivateKey& sk, unsigned s, const mpz_class& ciphertext) {
  const DecContext* cached = sk.state().context_for(s);
  DecContext local;
  if (cached == nullptr) {
    local = sk.state().make_context(s);
    cached = &local;
  }
  require_unit(sk, ciphertext, cached->npow[s + 1]);
  mpz_class u = lambda_power(*cached, sk.lambda(), ciphertext);
  return mod_pos(extract_exponent(*cached, u) * cached->lambda_inv, cached->npow[s]);
}

PsiPreimage psi_inv(const PrivateKey& sk, unsigned s, const mpz_class& ciphertext) {
  const DecContext* cached = sk.state().context_for(s);
  DecContext local;
  if (cached == nullptr) {
    local = sk.state().make_context(s);
    cached = &local;
  }
  PsiPreimage out;
  out.a = psi_inv_plaintext(sk, s, ciphertext);
  const mpz_class& n = sk.pub().modulus();
  out.b = powm(mod_pos(ciphertext, n), cached->root_exp, n);
  return out;
}

// ---------------------------------------------------------------------------
// Chunks

mpz_class chk_hash(const PublicKey& pk, const mpz_class& m, const mpz_class& r0) {
  if (sgn(r0) < 0 || bit_length(r0) > kR0Bits) throw Error("r0 exceeds 128 bits");
  Bytes mb = to_fixed_be(m, pk.plaintext_bytes());
  Bytes rb = to_fixed_be(r0, kR0Bits / 8);
  Digest256 d = sha256({ByteView(mb), ByteView(rb)});
  return from_be(ByteView(d).first(pk.hash_bits() / 8));
}

Bytes serialize_chunk(const PublicKey& pk, const Chunk& chunk) {
  Bytes out(pk.chunk_bytes());
  write_fixed_be(chunk.c, std::span(out).first(pk.c_bytes()));
  write_fixed_be(chunk.t, std::span(out).subspan(pk.c_bytes()));
  return out;
}

namespace {

void check_ranges(const PublicKey& pk, const Chunk& chunk) {
  const auto& np = pk.state().npow;
  if (sgn(chunk.c) <= 0 || chunk.c >= np[pk.s_data() + 1]) throw Error("data component out of range");
  if (sgn(chunk.t) <= 0 || chunk.t >= np[2]) throw Error("tag component out of range");
}

Chunk encrypt(const PublicKey& pk, const mpz_class& m, const mpz_class& r0, Rng& rng) {
  if (!pk.supports_chunks()) throw Error("modulus too small for the tag layout");
  if (sgn(m) < 0 || m >= pk.modulus_power(pk.s_data())) throw Error("payload too large");
  const TagLayout& layout = pk.layout();
  mpz_class chk = (m == 0 && r0 == 0) ? mpz_class(0) : chk_hash(pk, m, r0);
  mpz_class r1 = rng.bits(layout.r1_bits);
  mpz_class r2 = rng.bits(layout.r1_bits);
  Chunk out;
  out.c = detail::data_component(pk, m, chk, r1);
  out.t = detail::tag_component(pk, TagPlaintext::compose(layout, r0, r1), r2);
  return out;
}

}  // namespace

Chunk parse_chunk(const PublicKey& pk, ByteView bytes) {
  if (bytes.size() != pk.chunk_bytes()) throw Error("chunk has wrong length");
  Chunk chunk{from_be(bytes.first(pk.c_bytes())), from_be(bytes.subspan(pk.c_bytes()))};
  check_ranges(pk, chunk);
  return chunk;
}

namespace detail {

mpz_class data_component(const PublicKey& pk, const mpz_class& m, const mpz_class& chk,
                         const mpz_class& r1) {
  const EncTables& tables = const_cast<PublicKey::State&>(pk.state()).enc_tables();
  const mpz_class& mod = pk.state().npow[pk.s_data() + 1];
  mpz_class c = tables.g_data->pow(r1);
  if (chk != 0) c = mod_pos(c * tables.h_data->pow(chk), mod);
  if (m != 0) c = mod_pos(c * one_plus_n_pow(pk, pk.s_data(), m), mod);
  return c;
}

mpz_class tag_component(const PublicKey& pk, const TagPlaintext& tag, const mpz_class& r2) {
  const EncTables& tables = const_cast<PublicKey::State&>(pk.state()).enc_tables();
  const mpz_class& mod = pk.state().npow[2];
  return mod_pos(one_plus_n_pow(pk, 1, tag.value) * tables.g_tag->pow(r2), mod);
}

}  // namespace detail

Chunk enc_data(const PublicKey& pk, const mpz_class& m, const ChunkMeta& meta, Rng& rng) {
  if (meta.k == 0) throw Error("file id k must be nonzero");
  if (meta.n == 0) throw Error("chunk meta requires n >= 1");
  return encrypt(pk, m, meta.r0(), rng);
}

Chunk enc_zero(const PublicKey& pk, Rng& rng) { return encrypt(pk, 0, 0, rng); }

Chunk aggregate(const PublicKey& pk, const Chunk& x, const Chunk& y) {
  Chunk out = x;
  aggregate_into(pk, out, y);
  return out;
}

void aggregate_into(const PublicKey& pk, Chunk& acc, const Chunk& x) {
  check_ranges(pk, acc);
  check_ranges(pk, x);
  const auto& np = pk.state().npow;
  acc.c *= x.c;
  mpz_mod(acc.c.get_mpz_t(), acc.c.get_mpz_t(), np[pk.s_data() + 1].get_mpz_t());
  acc.t *= x.t;
  mpz_mod(acc.t.get_mpz_t(), acc.t.get_mpz_t(), np[2].get_mpz_t());
}

mpz_class decrypt_tag(const PrivateKey& sk, const mpz_class& t) {
  return psi_inv_plaintext(sk, 1, t);
}

WhiteTest is_white(const PrivateKey& sk, const Chunk& chunk) {
  WhiteTest out;
  out.tag.value = decrypt_tag(sk, chunk.t);
  out.white = out.tag.r0_field(sk.pub().layout()) == 0;
  return out;
}

std::optional<Plaintext> dec_vrfy_with_tag(const PrivateKey& sk, const Chunk& chunk,
                                           const TagPlaintext& tag) {
  const PublicKey& pk = sk.pub();
  const TagLayout& layout = pk.layout();
  if (sgn(tag.value) < 0 || bit_length(tag.value) > layout.total_bits()) return std::nullopt;
  mpz_class r0 = tag.r0_field(layout);
  if (bit_length(r0) > kR0Bits) return std::nullopt;
  mpz_class r1 = tag.r1_field(layout);
  PsiPreimage pre;
  try {
    pre = psi_inv(sk, pk.s_data(), chunk.c);
  } catch (const Error&) {
    return std::nullopt;
  }
  bool zero = pre.a == 0 && r0 == 0;
  if (!zero && r0 == 0) return std::nullopt;
  mpz_class chk = zero ? mpz_class(0) : chk_hash(pk, pre.a, r0);
  const mpz_class& n = pk.modulus();
  mpz_class expected = mod_pos(powm(pk.h(), chk, n) * powm(pk.g(), r1, n), n);
  if (expected != pre.b) return std::nullopt;
  Plaintext out;
  out.m = std::move(pre.a);
  out.meta = ChunkMeta::from_r0(r0);
  if (!zero && (out.meta.k == 0 || out.meta.n == 0)) return std::nullopt;
  return out;
}

std::optional<Plaintext> dec_vrfy(const PrivateKey& sk, const Chunk& chunk) {
  TagPlaintext tag;
  try {
    tag.value = decrypt_tag(sk, chunk.t);
  } catch (const Error&) {
    return std::nullopt;
  }
  return dec_vrfy_with_tag(sk, chunk, tag);
}

}  // namespace alk::dj
