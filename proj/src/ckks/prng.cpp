#include "hei/ckks/prng.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

namespace hei::ckks {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

}  // namespace

Prng::Prng(const Seed& seed) : key_(seed) { ensure_sodium(); }

Prng Prng::from_entropy() { return Prng(random_seed()); }

Seed Prng::random_seed() {
  ensure_sodium();
  Seed s;
  randombytes_buf(s.data(), s.size());
  return s;
}

Seed Prng::seed_from_u64(std::uint64_t value, std::uint64_t domain) {
  ensure_sodium();
  std::uint8_t in[16];
  std::memcpy(in, &value, 8);
  std::memcpy(in + 8, &domain, 8);
  Seed s;
  crypto_generichash(s.data(), s.size(), in, sizeof in, nullptr, 0);
  return s;
}

void Prng::refill() {
  std::uint8_t nonce[crypto_stream_chacha20_NONCEBYTES] = {};
  static_assert(crypto_stream_chacha20_NONCEBYTES == 8);
  std::memcpy(nonce, &nonce_, 8);
  ++nonce_;
  crypto_stream_chacha20(buffer_.data(), buffer_.size(), nonce, key_.data());
  pos_ = 0;
}

void Prng::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    const std::size_t take = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, take);
    pos_ += take;
    done += take;
  }
}

std::uint64_t Prng::next_u64() {
  if (buffer_.size() - pos_ < 8) refill();
  std::uint64_t v;
  std::memcpy(&v, buffer_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double Prng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

u64 Prng::uniform_mod(const Modulus& q) {
  const int shift = 64 - q.bits();
  for (;;) {
    const u64 v = next_u64() >> shift;
    if (v < q.value()) return v;
  }
}

int Prng::ternary() {
  for (;;) {
    const auto b = static_cast<std::uint8_t>(next_u64());
    if (b < 255) return static_cast<int>(b % 3) - 1;
  }
}

int Prng::centered_binomial() {
  const std::uint64_t v = next_u64();
  const int a = __builtin_popcountll(v & 0x1FFFFFULL);
  const int b = __builtin_popcountll((v >> 21) & 0x1FFFFFULL);
  return a - b;
}

Seed Prng::derive_seed() {
  Seed s;
  fill(s);
  return s;
}

}  // namespace hei::ckks
