#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hei/ckks/modarith.hpp"

namespace hei::ckks {

using Seed = std::array<std::uint8_t, 32>;

// ChaCha20 keystream used for every random draw in the scheme. A fixed seed
// yields the same stream on every platform, which is what makes test-mode
// key generation reproducible and lets seeded key halves travel as 32 bytes.
class Prng {
 public:
  explicit Prng(const Seed& seed);
  // Fresh seed from the OS entropy source.
  static Prng from_entropy();
  static Seed seed_from_u64(std::uint64_t value, std::uint64_t domain = 0);
  static Seed random_seed();

  void fill(std::span<std::uint8_t> out);
  std::uint64_t next_u64();
  double next_unit();  // uniform in [0, 1)

  // Uniform residue modulo q by rejection.
  u64 uniform_mod(const Modulus& q);
  // Uniform in {-1, 0, 1}.
  int ternary();
  // Centered binomial with eta = 21 (std. dev. ~3.24).
  int centered_binomial();
  Seed derive_seed();

 private:
  void refill();

  Seed key_;
  std::uint64_t nonce_ = 0;
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t pos_ = buffer_.size();
};

}  // namespace hei::ckks
