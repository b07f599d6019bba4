#pragma once

#include <cstdint>
#include <vector>

namespace hei::ckks {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

// A word-sized prime modulus with a precomputed Barrett ratio floor(2^128 / q).
// Values are kept below 2^62 so lazy NTT butterflies never overflow.
class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(u64 value);

  u64 value() const { return value_; }
  int bits() const { return bits_; }

  u64 reduce(u64 a) const { return a >= value_ ? a % value_ : a; }

  // Barrett reduction of a 128-bit product.
  u64 reduce128(u128 x) const {
    const u64 lo = static_cast<u64>(x);
    const u64 hi = static_cast<u64>(x >> 64);
    // Estimate floor(x * ratio / 2^128) from the upper words only.
    const u128 lo_r0 = static_cast<u128>(lo) * ratio_lo_;
    const u128 lo_r1 = static_cast<u128>(lo) * ratio_hi_;
    const u128 hi_r0 = static_cast<u128>(hi) * ratio_lo_;
    u128 mid = (lo_r0 >> 64) + static_cast<u64>(lo_r1) + static_cast<u64>(hi_r0);
    const u64 q_est = static_cast<u64>((mid >> 64) + (lo_r1 >> 64) + (hi_r0 >> 64)) +
                      hi * ratio_hi_;
    u64 r = lo - q_est * value_;
    // The estimate undershoots by at most two multiples of q.
    if (r >= value_) r -= value_;
    return r >= value_ ? r - value_ : r;
  }

  u64 mul(u64 a, u64 b) const { return reduce128(static_cast<u128>(a) * b); }
  u64 add(u64 a, u64 b) const {
    u64 s = a + b;
    return s >= value_ ? s - value_ : s;
  }
  u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + value_ - b; }
  u64 neg(u64 a) const { return a == 0 ? 0 : value_ - a; }

  u64 pow(u64 base, u64 exp) const;
  u64 inv(u64 a) const;  // a must be nonzero; q is prime

  // Shoup precomputation for repeated multiplication by a fixed w.
  u64 shoup(u64 w) const { return static_cast<u64>((static_cast<u128>(w) << 64) / value_); }
  u64 mul_shoup(u64 a, u64 w, u64 w_shoup) const {
    const u64 hi = static_cast<u64>((static_cast<u128>(a) * w_shoup) >> 64);
    u64 r = a * w - hi * value_;
    return r >= value_ ? r - value_ : r;
  }

  // Signed integer to residue.
  u64 from_signed(std::int64_t v) const {
    if (v >= 0) return static_cast<u64>(v) % value_;
    const u64 m = static_cast<u64>(-(v + 1)) % value_;  // avoids INT64_MIN overflow
    return value_ - 1 - m;
  }
  // Residue to centered representative in (-q/2, q/2].
  std::int64_t to_centered(u64 a) const {
    return a > (value_ >> 1) ? -static_cast<std::int64_t>(value_ - a) : static_cast<std::int64_t>(a);
  }

 private:
  u64 value_ = 0;
  int bits_ = 0;
  u64 ratio_lo_ = 0;
  u64 ratio_hi_ = 0;
};

bool is_prime(u64 n);

// Returns `count` distinct primes of exactly `bits` bits with p = 1 mod 2n,
// searching downward from 2^bits and skipping anything in `exclude`.
std::vector<u64> find_ntt_primes(int bits, std::size_t n, std::size_t count,
                                 const std::vector<u64>& exclude = {});

// A primitive 2n-th root of unity modulo q (the smallest one, for determinism).
u64 minimal_primitive_root(std::size_t two_n, const Modulus& q);

}  // namespace hei::ckks
