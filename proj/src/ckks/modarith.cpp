#include "hei/ckks/modarith.hpp"

#include <algorithm>
#include <stdexcept>

namespace hei::ckks {

Modulus::Modulus(u64 value) : value_(value) {
  if (value < 2 || value >= (u64{1} << 62)) {
    throw std::invalid_argument("modulus must be in [2, 2^62)");
  }
  bits_ = 64 - __builtin_clzll(value);
  // floor(2^128 / q) computed as floor((2^128 - 1) / q); q is odd so they agree.
  const u128 all_ones = ~u128{0};
  const u128 ratio = all_ones / value;
  ratio_lo_ = static_cast<u64>(ratio);
  ratio_hi_ = static_cast<u64>(ratio >> 64);
}

u64 Modulus::pow(u64 base, u64 exp) const {
  u64 result = 1 % value_;
  base = reduce(base);
  while (exp != 0) {
    if (exp & 1) result = mul(result, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return result;
}

u64 Modulus::inv(u64 a) const {
  a = reduce(a);
  if (a == 0) throw std::domain_error("zero has no inverse");
  return pow(a, value_ - 2);
}

namespace {

u64 mulmod_raw(u64 a, u64 b, u64 m) { return static_cast<u64>(static_cast<u128>(a) * b % m); }

u64 powmod_raw(u64 b, u64 e, u64 m) {
  u64 r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = mulmod_raw(r, b, m);
    b = mulmod_raw(b, b, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

bool is_prime(u64 n) {
  if (n < 2) return false;
  for (u64 p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  u64 d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // These witnesses are deterministic for all 64-bit n.
  for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    u64 x = powmod_raw(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod_raw(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

std::vector<u64> find_ntt_primes(int bits, std::size_t n, std::size_t count,
                                 const std::vector<u64>& exclude) {
  if (bits < 20 || bits > 61) throw std::invalid_argument("prime bit-size must be in [20, 61]");
  const u64 step = 2 * static_cast<u64>(n);
  const u64 upper = u64{1} << bits;
  const u64 lower = u64{1} << (bits - 1);
  std::vector<u64> out;
  // Largest candidate below 2^bits that is 1 mod 2n.
  u64 candidate = upper - step + 1;
  while (out.size() < count) {
    if (candidate <= lower) {
      throw std::runtime_error("not enough NTT-friendly primes of " + std::to_string(bits) + " bits");
    }
    if (is_prime(candidate) && std::find(exclude.begin(), exclude.end(), candidate) == exclude.end()) {
      out.push_back(candidate);
    }
    candidate -= step;
  }
  return out;
}

u64 minimal_primitive_root(std::size_t two_n, const Modulus& q) {
  const u64 order = two_n;
  if ((q.value() - 1) % order != 0) throw std::invalid_argument("q is not 1 mod 2n");
  const u64 cofactor = (q.value() - 1) / order;
  for (u64 g = 2; g < q.value(); ++g) {
    const u64 root = q.pow(g, cofactor);
    // Order is exactly 2n iff root^n = -1.
    if (q.pow(root, order / 2) == q.value() - 1) {
      // Walk the cyclic group to find the smallest generator for a canonical choice.
      u64 best = root;
      const u64 sq = q.mul(root, root);
      u64 cur = root;
      for (u64 k = 1; k < order; k += 2) {
        if (cur < best) best = cur;
        cur = q.mul(cur, sq);
      }
      return best;
    }
  }
  throw std::runtime_error("no primitive root found");
}

}  // namespace hei::ckks
