#include "hei/ckks/ntt.hpp"

#include <stdexcept>

namespace hei::ckks {

std::size_t reverse_bits(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

NttTables::NttTables(std::size_t n, const Modulus& q) : n_(n), q_(q) {
  if (n < 2 || (n & (n - 1)) != 0) throw std::invalid_argument("NTT size must be a power of two");
  log_n_ = __builtin_ctzll(n);
  psi_ = minimal_primitive_root(2 * n, q);
  const u64 psi_inv = q.inv(psi_);

  roots_.resize(n);
  roots_shoup_.resize(n);
  inv_roots_.resize(n);
  inv_roots_shoup_.resize(n);
  std::vector<u64> pw(n), pw_inv(n);
  pw[0] = 1;
  pw_inv[0] = 1;
  for (std::size_t i = 1; i < n; ++i) {
    pw[i] = q.mul(pw[i - 1], psi_);
    pw_inv[i] = q.mul(pw_inv[i - 1], psi_inv);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = reverse_bits(i, log_n_);
    roots_[i] = pw[r];
    roots_shoup_[i] = q.shoup(roots_[i]);
    inv_roots_[i] = pw_inv[r];
    inv_roots_shoup_[i] = q.shoup(inv_roots_[i]);
  }
  n_inv_ = q.inv(n % q.value());
  n_inv_shoup_ = q.shoup(n_inv_);
}

void NttTables::forward(std::span<u64> a) const {
  const u64 q = q_.value();
  const u64 two_q = 2 * q;
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j1 = 2 * i * t;
      const u64 w = roots_[m + i];
      const u64 ws = roots_shoup_[m + i];
      u64* x = a.data() + j1;
      u64* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        // Harvey butterfly; values stay in [0, 4q).
        u64 u = x[j];
        if (u >= two_q) u -= two_q;
        const u64 hi = static_cast<u64>((static_cast<u128>(y[j]) * ws) >> 64);
        const u64 v = y[j] * w - hi * q;  // in [0, 2q)
        x[j] = u + v;
        y[j] = u + two_q - v;
      }
    }
  }
  for (auto& v : a) {
    if (v >= two_q) v -= two_q;
    if (v >= q) v -= q;
  }
}

void NttTables::inverse(std::span<u64> a) const {
  const u64 q = q_.value();
  const u64 two_q = 2 * q;
  std::size_t t = 1;
  for (std::size_t m = n_ >> 1; m >= 1; m >>= 1) {
    std::size_t j1 = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const u64 w = inv_roots_[m + i];
      const u64 ws = inv_roots_shoup_[m + i];
      u64* x = a.data() + j1;
      u64* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        // Gentleman-Sande butterfly; inputs and outputs in [0, 2q).
        const u64 u = x[j];
        const u64 v = y[j];
        u64 s = u + v;
        if (s >= two_q) s -= two_q;
        const u64 d = u + two_q - v;
        const u64 hi = static_cast<u64>((static_cast<u128>(d) * ws) >> 64);
        x[j] = s;
        y[j] = d * w - hi * q;
      }
      j1 += 2 * t;
    }
    t <<= 1;
  }
  for (auto& v : a) {
    v = q_.mul_shoup(v, n_inv_, n_inv_shoup_);
  }
}

std::vector<u64> negacyclic_multiply_naive(std::span<const u64> a, std::span<const u64> b,
                                           const Modulus& q) {
  const std::size_t n = a.size();
  std::vector<u64> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const u64 p = q.mul(a[i], b[j]);
      const std::size_t k = i + j;
      if (k < n) {
        out[k] = q.add(out[k], p);
      } else {
        out[k - n] = q.sub(out[k - n], p);
      }
    }
  }
  return out;
}

}  // namespace hei::ckks
