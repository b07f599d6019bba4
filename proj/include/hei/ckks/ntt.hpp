#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hei/ckks/modarith.hpp"

namespace hei::ckks {

// Negacyclic NTT over Z_q[X]/(X^n + 1).
//
// forward() maps coefficients to evaluations in bit-reversed order:
// out[i] = a(psi^(2*bitrev(i) + 1)) where psi is a primitive 2n-th root of
// unity. inverse() undoes it exactly. Both run in place.
class NttTables {
 public:
  NttTables(std::size_t n, const Modulus& q);

  std::size_t size() const { return n_; }
  const Modulus& modulus() const { return q_; }
  u64 psi() const { return psi_; }

  void forward(std::span<u64> a) const;
  void inverse(std::span<u64> a) const;

 private:
  std::size_t n_;
  int log_n_;
  Modulus q_;
  u64 psi_;
  std::vector<u64> roots_;           // psi^bitrev(i)
  std::vector<u64> roots_shoup_;
  std::vector<u64> inv_roots_;       // psi^-(bitrev(i)) in the order the GS loop consumes them
  std::vector<u64> inv_roots_shoup_;
  u64 n_inv_;
  u64 n_inv_shoup_;
};

std::size_t reverse_bits(std::size_t x, int bits);

// Schoolbook negacyclic product; O(n^2) reference used by tests.
std::vector<u64> negacyclic_multiply_naive(std::span<const u64> a, std::span<const u64> b,
                                           const Modulus& q);

}  // namespace hei::ckks
