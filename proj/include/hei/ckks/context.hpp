#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "hei/ckks/modarith.hpp"
#include "hei/ckks/ntt.hpp"
#include "hei/ckks/params.hpp"

namespace hei::ckks {

// Residue-number-system polynomial. Limbs 0..num_q-1 live modulo the
// ciphertext primes q_0.., limbs num_q.. modulo the special primes p_0...
struct RnsPoly {
  std::size_t n = 0;
  std::size_t num_q = 0;
  std::size_t num_p = 0;
  std::vector<u64> data;

  RnsPoly() = default;
  RnsPoly(std::size_t n_, std::size_t nq, std::size_t np) : n(n_), num_q(nq), num_p(np), data(n_ * (nq + np), 0) {}

  std::size_t limbs() const { return num_q + num_p; }
  std::span<u64> limb(std::size_t i) { return {data.data() + i * n, n}; }
  std::span<const u64> limb(std::size_t i) const { return {data.data() + i * n, n}; }
  bool empty() const { return data.empty(); }

  bool operator==(const RnsPoly&) const = default;
};

// Immutable per-parameter-set precomputation: primes, NTT tables, basis
// conversion constants and the canonical-embedding FFT tables. Shared by
// every backend object built for the same parameters.
class Context {
 public:
  explicit Context(CkksParams params);
  static std::shared_ptr<const Context> create(const CkksParams& params);

  const CkksParams& params() const { return params_; }
  std::uint32_t params_hash() const { return hash_; }
  std::size_t n() const { return params_.ring_dim; }
  std::size_t slots() const { return params_.ring_dim / 2; }
  int max_level() const { return params_.max_level(); }

  const std::vector<Modulus>& q() const { return q_; }
  const std::vector<Modulus>& p() const { return p_; }
  std::size_t num_special() const { return p_.size(); }
  double q_value(int level) const { return static_cast<double>(q_[static_cast<std::size_t>(level)].value()); }

  const Modulus& limb_modulus(std::size_t limb, std::size_t num_q) const {
    return limb < num_q ? q_[limb] : p_[limb - num_q];
  }
  const NttTables& limb_ntt(std::size_t limb, std::size_t num_q) const {
    return limb < num_q ? ntt_q_[limb] : ntt_p_[limb - num_q];
  }

  // --- polynomial helpers (all NTT-domain unless stated) ---
  RnsPoly zero(int level, bool with_special = false) const;
  void ntt(RnsPoly& a) const;
  void intt(RnsPoly& a) const;
  void add_inplace(RnsPoly& a, const RnsPoly& b) const;
  void sub_inplace(RnsPoly& a, const RnsPoly& b) const;
  void mul_inplace(RnsPoly& a, const RnsPoly& b) const;
  void negate_inplace(RnsPoly& a) const;
  // Keeps limbs for q_0..q_level and, if present and keep_special, the special limbs.
  RnsPoly restrict(const RnsPoly& a, int level, bool keep_special) const;
  // Signed small coefficients (coefficient domain) to an RNS poly in NTT form.
  RnsPoly from_signed(std::span<const std::int64_t> coeffs, int level, bool with_special) const;

  // Exact division by q_level with rounding, dropping the top limb. NTT in, NTT out.
  RnsPoly rescale(const RnsPoly& a) const;
  // Lifts a Q_level polynomial (NTT form) to Q_level * P: approximate basis extension.
  RnsPoly mod_up(const RnsPoly& a) const;
  // Divides a Q_level * P polynomial by P with rounding, returning Q_level limbs.
  RnsPoly mod_down(const RnsPoly& a) const;

  // --- slots <-> coefficients (canonical embedding) ---
  // values.size() <= slots(); returns n real coefficients scaled by `scale`.
  std::vector<double> embed(std::span<const double> values, double scale) const;
  // Inverse of embed on real parts.
  std::vector<double> unembed(std::span<const double> coeffs, double scale) const;

  // --- automorphisms ---
  // Galois element 5^step mod 2n for a left rotation by `step` slots.
  u64 galois_element(std::size_t step) const;
  // Index map for applying X -> X^g in the NTT domain: out[i] = in[map[i]].
  const std::vector<std::uint32_t>& galois_permutation(u64 galois_elt) const;
  void apply_galois_ntt(std::span<const u64> in, std::span<u64> out, u64 galois_elt) const;
  // Coefficient-domain automorphism on signed coefficients.
  std::vector<std::int64_t> apply_galois_coeffs(std::span<const std::int64_t> in, u64 galois_elt) const;

 private:
  void special_fft(std::vector<std::complex<double>>& vals) const;
  void special_fft_inverse(std::vector<std::complex<double>>& vals) const;

  CkksParams params_;
  std::uint32_t hash_;
  std::vector<Modulus> q_;
  std::vector<Modulus> p_;
  std::vector<NttTables> ntt_q_;
  std::vector<NttTables> ntt_p_;

  // rescale: inverse of q_l modulo q_i (i < l), indexed [l][i]
  std::vector<std::vector<u64>> q_inv_mod_q_;
  // mod_up at level l: (Q_l/q_i)^-1 mod q_i, (Q_l/q_i) mod p_j, Q_l mod p_j
  std::vector<std::vector<u64>> qhat_inv_;
  std::vector<std::vector<std::vector<u64>>> qhat_mod_p_;
  std::vector<std::vector<u64>> q_mod_p_;
  // mod_down: (P/p_j)^-1 mod p_j, (P/p_j) mod q_i, P mod q_i, P^-1 mod q_i
  std::vector<u64> phat_inv_;
  std::vector<std::vector<u64>> phat_mod_q_;
  std::vector<u64> p_mod_q_;
  std::vector<u64> p_inv_mod_q_;

  std::vector<std::size_t> rot_group_;
  std::vector<std::complex<double>> ksi_pows_;

  mutable std::mutex galois_mutex_;
  mutable std::map<u64, std::unique_ptr<std::vector<std::uint32_t>>> galois_cache_;
};

}  // namespace hei::ckks
