#pragma once

#include <utility>

#include "hei/ckks/evaluator.hpp"

namespace hei::ckks {

// RNS-CKKS over Z_Q[X]/(X^R + 1). Ciphertexts are (c0, c1) in NTT form with
// c0 + c1*s = m + e. Key switching uses one digit with special primes P
// (GHS style); rotate_sum shares a single basis extension across all steps.
class LatticeBackend final : public Backend {
 public:
  using Backend::Backend;
  using Backend::keygen;

  BackendKind kind() const override { return BackendKind::lattice; }
  KeyMaterial keygen(const RotationKeyPlan& plan, std::optional<std::uint64_t> seed = std::nullopt) const override;

  // Uniform polynomial in NTT form over Q_level (and P) expanded from a seed.
  static RnsPoly expand_uniform(const Context& ctx, const Seed& seed, int level, bool with_special);

 protected:
  Plaintext encode_impl(std::span<const double> values, int level, double scale, bool keyswitch_basis) const override;
  std::vector<double> decode_impl(const Plaintext& pt) const override;
  Ciphertext encrypt_impl(const PublicKey& pk, const Plaintext& pt, Prng& rng) const override;
  Plaintext decrypt_impl(const SecretKey& sk, const Ciphertext& ct) const override;
  void add_impl(Ciphertext& a, const Ciphertext& b) const override;
  void pl_add_impl(Ciphertext& a, const Plaintext& p) const override;
  void mult_impl(Ciphertext& a, const Ciphertext& b, const RelinKey& relin) const override;
  void pl_mult_impl(Ciphertext& a, const Plaintext& p) const override;
  void rescale_impl(Ciphertext& a) const override;
  void drop_impl(Ciphertext& a, int level) const override;
  void rotate_impl(Ciphertext& a, std::size_t step, const KeySwitchKey& key) const override;
  Ciphertext rotate_sum_impl(const Ciphertext& a, std::span<const std::size_t> steps, const GaloisKeys& keys,
                             std::span<const Plaintext> weights) const override;

 private:
  KeySwitchKey make_switch_key(const RnsPoly& s, const RnsPoly& s_from, int level, Prng& rng) const;
  // (d * b, d * a) / P for d over Q_level.
  std::pair<RnsPoly, RnsPoly> key_switch(const RnsPoly& d, const KeySwitchKey& key) const;
  RnsPoly small_poly(Prng& rng, int level, bool with_special, bool ternary) const;
  // P mod q_i for each ciphertext prime.
  std::vector<u64> p_mod_q() const;
};

}  // namespace hei::ckks
