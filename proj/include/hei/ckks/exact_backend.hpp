#pragma once

#include "hei/ckks/evaluator.hpp"

namespace hei::ckks {

// Cleartext slot semantics with the same level/scale bookkeeping as the
// lattice backend. Ciphertexts carry their slot vector in the clear; the
// backend exists as a fast deterministic oracle, not as encryption.
class ExactBackend final : public Backend {
 public:
  using Backend::Backend;
  using Backend::keygen;

  BackendKind kind() const override { return BackendKind::exact; }
  KeyMaterial keygen(const RotationKeyPlan& plan, std::optional<std::uint64_t> seed = std::nullopt) const override;

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
};

}  // namespace hei::ckks
