#include "hei/ckks/exact_backend.hpp"

#include <algorithm>

#include "hei/errors.hpp"

namespace hei::ckks {

namespace {

SlotBody& slots_of(Ciphertext& c) { return std::get<SlotBody>(c.body); }
const SlotBody& slots_of(const Ciphertext& c) { return std::get<SlotBody>(c.body); }

}  // namespace

KeyMaterial ExactBackend::keygen(const RotationKeyPlan& plan, std::optional<std::uint64_t> seed) const {
  Prng rng = seed ? Prng(Prng::seed_from_u64(*seed)) : Prng::from_entropy();
  KeyHeader header{context().params_hash(), kind(), rng.next_u64()};
  KeyMaterial km;
  km.secret_key.header = header;
  km.public_key.header = header;
  km.relin_key.header = header;
  km.relin_key.key.level = max_level();
  km.galois_keys.header = header;
  for (auto [step, level] : plan) {
    const std::size_t s = normalize_step(static_cast<long>(step));
    if (s == 0) continue;
    if (level < 0 || level > max_level()) throw LevelError("rotation key level out of range");
    auto& k = km.galois_keys.keys[s];
    k.level = std::max(k.level, level);
  }
  return km;
}

Plaintext ExactBackend::encode_impl(std::span<const double> values, int level, double scale, bool) const {
  Plaintext pt;
  pt.slots.assign(slot_count(), 0.0);
  std::copy(values.begin(), values.end(), pt.slots.begin());
  pt.scale = scale;
  pt.level = level;
  return pt;
}

std::vector<double> ExactBackend::decode_impl(const Plaintext& pt) const { return pt.slots; }

Ciphertext ExactBackend::encrypt_impl(const PublicKey& pk, const Plaintext& pt, Prng&) const {
  Ciphertext ct;
  ct.backend = kind();
  ct.params_hash = context().params_hash();
  ct.key_id = pk.header.key_id;
  ct.level = pt.level;
  ct.scale = pt.scale;
  ct.valid_slots = slot_count();
  ct.body = pt.slots;
  return ct;
}

Plaintext ExactBackend::decrypt_impl(const SecretKey& sk, const Ciphertext& ct) const {
  if (sk.header.key_id != ct.key_id) throw IncompatibleError("ciphertext was encrypted under a different key");
  Plaintext pt;
  pt.slots = slots_of(ct);
  pt.scale = ct.scale;
  pt.level = ct.level;
  return pt;
}

void ExactBackend::add_impl(Ciphertext& a, const Ciphertext& b) const {
  auto& x = slots_of(a);
  const auto& y = slots_of(b);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

void ExactBackend::pl_add_impl(Ciphertext& a, const Plaintext& p) const {
  auto& x = slots_of(a);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += p.slots[i];
}

void ExactBackend::mult_impl(Ciphertext& a, const Ciphertext& b, const RelinKey&) const {
  auto& x = slots_of(a);
  const auto& y = slots_of(b);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
}

void ExactBackend::pl_mult_impl(Ciphertext& a, const Plaintext& p) const {
  auto& x = slots_of(a);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= p.slots[i];
}

void ExactBackend::rescale_impl(Ciphertext&) const {}

void ExactBackend::drop_impl(Ciphertext&, int) const {}

void ExactBackend::rotate_impl(Ciphertext& a, std::size_t step, const KeySwitchKey&) const {
  auto& x = slots_of(a);
  std::rotate(x.begin(), x.begin() + static_cast<long>(step), x.end());
}

}  // namespace hei::ckks
