#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "hei/ckks/context.hpp"
#include "hei/ckks/params.hpp"
#include "hei/ckks/prng.hpp"

namespace hei::ckks {

// Slot vector plus encoding metadata. Always exactly slot_count() entries.
// The lattice backend also keeps the encoded ring element (NTT form over
// q_0..q_level, optionally extended by the special primes).
struct Plaintext {
  std::vector<double> slots;
  double scale = 1.0;
  int level = 0;
  std::optional<RnsPoly> poly;
};

using SlotBody = std::vector<double>;
using RingBody = std::array<RnsPoly, 2>;

struct Ciphertext {
  BackendKind backend = BackendKind::exact;
  std::uint32_t params_hash = 0;
  std::uint64_t key_id = 0;
  int level = 0;
  double scale = 1.0;
  // Prefix of slots carrying meaningful data. Metadata only; not secret.
  std::size_t valid_slots = 0;
  std::variant<SlotBody, RingBody> body;
};

// Switching data from some s' to s over Q_level * P. The `a` half is
// expanded from `seed`; only `b` travels on the wire.
struct KeySwitchKey {
  int level = 0;
  Seed seed{};
  RnsPoly b;
  RnsPoly a;
};

struct KeyHeader {
  std::uint32_t params_hash = 0;
  BackendKind backend = BackendKind::exact;
  std::uint64_t key_id = 0;
};

struct SecretKey {
  KeyHeader header;
  RnsPoly s;  // NTT form over Q_L * P; empty on the exact backend
};

struct PublicKey {
  KeyHeader header;
  Seed seed{};
  RnsPoly b;
  RnsPoly a;
};

struct RelinKey {
  KeyHeader header;
  KeySwitchKey key;
};

// Rotation keys indexed by left-rotation step, normalised into [1, B).
struct GaloisKeys {
  KeyHeader header;
  std::map<std::size_t, KeySwitchKey> keys;

  bool contains(std::size_t step) const { return keys.contains(step); }
};

// Everything a server may hold: no secret key.
struct EvaluationKeys {
  PublicKey public_key;
  RelinKey relin_key;
  GaloisKeys galois_keys;
};

struct KeyMaterial {
  SecretKey secret_key;
  PublicKey public_key;
  RelinKey relin_key;
  GaloisKeys galois_keys;

  EvaluationKeys evaluation_keys() const { return {public_key, relin_key, galois_keys}; }
};

// Rotation step -> highest level the key must serve.
using RotationKeyPlan = std::map<std::size_t, int>;

}  // namespace hei::ckks
