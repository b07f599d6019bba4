#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace hei::ckks {

enum class BackendKind : std::uint8_t { exact = 0, lattice = 1 };

std::string to_string(BackendKind kind);
BackendKind backend_from_string(const std::string& name);

// Scheme parameters. modulus_bits lists the ciphertext primes by level:
// entry 0 is the base prime kept for decryption, entry L the first one
// dropped by rescaling. Special primes for key switching are derived.
struct CkksParams {
  std::size_t ring_dim = 8192;
  std::vector<int> modulus_bits;
  int scale_bits = 40;
  std::string security_profile = "256-bit";

  std::size_t slot_count() const { return ring_dim / 2; }
  int max_level() const { return static_cast<int>(modulus_bits.size()) - 1; }
  // Multiplicative depth the chain supports.
  int depth() const { return max_level(); }
  double scale() const;
  int total_bits() const;

  void validate() const;
  std::string canonical_string() const;
  std::uint32_t hash() const;

  bool operator==(const CkksParams&) const = default;

  // 60-bit base prime, `depth` primes of scale_bits bits.
  static CkksParams with_depth(std::size_t ring_dim, int depth, int scale_bits = 40);
  // Default chains: R=8192 -> depth 6, R=16384 -> 8, R=32768 -> 12.
  static CkksParams defaults(std::size_t ring_dim);
};

std::uint32_t fnv1a32(std::string_view text);

}  // namespace hei::ckks
