#include "hei/ckks/params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hei/errors.hpp"

namespace hei::ckks {

std::string to_string(BackendKind kind) { return kind == BackendKind::exact ? "exact" : "lattice"; }

BackendKind backend_from_string(const std::string& name) {
  if (name == "exact") return BackendKind::exact;
  if (name == "lattice") return BackendKind::lattice;
  throw ParameterError("unknown backend '" + name + "' (expected exact or lattice)");
}

double CkksParams::scale() const { return std::ldexp(1.0, scale_bits); }

int CkksParams::total_bits() const { return std::accumulate(modulus_bits.begin(), modulus_bits.end(), 0); }

void CkksParams::validate() const {
  if (ring_dim < 8 || ring_dim > 65536 || (ring_dim & (ring_dim - 1)) != 0) {
    throw ParameterError("ring_dim must be a power of two in [8, 65536], got " + std::to_string(ring_dim));
  }
  if (modulus_bits.empty()) throw ParameterError("modulus chain is empty");
  for (int b : modulus_bits) {
    if (b < 20 || b > 60) throw ParameterError("modulus bit-sizes must be in [20, 60]");
  }
  if (scale_bits < 10) throw ParameterError("scale must be at least 2^10");
  const int smallest = *std::min_element(modulus_bits.begin(), modulus_bits.end());
  if (scale_bits > smallest) {
    throw ParameterError("scale 2^" + std::to_string(scale_bits) + " exceeds the smallest modulus (" +
                         std::to_string(smallest) + " bits)");
  }
  if (modulus_bits.size() > 1 && modulus_bits[0] <= scale_bits) {
    throw ParameterError("base prime must be wider than the scale to leave decryption headroom");
  }
}

std::string CkksParams::canonical_string() const {
  std::string s = "CKKS|R=" + std::to_string(ring_dim) + "|Q=";
  for (std::size_t i = 0; i < modulus_bits.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(modulus_bits[i]);
  }
  s += "|S=" + std::to_string(scale_bits) + "|P=" + security_profile;
  return s;
}

std::uint32_t fnv1a32(std::string_view text) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : text) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

std::uint32_t CkksParams::hash() const { return fnv1a32(canonical_string()); }

CkksParams CkksParams::with_depth(std::size_t ring_dim, int depth, int scale_bits) {
  CkksParams p;
  p.ring_dim = ring_dim;
  p.scale_bits = scale_bits;
  p.modulus_bits.assign(static_cast<std::size_t>(depth) + 1, scale_bits);
  p.modulus_bits[0] = 60;
  return p;
}

CkksParams CkksParams::defaults(std::size_t ring_dim) {
  switch (ring_dim) {
    case 8192: return with_depth(8192, 6);
    case 16384: return with_depth(16384, 8);
    case 32768: return with_depth(32768, 12);
    default: break;
  }
  throw ParameterError("no default modulus chain for ring_dim " + std::to_string(ring_dim));
}

}  // namespace hei::ckks
