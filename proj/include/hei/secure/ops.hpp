#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hei/ckks/evaluator.hpp"
#include "hei/encoding/layout.hpp"
#include "hei/errors.hpp"
#include "hei/secure/chebyshev.hpp"

namespace hei::secure {

using ckks::Ciphertext;
using ckks::Evaluator;
using ckks::GaloisKeys;
using ckks::Plaintext;
using ckks::RelinKey;

enum class ActivationKind { square, chebyshev };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::square;
  std::optional<ChebyshevPoly> poly;

  static ActivationSpec square() { return {}; }
  static ActivationSpec chebyshev(const std::string& target, double a = -8.0, double b = 8.0, int degree = 8);

  // Levels consumed: 1 for square, the polynomial degree for Horner.
  int depth() const;
  double apply_plain(double x) const;
  std::string name() const;
};

// Kernel or dense weights encoded once for a fixed ciphertext level.
struct PreparedRotateSum {
  std::vector<long> steps;
  std::vector<Plaintext> weights;
  int level = 0;
};

// Convolution as P = x * K (one plaintext product), then the sum of
// P rotated left by r * block for r = 0..taps-1.
Ciphertext encrypted_conv(const Evaluator& ev, const Ciphertext& image, const encoding::EncodedKernel& kernel,
                          const GaloisKeys& keys);
std::set<long> conv_rotation_steps(const encoding::ConvGeometry& g);

enum class DenseInput {
  zero_padded,  // x in slots [0, n), zeros in [n, 2n); copied once before the product
  replicated,   // slots [n, 2n) already repeat x
};

// Halevi-Shoup product sum_i diag_i * rot(x, i). All-zero diagonals are skipped.
PreparedRotateSum prepare_dense(const Evaluator& ev, const encoding::EncodedDense& d, int level);
Ciphertext encrypted_dense(const Evaluator& ev, const Ciphertext& x, const encoding::EncodedDense& d,
                           const GaloisKeys& keys, DenseInput input = DenseInput::zero_padded);
Ciphertext encrypted_dense(const Evaluator& ev, const Ciphertext& x, const encoding::EncodedDense& d,
                           const PreparedRotateSum& prepared, const GaloisKeys& keys,
                           DenseInput input = DenseInput::replicated);
// Steps needed by encrypted_dense (input copy included for zero-padded input).
std::set<long> dense_rotation_steps(const encoding::EncodedDense& d, std::size_t slots,
                                    DenseInput input = DenseInput::zero_padded);

Ciphertext add_bias(const Evaluator& ev, const Ciphertext& ct, std::span<const double> bias);

Ciphertext apply_activation(const Evaluator& ev, const Ciphertext& ct, const ActivationSpec& spec,
                            const RelinKey& relin, const std::string& stage = "activation");

// Runs fn, attaching `stage` to any depth error raised without one.
template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DepthError& e) {
    if (!e.stage().empty()) throw;
    throw DepthError(stage, e.what());
  }
}

}  // namespace hei::secure
