#include "hei/secure/ops.hpp"

#include <algorithm>

#include "hei/errors.hpp"

namespace hei::secure {

ActivationSpec ActivationSpec::chebyshev(const std::string& target, double a, double b, int degree) {
  ActivationSpec s;
  s.kind = ActivationKind::chebyshev;
  s.poly = chebyshev_fit(target, a, b, degree);
  return s;
}

int ActivationSpec::depth() const { return kind == ActivationKind::square ? 1 : poly->degree; }

double ActivationSpec::apply_plain(double x) const {
  return kind == ActivationKind::square ? x * x : poly->eval_monomial(x);
}

std::string ActivationSpec::name() const { return kind == ActivationKind::square ? "square" : poly->target; }

std::set<long> conv_rotation_steps(const encoding::ConvGeometry& g) {
  std::set<long> s;
  for (std::size_t r = 1; r < g.taps(); ++r) s.insert(static_cast<long>(r * g.block()));
  return s;
}

Ciphertext encrypted_conv(const Evaluator& ev, const Ciphertext& image, const encoding::EncodedKernel& kernel,
                          const GaloisKeys& keys) {
  return in_stage("conv", [&] {
    const auto& g = kernel.geometry;
    if (g.required_slots() > ev.slot_count()) throw CapacityError("kernel layout exceeds the slot count");
    Ciphertext p = ev.pl_mult(image, kernel.flat);
    std::vector<long> steps(g.taps());
    for (std::size_t r = 0; r < g.taps(); ++r) steps[r] = static_cast<long>(r * g.block());
    Ciphertext out = ev.rotate_sum(p, steps, keys);
    out.valid_slots = g.block();
    return out;
  });
}

PreparedRotateSum prepare_dense(const Evaluator& ev, const encoding::EncodedDense& d, int level) {
  if (2 * d.dim > ev.slot_count()) throw CapacityError("dense layer of width " + std::to_string(d.dim) +
                                                       " needs 2n <= B slots");
  PreparedRotateSum p;
  p.level = level;
  for (std::size_t i = 0; i < d.dim; ++i) {
    const auto& diag = d.diagonals[i];
    if (std::all_of(diag.begin(), diag.end(), [](double v) { return v == 0.0; })) continue;
    p.steps.push_back(static_cast<long>(i));
    p.weights.push_back(ev.encode_multiplier(diag, level, true));
  }
  return p;
}

std::set<long> dense_rotation_steps(const encoding::EncodedDense& d, std::size_t slots, DenseInput input) {
  std::set<long> s;
  for (std::size_t i = 1; i < d.dim; ++i) {
    const auto& diag = d.diagonals[i];
    if (std::any_of(diag.begin(), diag.end(), [](double v) { return v != 0.0; })) s.insert(static_cast<long>(i));
  }
  if (input == DenseInput::zero_padded) s.insert(static_cast<long>(slots - d.dim));
  return s;
}

Ciphertext encrypted_dense(const Evaluator& ev, const Ciphertext& x, const encoding::EncodedDense& d,
                           const PreparedRotateSum& prepared, const GaloisKeys& keys, DenseInput input) {
  return in_stage("dense", [&] {
    if (x.valid_slots < d.in_dim) {
      throw ShapeError("dense input carries " + std::to_string(x.valid_slots) + " valid slots, layer needs " +
                       std::to_string(d.in_dim));
    }
    Ciphertext in = x;
    if (input == DenseInput::zero_padded) in = ev.add(x, ev.rotate(x, -static_cast<long>(d.dim), keys));
    if (in.level != prepared.level) in = ev.drop_to_level(in, prepared.level);
    Ciphertext out;
    if (prepared.steps.empty()) {
      std::vector<double> zero(1, 0.0);
      out = ev.pl_mult(in, zero);
    } else {
      out = ev.rotate_sum(in, prepared.steps, keys, prepared.weights);
    }
    out.valid_slots = d.tiled ? d.dim : d.out_dim;
    return out;
  });
}

Ciphertext encrypted_dense(const Evaluator& ev, const Ciphertext& x, const encoding::EncodedDense& d,
                           const GaloisKeys& keys, DenseInput input) {
  if (x.level < 1) throw DepthError("dense", "modulus chain exhausted: dense layer at level 0");
  return encrypted_dense(ev, x, d, prepare_dense(ev, d, x.level), keys, input);
}

Ciphertext add_bias(const Evaluator& ev, const Ciphertext& ct, std::span<const double> bias) {
  if (bias.size() > ct.valid_slots) {
    throw CapacityError("bias of length " + std::to_string(bias.size()) + " exceeds " +
                        std::to_string(ct.valid_slots) + " valid slots");
  }
  Ciphertext out = ev.pl_add(ct, bias);
  out.valid_slots = ct.valid_slots;
  return out;
}

Ciphertext apply_activation(const Evaluator& ev, const Ciphertext& ct, const ActivationSpec& spec,
                            const RelinKey& relin, const std::string& stage) {
  return in_stage(stage, [&] {
    if (ct.level < spec.depth()) {
      throw DepthError(stage, "activation '" + spec.name() + "' needs " + std::to_string(spec.depth()) +
                                  " levels, ciphertext has " + std::to_string(ct.level));
    }
    if (spec.kind == ActivationKind::square) return ev.mult(ct, ct, relin);
    const auto& c = spec.poly->mono_coeffs;
    const std::size_t d = c.size() - 1;
    const std::vector<double> top(ev.slot_count(), c[d]);
    Ciphertext acc = ev.pl_mult(ct, top);
    acc = ev.pl_add(acc, std::vector<double>(ev.slot_count(), c[d - 1]));
    for (std::size_t k = 2; k <= d; ++k) {
      acc = ev.mult(acc, ct, relin);
      acc = ev.pl_add(acc, std::vector<double>(ev.slot_count(), c[d - k]));
    }
    acc.valid_slots = ct.valid_slots;
    return acc;
  });
}

}  // namespace hei::secure
