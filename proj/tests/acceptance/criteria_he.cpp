#include <random>
#include <set>

#include "common.hpp"
#include "hei/ckks/evaluator.hpp"
#include "hei/encoding/layout.hpp"
#include "hei/secure/ops.hpp"

namespace acceptance {

using namespace hei;
using ckks::BackendKind;

namespace {

std::vector<double> uniform(std::mt19937_64& g, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

encoding::Matrix uniform_matrix(std::mt19937_64& g, std::size_t r, std::size_t c) {
  encoding::Matrix m(r, c);
  m.data = uniform(g, r * c);
  return m;
}

}  // namespace

// Lattice results against the exact backend for every primitive.
Outcome criterion_1() {
  Outcome out;
  const auto params = ckks::CkksParams::defaults(8192);
  const auto lat = ckks::make_backend(BackendKind::lattice, params);
  const auto ref = ckks::make_backend(BackendKind::exact, params);
  const std::set<long> steps = {1, 7, 64, 1000, 2048, 4095};
  const auto lk = lat->keygen(steps, 101);
  const auto rk = ref->keygen(steps, 101);
  ckks::Prng lrng(ckks::Prng::seed_from_u64(1, 1));
  ckks::Prng rrng(ckks::Prng::seed_from_u64(1, 2));
  std::mt19937_64 g(2024);
  const std::size_t slots = lat->slot_count();
  const std::vector<long> step_list(steps.begin(), steps.end());

  const double add_tol = std::ldexp(1.0, -18);
  const double mul_tol = std::ldexp(1.0, -12);
  double worst_add = 0, worst_pl_add = 0, worst_rot = 0, worst_mult = 0, worst_pl_mult = 0, worst_oracle = 0;

  for (int trial = 0; trial < 100; ++trial) {
    const auto x = uniform(g, slots);
    const auto y = uniform(g, slots);
    const long step = step_list[static_cast<std::size_t>(trial) % step_list.size()];

    const auto lx = lat->encrypt(lk.public_key, x, &lrng);
    const auto ly = lat->encrypt(lk.public_key, y, &lrng);
    const auto rx = ref->encrypt(rk.public_key, x, &rrng);
    const auto ry = ref->encrypt(rk.public_key, y, &rrng);

    auto compare = [&](const ckks::Ciphertext& l, const ckks::Ciphertext& r) {
      const auto a = lat->decrypt_values(lk.secret_key, l);
      const auto b = ref->decrypt_values(rk.secret_key, r);
      return std::pair{a, b};
    };

    {
      const auto [a, b] = compare(lat->add(lx, ly), ref->add(rx, ry));
      worst_add = std::max(worst_add, max_abs_diff(a, b, slots));
      std::vector<double> direct(slots);
      for (std::size_t i = 0; i < slots; ++i) direct[i] = x[i] + y[i];
      worst_oracle = std::max(worst_oracle, max_abs_diff(b, direct, slots));
    }
    {
      const auto [a, b] = compare(lat->pl_add(lx, y), ref->pl_add(rx, y));
      worst_pl_add = std::max(worst_pl_add, max_abs_diff(a, b, slots));
    }
    {
      const auto [a, b] = compare(lat->mult(lx, ly, lk.relin_key), ref->mult(rx, ry, rk.relin_key));
      worst_mult = std::max(worst_mult, rel_err(a, b, slots));
      std::vector<double> direct(slots);
      for (std::size_t i = 0; i < slots; ++i) direct[i] = x[i] * y[i];
      worst_oracle = std::max(worst_oracle, max_abs_diff(b, direct, slots));
    }
    {
      const auto [a, b] = compare(lat->pl_mult(lx, y), ref->pl_mult(rx, y));
      worst_pl_mult = std::max(worst_pl_mult, rel_err(a, b, slots));
    }
    {
      const auto [a, b] = compare(lat->rotate(lx, step, lk.galois_keys), ref->rotate(rx, step, rk.galois_keys));
      worst_rot = std::max(worst_rot, max_abs_diff(a, b, slots));
      std::vector<double> direct(slots);
      for (std::size_t i = 0; i < slots; ++i) direct[i] = x[(i + static_cast<std::size_t>(step)) % slots];
      worst_oracle = std::max(worst_oracle, max_abs_diff(b, direct, slots));
    }
  }

  out.check(worst_add <= add_tol, fmt("Add    max abs diff %.3e <= 2^-18 (%.3e)", worst_add, add_tol));
  out.check(worst_pl_add <= add_tol, fmt("PlAdd  max abs diff %.3e <= 2^-18", worst_pl_add));
  out.check(worst_rot <= add_tol, fmt("Rot    max abs diff %.3e <= 2^-18", worst_rot));
  out.check(worst_mult <= mul_tol, fmt("Mult   max rel diff %.3e <= 2^-12 (%.3e)", worst_mult, mul_tol));
  out.check(worst_pl_mult <= mul_tol, fmt("PlMult max rel diff %.3e <= 2^-12", worst_pl_mult));
  out.check(worst_oracle <= 1e-12, fmt("exact backend vs direct arithmetic %.3e <= 1e-12", worst_oracle));
  out.note("100 vectors in [-1,1]^4096 at R=8192, rotation steps {1,7,64,1000,2048,4095}");
  return out;
}

// im2col convolution on ciphertext against direct sliding-window convolution.
Outcome criterion_2() {
  Outcome out;
  const auto params = ckks::CkksParams::defaults(8192);
  const auto lat = ckks::make_backend(BackendKind::lattice, params);
  const auto g = encoding::make_geometry(28, 28, 7, 7, 3, 3);
  const auto keys = lat->keygen(secure::conv_rotation_steps(g), 202);
  ckks::Prng rng(ckks::Prng::seed_from_u64(2, 1));
  std::mt19937_64 gen(7);
  const std::size_t slots = lat->slot_count();

  double worst = 0;
  bool counts_ok = true;
  ckks::OpCounts last{};
  for (int trial = 0; trial < 50; ++trial) {
    const auto image = uniform_matrix(gen, 28, 28);
    const auto kernel = uniform_matrix(gen, 7, 7);
    auto ct = lat->encrypt(keys.public_key, encoding::im2col(image, g, slots).flat, &rng);
    ct.valid_slots = g.required_slots();
    const auto enc_kernel = encoding::encode_kernel(kernel, g, slots);

    const auto before = lat->counters().snapshot();
    const auto res = secure::encrypted_conv(*lat, ct, enc_kernel, keys.galois_keys);
    last = lat->counters().snapshot() - before;
    counts_ok = counts_ok && last.pl_mult == 1 && last.rotate == 48 && last.add == 48 && last.mult == 0 &&
                last.pl_add == 0;

    const auto got = lat->decrypt_values(keys.secret_key, res);
    const auto want = model::conv2d(image, kernel, g);
    worst = std::max(worst, rel_err(got, want, g.block()));
  }
  out.check(worst <= 1e-3, fmt("first 64 slots max rel error %.3e <= 1e-3 over 50 trials", worst));
  out.check(counts_ok, fmt("ops per channel: %llu PlMult, %llu rotations, %llu additions (want 1/48/48)",
                           static_cast<unsigned long long>(last.pl_mult), static_cast<unsigned long long>(last.rotate),
                           static_cast<unsigned long long>(last.add)));
  return out;
}

// Halevi-Shoup matvec on ciphertext against the plaintext product.
Outcome criterion_3() {
  Outcome out;
  const auto params = ckks::CkksParams::defaults(8192);
  const auto lat = ckks::make_backend(BackendKind::lattice, params);
  const std::size_t slots = lat->slot_count();
  std::mt19937_64 gen(11);

  struct Shape {
    std::size_t out, in;
  };
  for (const Shape s : {Shape{64, 256}, Shape{11, 64}}) {
    std::set<long> steps;
    {
      const auto probe = encoding::diagonal_encode(encoding::Matrix(s.out, s.in, 1.0));
      steps = secure::dense_rotation_steps(probe, slots);
    }
    const auto keys = lat->keygen(steps, 303 + s.out);
    ckks::Prng rng(ckks::Prng::seed_from_u64(3, s.out));
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = uniform_matrix(gen, s.out, s.in);
      const auto x = uniform(gen, s.in);
      const auto d = encoding::diagonal_encode(m);
      std::vector<double> padded(slots, 0.0);
      std::copy(x.begin(), x.end(), padded.begin());
      auto ct = lat->encrypt(keys.public_key, padded, &rng);
      ct.valid_slots = s.in;
      const auto res = secure::encrypted_dense(*lat, ct, d, keys.galois_keys, secure::DenseInput::zero_padded);
      const auto got = lat->decrypt_values(keys.secret_key, res);
      const auto want = encoding::matvec(m, x);
      worst = std::max(worst, rel_err(got, want, s.out));
    }
    out.check(worst <= 1e-3, fmt("%zux%zu (padded to %zux%zu): max rel error %.3e <= 1e-3 over 50 trials", s.out,
                                 s.in, s.in, s.in, worst));
  }
  return out;
}

}  // namespace acceptance
