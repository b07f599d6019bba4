#include "hei/ckks/lattice_backend.hpp"

#include <cmath>

#include "hei/errors.hpp"

namespace hei::ckks {

namespace {

RingBody& ring_of(Ciphertext& c) { return std::get<RingBody>(c.body); }
const RingBody& ring_of(const Ciphertext& c) { return std::get<RingBody>(c.body); }

// Index of the limb serving position i of a Q_level+P computation inside a
// polynomial whose ciphertext part may be longer.
std::size_t qp_index(const RnsPoly& a, std::size_t i, std::size_t nq) {
  return i < nq ? i : a.num_q + (i - nq);
}

}  // namespace

RnsPoly LatticeBackend::expand_uniform(const Context& ctx, const Seed& seed, int level, bool with_special) {
  Prng rng(seed);
  RnsPoly out = ctx.zero(level, with_special);
  for (std::size_t i = 0; i < out.limbs(); ++i) {
    const auto& m = ctx.limb_modulus(i, out.num_q);
    for (auto& v : out.limb(i)) v = rng.uniform_mod(m);
  }
  return out;
}

RnsPoly LatticeBackend::small_poly(Prng& rng, int level, bool with_special, bool ternary) const {
  std::vector<std::int64_t> c(context().n());
  for (auto& v : c) v = ternary ? rng.ternary() : rng.centered_binomial();
  return context().from_signed(c, level, with_special);
}

std::vector<u64> LatticeBackend::p_mod_q() const {
  std::vector<u64> out;
  for (const auto& qi : context().q()) {
    u64 r = 1;
    for (const auto& pj : context().p()) r = qi.mul(r, qi.reduce(pj.value()));
    out.push_back(r);
  }
  return out;
}

KeySwitchKey LatticeBackend::make_switch_key(const RnsPoly& s, const RnsPoly& s_from, int level, Prng& rng) const {
  const Context& ctx = context();
  KeySwitchKey k;
  k.level = level;
  k.seed = rng.derive_seed();
  k.a = expand_uniform(ctx, k.seed, level, true);
  k.b = small_poly(rng, level, true, false);
  const std::size_t nq = static_cast<std::size_t>(level) + 1;
  const auto pq = p_mod_q();
  for (std::size_t i = 0; i < k.b.limbs(); ++i) {
    const auto& m = ctx.limb_modulus(i, nq);
    const std::size_t si = qp_index(s, i, nq);
    auto b = k.b.limb(i);
    auto a = k.a.limb(i);
    auto sv = s.limb(si);
    auto fv = s_from.limb(si);
    for (std::size_t c = 0; c < b.size(); ++c) {
      u64 v = m.sub(b[c], m.mul(a[c], sv[c]));
      if (i < nq) v = m.add(v, m.mul(pq[i], fv[c]));
      b[c] = v;
    }
  }
  return k;
}

KeyMaterial LatticeBackend::keygen(const RotationKeyPlan& plan, std::optional<std::uint64_t> seed) const {
  const Context& ctx = context();
  Prng rng = seed ? Prng(Prng::seed_from_u64(*seed)) : Prng::from_entropy();
  const int top = max_level();
  KeyHeader header{ctx.params_hash(), kind(), rng.next_u64()};

  KeyMaterial km;
  km.secret_key.header = header;
  km.secret_key.s = small_poly(rng, top, true, true);
  const RnsPoly& s = km.secret_key.s;

  km.public_key.header = header;
  km.public_key.seed = rng.derive_seed();
  km.public_key.a = expand_uniform(ctx, km.public_key.seed, top, false);
  km.public_key.b = small_poly(rng, top, false, false);
  {
    RnsPoly as = km.public_key.a;
    ctx.mul_inplace(as, ctx.restrict(s, top, false));
    ctx.sub_inplace(km.public_key.b, as);
  }

  km.relin_key.header = header;
  RnsPoly s2 = s;
  ctx.mul_inplace(s2, s);
  km.relin_key.key = make_switch_key(s, s2, top, rng);

  km.galois_keys.header = header;
  RnsPoly rotated = ctx.zero(top, true);
  for (auto [step, level] : plan) {
    const std::size_t st = normalize_step(static_cast<long>(step));
    if (st == 0) continue;
    if (level < 0 || level > top) throw LevelError("rotation key level out of range");
    const u64 g = ctx.galois_element(st);
    for (std::size_t i = 0; i < s.limbs(); ++i) ctx.apply_galois_ntt(s.limb(i), rotated.limb(i), g);
    km.galois_keys.keys[st] = make_switch_key(s, rotated, level, rng);
  }
  return km;
}

Plaintext LatticeBackend::encode_impl(std::span<const double> values, int level, double scale,
                                      bool keyswitch_basis) const {
  const Context& ctx = context();
  const auto coeffs = ctx.embed(values, scale);
  RnsPoly poly = ctx.zero(level, keyswitch_basis);
  bool small = true;
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw CapacityError("encoded value is not finite");
    if (std::abs(c) >= 0x1.0p62) small = false;
  }
  if (small) {
    std::vector<std::int64_t> rounded(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) rounded[i] = std::llround(coeffs[i]);
    poly = ctx.from_signed(rounded, level, keyswitch_basis);
  } else {
    for (std::size_t i = 0; i < poly.limbs(); ++i) {
      const auto& m = ctx.limb_modulus(i, poly.num_q);
      const double q = static_cast<double>(m.value());
      auto dst = poly.limb(i);
      for (std::size_t k = 0; k < coeffs.size(); ++k) {
        double r = std::fmod(std::round(coeffs[k]), q);
        if (r < 0) r += q;
        dst[k] = m.reduce(static_cast<u64>(r));
      }
    }
    ctx.ntt(poly);
  }
  Plaintext pt;
  pt.slots.assign(slot_count(), 0.0);
  std::copy(values.begin(), values.end(), pt.slots.begin());
  pt.scale = scale;
  pt.level = level;
  pt.poly = std::move(poly);
  return pt;
}

std::vector<double> LatticeBackend::decode_impl(const Plaintext& pt) const {
  if (!pt.poly) return pt.slots;
  const Context& ctx = context();
  std::vector<u64> limb0(pt.poly->limb(0).begin(), pt.poly->limb(0).end());
  ctx.limb_ntt(0, pt.poly->num_q).inverse(limb0);
  const auto& q0 = ctx.q()[0];
  std::vector<double> coeffs(limb0.size());
  for (std::size_t i = 0; i < limb0.size(); ++i) coeffs[i] = static_cast<double>(q0.to_centered(limb0[i]));
  return ctx.unembed(coeffs, pt.scale);
}

Ciphertext LatticeBackend::encrypt_impl(const PublicKey& pk, const Plaintext& pt, Prng& rng) const {
  const Context& ctx = context();
  if (!pt.poly) throw FormatError("plaintext carries no encoded polynomial");
  const int l = pt.level;
  RnsPoly u = small_poly(rng, l, false, true);
  RnsPoly c0 = ctx.restrict(pk.b, l, false);
  RnsPoly c1 = ctx.restrict(pk.a, l, false);
  ctx.mul_inplace(c0, u);
  ctx.mul_inplace(c1, u);
  ctx.add_inplace(c0, small_poly(rng, l, false, false));
  ctx.add_inplace(c1, small_poly(rng, l, false, false));
  ctx.add_inplace(c0, ctx.restrict(*pt.poly, l, false));

  Ciphertext ct;
  ct.backend = kind();
  ct.params_hash = ctx.params_hash();
  ct.key_id = pk.header.key_id;
  ct.level = l;
  ct.scale = pt.scale;
  ct.valid_slots = slot_count();
  ct.body = RingBody{std::move(c0), std::move(c1)};
  return ct;
}

Plaintext LatticeBackend::decrypt_impl(const SecretKey& sk, const Ciphertext& ct) const {
  const Context& ctx = context();
  const auto& body = ring_of(ct);
  RnsPoly m = body[1];
  ctx.mul_inplace(m, ctx.restrict(sk.s, ct.level, false));
  ctx.add_inplace(m, body[0]);
  Plaintext pt;
  pt.scale = ct.scale;
  pt.level = ct.level;
  pt.poly = std::move(m);
  pt.slots = decode_impl(pt);
  return pt;
}

void LatticeBackend::add_impl(Ciphertext& a, const Ciphertext& b) const {
  auto& x = ring_of(a);
  const auto& y = ring_of(b);
  context().add_inplace(x[0], y[0]);
  context().add_inplace(x[1], y[1]);
}

void LatticeBackend::pl_add_impl(Ciphertext& a, const Plaintext& p) const {
  if (!p.poly) throw FormatError("plaintext carries no encoded polynomial");
  auto& x = ring_of(a);
  context().add_inplace(x[0], *p.poly);
}

void LatticeBackend::pl_mult_impl(Ciphertext& a, const Plaintext& p) const {
  if (!p.poly) throw FormatError("plaintext carries no encoded polynomial");
  auto& x = ring_of(a);
  context().mul_inplace(x[0], *p.poly);
  context().mul_inplace(x[1], *p.poly);
}

std::pair<RnsPoly, RnsPoly> LatticeBackend::key_switch(const RnsPoly& d, const KeySwitchKey& key) const {
  const Context& ctx = context();
  const RnsPoly up = ctx.mod_up(d);
  const std::size_t nq = d.num_q;
  RnsPoly k0(up.n, nq, up.num_p);
  RnsPoly k1(up.n, nq, up.num_p);
  for (std::size_t i = 0; i < up.limbs(); ++i) {
    const auto& m = ctx.limb_modulus(i, nq);
    const std::size_t ki = qp_index(key.b, i, nq);
    auto src = up.limb(i);
    auto b = key.b.limb(ki);
    auto a = key.a.limb(ki);
    auto o0 = k0.limb(i);
    auto o1 = k1.limb(i);
    for (std::size_t c = 0; c < src.size(); ++c) {
      o0[c] = m.mul(src[c], b[c]);
      o1[c] = m.mul(src[c], a[c]);
    }
  }
  return {ctx.mod_down(k0), ctx.mod_down(k1)};
}

void LatticeBackend::mult_impl(Ciphertext& a, const Ciphertext& b, const RelinKey& relin) const {
  const Context& ctx = context();
  if (relin.key.level < a.level) throw KeyError("relinearization key does not cover this level");
  auto& x = ring_of(a);
  const auto& y = ring_of(b);
  RnsPoly d2 = x[1];
  ctx.mul_inplace(d2, y[1]);
  RnsPoly d1 = x[0];
  ctx.mul_inplace(d1, y[1]);
  RnsPoly t = x[1];
  ctx.mul_inplace(t, y[0]);
  ctx.add_inplace(d1, t);
  ctx.mul_inplace(x[0], y[0]);
  auto [k0, k1] = key_switch(d2, relin.key);
  ctx.add_inplace(x[0], k0);
  ctx.add_inplace(d1, k1);
  x[1] = std::move(d1);
}

void LatticeBackend::rescale_impl(Ciphertext& a) const {
  auto& x = ring_of(a);
  x[0] = context().rescale(x[0]);
  x[1] = context().rescale(x[1]);
}

void LatticeBackend::drop_impl(Ciphertext& a, int level) const {
  auto& x = ring_of(a);
  x[0] = context().restrict(x[0], level, false);
  x[1] = context().restrict(x[1], level, false);
}

void LatticeBackend::rotate_impl(Ciphertext& a, std::size_t step, const KeySwitchKey& key) const {
  const Context& ctx = context();
  auto& x = ring_of(a);
  const u64 g = ctx.galois_element(step);
  RnsPoly r0(x[0].n, x[0].num_q, 0);
  RnsPoly r1(x[1].n, x[1].num_q, 0);
  for (std::size_t i = 0; i < r0.limbs(); ++i) {
    ctx.apply_galois_ntt(x[0].limb(i), r0.limb(i), g);
    ctx.apply_galois_ntt(x[1].limb(i), r1.limb(i), g);
  }
  auto [k0, k1] = key_switch(r1, key);
  ctx.add_inplace(r0, k0);
  x[0] = std::move(r0);
  x[1] = std::move(k1);
}

Ciphertext LatticeBackend::rotate_sum_impl(const Ciphertext& a, std::span<const std::size_t> steps,
                                           const GaloisKeys& keys, std::span<const Plaintext> weights) const {
  const Context& ctx = context();
  const auto& x = ring_of(a);
  const std::size_t nq = x[0].num_q;
  const std::size_t np = ctx.num_special();
  const std::size_t n = x[0].n;
  const RnsPoly up = ctx.mod_up(x[1]);
  const auto pq = p_mod_q();

  // Weights over Q_level * P. Limbs for the special primes are derived from
  // limb 0 when the plaintext was encoded without them.
  std::vector<RnsPoly> w;
  w.reserve(weights.size());
  for (const auto& pt : weights) {
    if (!pt.poly) throw FormatError("plaintext carries no encoded polynomial");
    const RnsPoly& p = *pt.poly;
    RnsPoly ext(n, nq, np);
    std::copy_n(p.data.begin(), nq * n, ext.data.begin());
    if (p.num_p == np) {
      std::copy_n(p.data.begin() + static_cast<long>(p.num_q * n), np * n,
                  ext.data.begin() + static_cast<long>(nq * n));
    } else {
      std::vector<u64> c0(p.limb(0).begin(), p.limb(0).end());
      ctx.limb_ntt(0, p.num_q).inverse(c0);
      const auto& q0 = ctx.q()[0];
      for (std::size_t j = 0; j < np; ++j) {
        const auto& pj = ctx.p()[j];
        auto dst = ext.limb(nq + j);
        for (std::size_t c = 0; c < n; ++c) dst[c] = pj.from_signed(q0.to_centered(c0[c]));
        ctx.limb_ntt(nq + j, nq).forward(dst);
      }
    }
    w.push_back(std::move(ext));
  }

  RnsPoly acc0(n, nq, np);
  RnsPoly acc1(n, nq, np);
  std::vector<u64> t0(n);
  std::vector<u64> t1(n);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const bool identity = steps[s] == 0;
    const KeySwitchKey* key = identity ? nullptr : &galois_key(keys, steps[s], a.level);
    const std::vector<std::uint32_t>* map =
        identity ? nullptr : &ctx.galois_permutation(ctx.galois_element(steps[s]));
    for (std::size_t i = 0; i < nq + np; ++i) {
      const auto& m = ctx.limb_modulus(i, nq);
      const bool is_q = i < nq;
      if (identity) {
        if (is_q) {
          auto c0 = x[0].limb(i);
          auto c1 = x[1].limb(i);
          for (std::size_t c = 0; c < n; ++c) {
            t0[c] = m.mul(pq[i], c0[c]);
            t1[c] = m.mul(pq[i], c1[c]);
          }
        } else {
          std::fill(t0.begin(), t0.end(), 0);
          std::fill(t1.begin(), t1.end(), 0);
        }
      } else {
        const std::size_t ki = qp_index(key->b, i, nq);
        auto kb = key->b.limb(ki);
        auto ka = key->a.limb(ki);
        auto d = up.limb(i);
        const auto& perm = *map;
        for (std::size_t c = 0; c < n; ++c) {
          const u64 dv = d[perm[c]];
          t0[c] = m.mul(dv, kb[c]);
          t1[c] = m.mul(dv, ka[c]);
        }
        if (is_q) {
          auto c0 = x[0].limb(i);
          for (std::size_t c = 0; c < n; ++c) t0[c] = m.add(t0[c], m.mul(pq[i], c0[perm[c]]));
        }
      }
      auto o0 = acc0.limb(i);
      auto o1 = acc1.limb(i);
      if (w.empty()) {
        for (std::size_t c = 0; c < n; ++c) {
          o0[c] = m.add(o0[c], t0[c]);
          o1[c] = m.add(o1[c], t1[c]);
        }
      } else {
        auto wv = w[s].limb(i);
        for (std::size_t c = 0; c < n; ++c) {
          o0[c] = m.add(o0[c], m.mul(t0[c], wv[c]));
          o1[c] = m.add(o1[c], m.mul(t1[c], wv[c]));
        }
      }
    }
  }

  Ciphertext out = a;
  out.body = RingBody{ctx.mod_down(acc0), ctx.mod_down(acc1)};
  return out;
}

}  // namespace hei::ckks
