#include "hei/ckks/context.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "hei/errors.hpp"

namespace hei::ckks {

namespace {

constexpr int kSpecialPrimeBits = 60;

u64 prod_mod(const std::vector<Modulus>& factors, std::size_t skip, const Modulus& m) {
  u64 r = 1 % m.value();
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i == skip) continue;
    r = m.mul(r, m.reduce(factors[i].value()));
  }
  return r;
}

}  // namespace

Context::Context(CkksParams params) : params_(std::move(params)) {
  params_.validate();
  hash_ = params_.hash();
  const std::size_t n = params_.ring_dim;

  // Ciphertext primes, grouped by bit-size so equal sizes get distinct primes.
  std::map<int, std::size_t> wanted;
  for (int b : params_.modulus_bits) ++wanted[b];
  const std::size_t num_special =
      static_cast<std::size_t>((params_.total_bits() + kSpecialPrimeBits - 1) / kSpecialPrimeBits);
  wanted[kSpecialPrimeBits] += num_special;
  std::map<int, std::vector<u64>> pool;
  std::vector<u64> taken;
  for (auto [bits, count] : wanted) {
    pool[bits] = find_ntt_primes(bits, n, count, taken);
    taken.insert(taken.end(), pool[bits].begin(), pool[bits].end());
  }
  std::map<int, std::size_t> cursor;
  for (int b : params_.modulus_bits) q_.emplace_back(pool[b][cursor[b]++]);
  for (std::size_t j = 0; j < num_special; ++j) p_.emplace_back(pool[kSpecialPrimeBits][cursor[kSpecialPrimeBits]++]);

  for (const auto& m : q_) ntt_q_.emplace_back(n, m);
  for (const auto& m : p_) ntt_p_.emplace_back(n, m);

  const std::size_t L = q_.size();
  q_inv_mod_q_.resize(L);
  qhat_inv_.resize(L);
  qhat_mod_p_.resize(L);
  q_mod_p_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t i = 0; i < l; ++i) q_inv_mod_q_[l].push_back(q_[i].inv(q_[i].reduce(q_[l].value())));
    std::vector<Modulus> sub(q_.begin(), q_.begin() + static_cast<long>(l) + 1);
    qhat_mod_p_[l].resize(l + 1);
    for (std::size_t i = 0; i <= l; ++i) {
      qhat_inv_[l].push_back(q_[i].inv(prod_mod(sub, i, q_[i])));
      for (const auto& pj : p_) qhat_mod_p_[l][i].push_back(prod_mod(sub, i, pj));
    }
    for (const auto& pj : p_) q_mod_p_[l].push_back(prod_mod(sub, sub.size(), pj));
  }
  phat_mod_q_.resize(p_.size());
  for (std::size_t j = 0; j < p_.size(); ++j) {
    phat_inv_.push_back(p_[j].inv(prod_mod(p_, j, p_[j])));
    for (const auto& qi : q_) phat_mod_q_[j].push_back(prod_mod(p_, j, qi));
  }
  for (const auto& qi : q_) {
    p_mod_q_.push_back(prod_mod(p_, p_.size(), qi));
    p_inv_mod_q_.push_back(qi.inv(p_mod_q_.back()));
  }

  // Canonical-embedding tables: slot j sits at the root zeta^(5^j).
  const std::size_t m = 2 * n;
  rot_group_.resize(n / 2);
  std::size_t five_pow = 1;
  for (std::size_t j = 0; j < n / 2; ++j) {
    rot_group_[j] = five_pow;
    five_pow = (five_pow * 5) % m;
  }
  ksi_pows_.resize(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
    ksi_pows_[j] = {std::cos(angle), std::sin(angle)};
  }
}

std::shared_ptr<const Context> Context::create(const CkksParams& params) {
  return std::make_shared<const Context>(params);
}

RnsPoly Context::zero(int level, bool with_special) const {
  return RnsPoly(n(), static_cast<std::size_t>(level) + 1, with_special ? p_.size() : 0);
}

void Context::ntt(RnsPoly& a) const {
  for (std::size_t i = 0; i < a.limbs(); ++i) limb_ntt(i, a.num_q).forward(a.limb(i));
}

void Context::intt(RnsPoly& a) const {
  for (std::size_t i = 0; i < a.limbs(); ++i) limb_ntt(i, a.num_q).inverse(a.limb(i));
}

void Context::add_inplace(RnsPoly& a, const RnsPoly& b) const {
  for (std::size_t i = 0; i < a.limbs(); ++i) {
    const auto& m = limb_modulus(i, a.num_q);
    auto x = a.limb(i);
    auto y = b.limb(i);
    for (std::size_t k = 0; k < a.n; ++k) x[k] = m.add(x[k], y[k]);
  }
}

void Context::sub_inplace(RnsPoly& a, const RnsPoly& b) const {
  for (std::size_t i = 0; i < a.limbs(); ++i) {
    const auto& m = limb_modulus(i, a.num_q);
    auto x = a.limb(i);
    auto y = b.limb(i);
    for (std::size_t k = 0; k < a.n; ++k) x[k] = m.sub(x[k], y[k]);
  }
}

void Context::mul_inplace(RnsPoly& a, const RnsPoly& b) const {
  for (std::size_t i = 0; i < a.limbs(); ++i) {
    const auto& m = limb_modulus(i, a.num_q);
    auto x = a.limb(i);
    auto y = b.limb(i);
    for (std::size_t k = 0; k < a.n; ++k) x[k] = m.mul(x[k], y[k]);
  }
}

void Context::negate_inplace(RnsPoly& a) const {
  for (std::size_t i = 0; i < a.limbs(); ++i) {
    const auto& m = limb_modulus(i, a.num_q);
    for (auto& v : a.limb(i)) v = m.neg(v);
  }
}

RnsPoly Context::restrict(const RnsPoly& a, int level, bool keep_special) const {
  const std::size_t nq = static_cast<std::size_t>(level) + 1;
  if (nq > a.num_q) throw LevelError("cannot raise a polynomial's level");
  const std::size_t np = keep_special ? a.num_p : 0;
  RnsPoly out(a.n, nq, np);
  std::copy_n(a.data.begin(), nq * a.n, out.data.begin());
  if (np) {
    std::copy_n(a.data.begin() + static_cast<long>(a.num_q * a.n), np * a.n,
                out.data.begin() + static_cast<long>(nq * a.n));
  }
  return out;
}

RnsPoly Context::from_signed(std::span<const std::int64_t> coeffs, int level, bool with_special) const {
  RnsPoly out = zero(level, with_special);
  for (std::size_t i = 0; i < out.limbs(); ++i) {
    const auto& m = limb_modulus(i, out.num_q);
    auto dst = out.limb(i);
    for (std::size_t k = 0; k < out.n; ++k) dst[k] = m.from_signed(coeffs[k]);
  }
  ntt(out);
  return out;
}

RnsPoly Context::rescale(const RnsPoly& a) const {
  if (a.num_p != 0) throw LevelError("rescale expects a ciphertext-basis polynomial");
  if (a.num_q < 2) throw LevelError("no prime left to rescale by");
  const std::size_t top = a.num_q - 1;
  const Modulus& qt = q_[top];
  std::vector<u64> last(a.limb(top).begin(), a.limb(top).end());
  ntt_q_[top].inverse(last);
  const u64 half = qt.value() >> 1;

  RnsPoly out(a.n, top, 0);
  std::vector<u64> tmp(a.n);
  for (std::size_t i = 0; i < top; ++i) {
    const Modulus& qi = q_[i];
    const u64 qt_mod = qi.reduce(qt.value());
    for (std::size_t k = 0; k < a.n; ++k) {
      const u64 v = last[k];
      tmp[k] = v > half ? qi.sub(qi.reduce(v), qt_mod) : qi.reduce(v);
    }
    ntt_q_[i].forward(tmp);
    const u64 inv = q_inv_mod_q_[top][i];
    const u64 inv_s = qi.shoup(inv);
    auto src = a.limb(i);
    auto dst = out.limb(i);
    for (std::size_t k = 0; k < a.n; ++k) dst[k] = qi.mul_shoup(qi.sub(src[k], tmp[k]), inv, inv_s);
  }
  return out;
}

RnsPoly Context::mod_up(const RnsPoly& a) const {
  if (a.num_p != 0) throw LevelError("mod_up expects a ciphertext-basis polynomial");
  const std::size_t nq = a.num_q;
  const std::size_t level = nq - 1;
  const std::size_t k = p_.size();
  RnsPoly out(a.n, nq, k);
  std::copy_n(a.data.begin(), nq * a.n, out.data.begin());

  // y_i = [c_i * (Q/q_i)^-1]_{q_i}, in coefficient form. sum_i y_i Q/q_i
  // equals c + u Q; u is the rounded sum of y_i / q_i, which leaves the
  // centered representative of c.
  std::vector<u64> y(nq * a.n);
  std::vector<double> frac(a.n, 0.0);
  for (std::size_t i = 0; i < nq; ++i) {
    std::span<u64> yi(y.data() + i * a.n, a.n);
    std::copy(a.limb(i).begin(), a.limb(i).end(), yi.begin());
    ntt_q_[i].inverse(yi);
    const u64 w = qhat_inv_[level][i];
    const u64 ws = q_[i].shoup(w);
    const double inv_q = 1.0 / static_cast<double>(q_[i].value());
    for (std::size_t c = 0; c < a.n; ++c) {
      yi[c] = q_[i].mul_shoup(yi[c], w, ws);
      frac[c] += static_cast<double>(yi[c]) * inv_q;
    }
  }
  std::vector<u64> u(a.n);
  for (std::size_t c = 0; c < a.n; ++c) u[c] = static_cast<u64>(std::llround(frac[c]));
  for (std::size_t j = 0; j < k; ++j) {
    auto dst = out.limb(nq + j);
    const Modulus& pj = p_[j];
    const u64 q_mod = q_mod_p_[level][j];
    for (std::size_t c = 0; c < a.n; ++c) {
      u128 acc = 0;
      for (std::size_t i = 0; i < nq; ++i) acc += static_cast<u128>(y[i * a.n + c]) * qhat_mod_p_[level][i][j];
      dst[c] = pj.sub(pj.reduce128(acc), pj.mul(pj.reduce(u[c]), q_mod));
    }
    ntt_p_[j].forward(dst);
  }
  return out;
}

RnsPoly Context::mod_down(const RnsPoly& a) const {
  const std::size_t nq = a.num_q;
  const std::size_t k = a.num_p;
  if (k != p_.size()) throw LevelError("mod_down expects the full special basis");
  // Centered [a]_P by the same rounded correction, so the result is a / P
  // rounded to nearest with zero-mean error.
  std::vector<u64> y(k * a.n);
  std::vector<double> frac(a.n, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    std::span<u64> yj(y.data() + j * a.n, a.n);
    std::copy(a.limb(nq + j).begin(), a.limb(nq + j).end(), yj.begin());
    ntt_p_[j].inverse(yj);
    const u64 w = phat_inv_[j];
    const u64 ws = p_[j].shoup(w);
    const double inv_p = 1.0 / static_cast<double>(p_[j].value());
    for (std::size_t c = 0; c < a.n; ++c) {
      yj[c] = p_[j].mul_shoup(yj[c], w, ws);
      frac[c] += static_cast<double>(yj[c]) * inv_p;
    }
  }
  std::vector<u64> v(a.n);
  for (std::size_t c = 0; c < a.n; ++c) v[c] = static_cast<u64>(std::llround(frac[c]));
  RnsPoly out(a.n, nq, 0);
  std::vector<u64> conv(a.n);
  for (std::size_t i = 0; i < nq; ++i) {
    const Modulus& qi = q_[i];
    const u64 p_mod = p_mod_q_[i];
    for (std::size_t c = 0; c < a.n; ++c) {
      u128 acc = 0;
      for (std::size_t j = 0; j < k; ++j) acc += static_cast<u128>(y[j * a.n + c]) * phat_mod_q_[j][i];
      conv[c] = qi.sub(qi.reduce128(acc), qi.mul(qi.reduce(v[c]), p_mod));
    }
    ntt_q_[i].forward(conv);
    const u64 w = p_inv_mod_q_[i];
    const u64 ws = qi.shoup(w);
    auto src = a.limb(i);
    auto dst = out.limb(i);
    for (std::size_t c = 0; c < a.n; ++c) dst[c] = qi.mul_shoup(qi.sub(src[c], conv[c]), w, ws);
  }
  return out;
}

void Context::special_fft(std::vector<std::complex<double>>& vals) const {
  const std::size_t size = vals.size();
  const std::size_t m = 2 * n();
  const int bits = __builtin_ctzll(size);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = reverse_bits(i, bits);
    if (i < j) std::swap(vals[i], vals[j]);
  }
  for (std::size_t len = 2; len <= size; len <<= 1) {
    const std::size_t lenh = len >> 1;
    const std::size_t lenq = len << 2;
    for (std::size_t i = 0; i < size; i += len) {
      for (std::size_t j = 0; j < lenh; ++j) {
        const std::size_t idx = (rot_group_[j] % lenq) * (m / lenq);
        const auto u = vals[i + j];
        const auto v = vals[i + j + lenh] * ksi_pows_[idx];
        vals[i + j] = u + v;
        vals[i + j + lenh] = u - v;
      }
    }
  }
}

void Context::special_fft_inverse(std::vector<std::complex<double>>& vals) const {
  const std::size_t size = vals.size();
  const std::size_t m = 2 * n();
  for (std::size_t len = size; len >= 2; len >>= 1) {
    const std::size_t lenh = len >> 1;
    const std::size_t lenq = len << 2;
    for (std::size_t i = 0; i < size; i += len) {
      for (std::size_t j = 0; j < lenh; ++j) {
        const std::size_t idx = (lenq - (rot_group_[j] % lenq)) * (m / lenq);
        const auto u = vals[i + j] + vals[i + j + lenh];
        const auto v = (vals[i + j] - vals[i + j + lenh]) * ksi_pows_[idx];
        vals[i + j] = u;
        vals[i + j + lenh] = v;
      }
    }
  }
  const int bits = __builtin_ctzll(size);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = reverse_bits(i, bits);
    if (i < j) std::swap(vals[i], vals[j]);
  }
  const double inv = 1.0 / static_cast<double>(size);
  for (auto& v : vals) v *= inv;
}

std::vector<double> Context::embed(std::span<const double> values, double scale) const {
  const std::size_t half = slots();
  if (values.size() > half) {
    throw CapacityError("cannot encode " + std::to_string(values.size()) + " values into " +
                        std::to_string(half) + " slots");
  }
  std::vector<std::complex<double>> z(half, {0.0, 0.0});
  for (std::size_t i = 0; i < values.size(); ++i) z[i] = values[i];
  special_fft_inverse(z);
  std::vector<double> coeffs(n());
  for (std::size_t i = 0; i < half; ++i) {
    coeffs[i] = z[i].real() * scale;
    coeffs[i + half] = z[i].imag() * scale;
  }
  return coeffs;
}

std::vector<double> Context::unembed(std::span<const double> coeffs, double scale) const {
  const std::size_t half = slots();
  std::vector<std::complex<double>> z(half);
  for (std::size_t i = 0; i < half; ++i) z[i] = {coeffs[i] / scale, coeffs[i + half] / scale};
  special_fft(z);
  std::vector<double> out(half);
  for (std::size_t i = 0; i < half; ++i) out[i] = z[i].real();
  return out;
}

u64 Context::galois_element(std::size_t step) const {
  const u64 m = 2 * n();
  step %= slots();
  u64 g = 1;
  u64 base = 5;
  while (step) {
    if (step & 1) g = (g * base) % m;
    base = (base * base) % m;
    step >>= 1;
  }
  return g;
}

const std::vector<std::uint32_t>& Context::galois_permutation(u64 galois_elt) const {
  std::lock_guard lock(galois_mutex_);
  auto& slot = galois_cache_[galois_elt];
  if (!slot) {
    const std::size_t size = n();
    const int bits = __builtin_ctzll(size);
    const u64 m = 2 * size;
    auto map = std::make_unique<std::vector<std::uint32_t>>(size);
    for (std::size_t i = 0; i < size; ++i) {
      const u64 e = 2 * reverse_bits(i, bits) + 1;
      const u64 t = (e * galois_elt) % m;
      (*map)[i] = static_cast<std::uint32_t>(reverse_bits((t - 1) / 2, bits));
    }
    slot = std::move(map);
  }
  return *slot;
}

void Context::apply_galois_ntt(std::span<const u64> in, std::span<u64> out, u64 galois_elt) const {
  const auto& map = galois_permutation(galois_elt);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[map[i]];
}

std::vector<std::int64_t> Context::apply_galois_coeffs(std::span<const std::int64_t> in, u64 galois_elt) const {
  const std::size_t size = n();
  const u64 m = 2 * size;
  std::vector<std::int64_t> out(size, 0);
  for (std::size_t i = 0; i < size; ++i) {
    const u64 t = (static_cast<u64>(i) * galois_elt) % m;
    if (t < size) {
      out[t] += in[i];
    } else {
      out[t - size] -= in[i];
    }
  }
  return out;
}

}  // namespace hei::ckks
