#include "hei/ckks/evaluator.hpp"

#include <cmath>
#include <cstdlib>

#include "hei/ckks/exact_backend.hpp"
#include "hei/ckks/lattice_backend.hpp"
#include "hei/errors.hpp"

namespace hei::ckks {

namespace {

bool same_scale(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

}  // namespace

Evaluator::Evaluator(std::shared_ptr<const Context> context) : context_(std::move(context)) {
  if (!context_) throw ParameterError("null context");
}

std::size_t Evaluator::normalize_step(long step) const {
  const long b = static_cast<long>(slot_count());
  return static_cast<std::size_t>(((step % b) + b) % b);
}

void Evaluator::check_compatible(const Ciphertext& a) const {
  if (a.params_hash != context_->params_hash()) {
    throw IncompatibleError("ciphertext was produced under different parameters");
  }
  if (a.backend != kind()) throw IncompatibleError("ciphertext belongs to the " + to_string(a.backend) + " backend");
}

const KeySwitchKey& Evaluator::galois_key(const GaloisKeys& keys, std::size_t step, int level) const {
  if (keys.header.params_hash != context_->params_hash()) {
    throw IncompatibleError("Galois keys were generated under different parameters");
  }
  auto it = keys.keys.find(step);
  if (it == keys.keys.end()) throw KeyError("missing Galois key for rotation step " + std::to_string(step));
  if (it->second.level < level) {
    throw KeyError("Galois key for rotation step " + std::to_string(step) + " only covers level " +
                   std::to_string(it->second.level) + ", needed " + std::to_string(level));
  }
  return it->second;
}

std::uint64_t Evaluator::fresh_key_id() const { return Prng::from_entropy().next_u64(); }

Plaintext Evaluator::encode(std::span<const double> values, int level, double scale, bool keyswitch_basis) const {
  if (values.size() > slot_count()) {
    throw CapacityError("cannot encode " + std::to_string(values.size()) + " values into " +
                        std::to_string(slot_count()) + " slots");
  }
  if (level < 0 || level > max_level()) throw LevelError("encode level " + std::to_string(level) + " out of range");
  if (!(scale > 0.0)) throw ParameterError("encoding scale must be positive");
  return encode_impl(values, level, scale, keyswitch_basis);
}

Plaintext Evaluator::encode_multiplier(std::span<const double> values, int level, bool keyswitch_basis) const {
  return encode(values, level, context_->q_value(level), keyswitch_basis);
}

std::vector<double> Evaluator::decode(const Plaintext& pt) const { return decode_impl(pt); }

Ciphertext Evaluator::encrypt(const PublicKey& pk, const Plaintext& pt, Prng* rng) const {
  if (pk.header.params_hash != context_->params_hash() || pk.header.backend != kind()) {
    throw IncompatibleError("public key does not match these parameters/backend");
  }
  if (pt.level < 0 || pt.level > max_level()) throw LevelError("plaintext level out of range");
  if (rng) return encrypt_impl(pk, pt, *rng);
  Prng local = Prng::from_entropy();
  return encrypt_impl(pk, pt, local);
}

Ciphertext Evaluator::encrypt(const PublicKey& pk, std::span<const double> values, Prng* rng) const {
  auto ct = encrypt(pk, encode(values), rng);
  ct.valid_slots = values.size();
  return ct;
}

Ciphertext Evaluator::drop_to_level(const Ciphertext& a, int level) const {
  check_compatible(a);
  if (level > a.level) throw LevelError("cannot raise ciphertext level " + std::to_string(a.level) + " to " + std::to_string(level));
  if (level < 0) throw LevelError("negative level");
  Ciphertext out = a;
  if (level < a.level) {
    drop_impl(out, level);
    out.level = level;
  }
  return out;
}

Ciphertext Evaluator::rescaled(Ciphertext a) const {
  if (a.level < 1) throw DepthError("", "modulus chain exhausted: no level left to rescale");
  const double q = context_->q_value(a.level);
  rescale_impl(a);
  a.scale /= q;
  a.level -= 1;
  counters_.rescale_++;
  return a;
}

Ciphertext Evaluator::align_scale(const Ciphertext& a, double target_scale) const {
  check_compatible(a);
  if (a.level < 1) throw LevelError("cannot align scale: ciphertext has no level to spend");
  // Constant 1 at scale target*q/a.scale: after rescaling the product sits at target.
  const double pt_scale = target_scale * context_->q_value(a.level) / a.scale;
  if (!(pt_scale >= 1.0) || pt_scale > 0x1.0p60) {
    throw LevelError("scale ratio is not representable by a constant plaintext");
  }
  std::vector<double> ones(slot_count(), 1.0);
  Plaintext one = encode(ones, a.level, pt_scale);
  Ciphertext out = a;
  pl_mult_impl(out, one);
  out.scale = a.scale * pt_scale;
  out = rescaled(std::move(out));
  out.scale = target_scale;
  return out;
}

void Evaluator::align_pair(Ciphertext& a, Ciphertext& b, bool need_scale) const {
  check_compatible(a);
  check_compatible(b);
  if (need_scale && !same_scale(a.scale, b.scale)) {
    // Re-scale whichever operand can afford a level, preferring the higher one.
    Ciphertext& hi = a.level >= b.level ? a : b;
    Ciphertext& lo = a.level >= b.level ? b : a;
    if (hi.level >= 1 && hi.level - 1 >= lo.level) {
      hi = align_scale(hi, lo.scale);
    } else if (lo.level >= 1) {
      lo = align_scale(lo, hi.scale);
    } else {
      throw LevelError("operand scales differ and neither operand has a level to align them");
    }
  }
  if (a.level > b.level) a = drop_to_level(a, b.level);
  if (b.level > a.level) b = drop_to_level(b, a.level);
}

Ciphertext Evaluator::add(const Ciphertext& a, const Ciphertext& b) const {
  Ciphertext x = a;
  Ciphertext y = b;
  align_pair(x, y, true);
  add_impl(x, y);
  x.valid_slots = std::min(a.valid_slots, b.valid_slots);
  counters_.add_++;
  return x;
}

Ciphertext Evaluator::pl_add(const Ciphertext& a, const Plaintext& p) const {
  check_compatible(a);
  if (p.level < a.level) throw LevelError("plaintext level below ciphertext level");
  if (!same_scale(a.scale, p.scale)) throw LevelError("plaintext scale does not match ciphertext scale");
  Ciphertext out = a;
  pl_add_impl(out, p);
  counters_.pl_add_++;
  return out;
}

Ciphertext Evaluator::pl_add(const Ciphertext& a, std::span<const double> values) const {
  return pl_add(a, encode(values, a.level, a.scale));
}

Ciphertext Evaluator::mult(const Ciphertext& a, const Ciphertext& b, const RelinKey& relin) const {
  Ciphertext x = a;
  Ciphertext y = b;
  align_pair(x, y, false);
  if (x.level < 1) throw DepthError("", "modulus chain exhausted: multiplication at level 0");
  if (relin.header.params_hash != context_->params_hash()) {
    throw IncompatibleError("relinearization key does not match these parameters");
  }
  mult_impl(x, y, relin);
  x.scale = x.scale * y.scale;
  x.valid_slots = std::min(a.valid_slots, b.valid_slots);
  counters_.mult_++;
  return rescaled(std::move(x));
}

Ciphertext Evaluator::pl_mult(const Ciphertext& a, const Plaintext& p) const {
  check_compatible(a);
  if (a.level < 1) throw DepthError("", "modulus chain exhausted: plaintext multiplication at level 0");
  if (p.level < a.level) throw LevelError("plaintext level below ciphertext level");
  Ciphertext out = a;
  pl_mult_impl(out, p);
  out.scale = a.scale * p.scale;
  counters_.pl_mult_++;
  return rescaled(std::move(out));
}

Ciphertext Evaluator::pl_mult(const Ciphertext& a, std::span<const double> values) const {
  if (a.level < 1) throw DepthError("", "modulus chain exhausted: plaintext multiplication at level 0");
  return pl_mult(a, encode_multiplier(values, a.level));
}

Ciphertext Evaluator::rotate(const Ciphertext& a, long step, const GaloisKeys& keys) const {
  check_compatible(a);
  const std::size_t s = normalize_step(step);
  Ciphertext out = a;
  if (s == 0) return out;
  rotate_impl(out, s, galois_key(keys, s, a.level));
  counters_.rotate_++;
  return out;
}

Ciphertext Evaluator::rotate_sum(const Ciphertext& a, std::span<const long> steps, const GaloisKeys& keys,
                                 std::span<const Plaintext> weights) const {
  check_compatible(a);
  if (steps.empty()) throw ParameterError("rotate_sum needs at least one step");
  if (!weights.empty() && weights.size() != steps.size()) {
    throw ParameterError("rotate_sum weights must match steps one to one");
  }
  if (!weights.empty() && a.level < 1) {
    throw DepthError("", "modulus chain exhausted: weighted rotate_sum at level 0");
  }
  std::vector<std::size_t> norm;
  norm.reserve(steps.size());
  std::uint64_t rotations = 0;
  for (long s : steps) {
    const std::size_t n = normalize_step(s);
    if (n != 0) {
      galois_key(keys, n, a.level);
      ++rotations;
    }
    norm.push_back(n);
  }
  for (const auto& w : weights) {
    if (w.level < a.level) throw LevelError("rotate_sum weight level below ciphertext level");
  }
  Ciphertext out = rotate_sum_impl(a, norm, keys, weights);
  out.level = a.level;
  out.valid_slots = a.valid_slots;
  counters_.rotate_ += rotations;
  counters_.add_ += steps.size() - 1;
  if (weights.empty()) {
    out.scale = a.scale;
    return out;
  }
  counters_.pl_mult_ += weights.size();
  out.scale = a.scale * weights[0].scale;
  return rescaled(std::move(out));
}

Ciphertext Evaluator::rotate_sum_impl(const Ciphertext& a, std::span<const std::size_t> steps,
                                      const GaloisKeys& keys, std::span<const Plaintext> weights) const {
  std::optional<Ciphertext> acc;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Ciphertext term = a;
    if (steps[i] != 0) rotate_impl(term, steps[i], galois_key(keys, steps[i], a.level));
    if (!weights.empty()) pl_mult_impl(term, weights[i]);
    if (acc) {
      add_impl(*acc, term);
    } else {
      acc = std::move(term);
    }
  }
  return std::move(*acc);
}

KeyMaterial Backend::keygen(const std::set<long>& steps, std::optional<std::uint64_t> seed) const {
  RotationKeyPlan plan;
  for (long s : steps) {
    const std::size_t n = normalize_step(s);
    if (n != 0) plan[n] = max_level();
  }
  return keygen(plan, seed);
}

Plaintext Backend::decrypt(const SecretKey& sk, const Ciphertext& ct) const {
  check_compatible(ct);
  if (sk.header.params_hash != context().params_hash() || sk.header.backend != kind()) {
    throw IncompatibleError("secret key does not match these parameters/backend");
  }
  return decrypt_impl(sk, ct);
}

std::unique_ptr<Backend> make_backend(BackendKind kind, std::shared_ptr<const Context> context) {
  if (kind == BackendKind::exact) return std::make_unique<ExactBackend>(std::move(context));
  return std::make_unique<LatticeBackend>(std::move(context));
}

std::unique_ptr<Backend> make_backend(BackendKind kind, const CkksParams& params) {
  return make_backend(kind, Context::create(params));
}

std::shared_ptr<const Evaluator> make_evaluator(BackendKind kind, std::shared_ptr<const Context> context) {
  return make_backend(kind, std::move(context));
}

BackendKind default_backend_kind() {
  const char* env = std::getenv("HEI_BACKEND");
  if (env == nullptr || *env == '\0') return BackendKind::exact;
  return backend_from_string(env);
}

}  // namespace hei::ckks
