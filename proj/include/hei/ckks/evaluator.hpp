#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "hei/ckks/context.hpp"
#include "hei/ckks/types.hpp"

namespace hei::ckks {

struct OpCounts {
  std::uint64_t add = 0;
  std::uint64_t pl_add = 0;
  std::uint64_t mult = 0;
  std::uint64_t pl_mult = 0;
  std::uint64_t rotate = 0;
  std::uint64_t rescale = 0;

  OpCounts operator-(const OpCounts& o) const {
    return {add - o.add, pl_add - o.pl_add, mult - o.mult, pl_mult - o.pl_mult, rotate - o.rotate,
            rescale - o.rescale};
  }
};

class OpCounters {
 public:
  OpCounts snapshot() const {
    return {add_.load(), pl_add_.load(), mult_.load(), pl_mult_.load(), rotate_.load(), rescale_.load()};
  }
  void reset() {
    for (auto* c : {&add_, &pl_add_, &mult_, &pl_mult_, &rotate_, &rescale_}) c->store(0);
  }

 private:
  friend class Evaluator;
  std::atomic<std::uint64_t> add_{0}, pl_add_{0}, mult_{0}, pl_mult_{0}, rotate_{0}, rescale_{0};
};

// The public-key side of the scheme: encoding, encryption and every
// homomorphic operation. Holds no secret material and cannot decrypt, so it
// is the only HE handle a server ever receives.
//
// Level/scale rules shared by both backends:
//  - binary ops first drop the higher-level operand to the lower level;
//  - add requires equal scales; otherwise one operand is re-scaled through a
//    constant-one plaintext (consuming one of its levels) or the op fails;
//  - mult and pl_mult rescale immediately: level - 1, scale a*b/q_level.
class Evaluator {
 public:
  explicit Evaluator(std::shared_ptr<const Context> context);
  virtual ~Evaluator() = default;
  Evaluator(const Evaluator&) = delete;
  Evaluator& operator=(const Evaluator&) = delete;

  virtual BackendKind kind() const = 0;

  const Context& context() const { return *context_; }
  std::shared_ptr<const Context> context_ptr() const { return context_; }
  const CkksParams& params() const { return context_->params(); }
  std::size_t slot_count() const { return context_->slots(); }
  int max_level() const { return context_->max_level(); }
  double default_scale() const { return params().scale(); }

  Plaintext encode(std::span<const double> values, int level, double scale,
                   bool keyswitch_basis = false) const;
  Plaintext encode(std::span<const double> values) const { return encode(values, max_level(), default_scale()); }
  // Encoded at scale q_level so a pl_mult at `level` leaves the ciphertext scale unchanged.
  Plaintext encode_multiplier(std::span<const double> values, int level, bool keyswitch_basis = false) const;
  std::vector<double> decode(const Plaintext& pt) const;

  Ciphertext encrypt(const PublicKey& pk, const Plaintext& pt, Prng* rng = nullptr) const;
  Ciphertext encrypt(const PublicKey& pk, std::span<const double> values, Prng* rng = nullptr) const;

  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const;
  Ciphertext pl_add(const Ciphertext& a, const Plaintext& p) const;
  // Encodes `values` at a's level and scale, then adds.
  Ciphertext pl_add(const Ciphertext& a, std::span<const double> values) const;
  Ciphertext mult(const Ciphertext& a, const Ciphertext& b, const RelinKey& relin) const;
  Ciphertext pl_mult(const Ciphertext& a, const Plaintext& p) const;
  Ciphertext pl_mult(const Ciphertext& a, std::span<const double> values) const;
  // Left rotation by `step` slots (negative steps rotate right).
  Ciphertext rotate(const Ciphertext& a, long step, const GaloisKeys& keys) const;
  // sum_i weights[i] * rotate(a, steps[i]). With weights the result is
  // rescaled once; without, no level is consumed. Step 0 needs no key.
  Ciphertext rotate_sum(const Ciphertext& a, std::span<const long> steps, const GaloisKeys& keys,
                        std::span<const Plaintext> weights = {}) const;
  Ciphertext drop_to_level(const Ciphertext& a, int level) const;
  // Multiplies by 1 encoded so that the result lands exactly on target_scale.
  Ciphertext align_scale(const Ciphertext& a, double target_scale) const;

  std::size_t normalize_step(long step) const;
  const OpCounters& counters() const { return counters_; }
  void reset_counters() const { counters_.reset(); }

 protected:
  virtual Plaintext encode_impl(std::span<const double> values, int level, double scale,
                                bool keyswitch_basis) const = 0;
  virtual std::vector<double> decode_impl(const Plaintext& pt) const = 0;
  virtual Ciphertext encrypt_impl(const PublicKey& pk, const Plaintext& pt, Prng& rng) const = 0;
  // Implementations may assume equal levels (and equal scales for add).
  virtual void add_impl(Ciphertext& a, const Ciphertext& b) const = 0;
  virtual void pl_add_impl(Ciphertext& a, const Plaintext& p) const = 0;
  virtual void mult_impl(Ciphertext& a, const Ciphertext& b, const RelinKey& relin) const = 0;
  virtual void pl_mult_impl(Ciphertext& a, const Plaintext& p) const = 0;
  virtual void rescale_impl(Ciphertext& a) const = 0;
  virtual void drop_impl(Ciphertext& a, int level) const = 0;
  virtual void rotate_impl(Ciphertext& a, std::size_t step, const KeySwitchKey& key) const = 0;
  // Default: independent rotations. Backends may share work across steps.
  virtual Ciphertext rotate_sum_impl(const Ciphertext& a, std::span<const std::size_t> steps,
                                     const GaloisKeys& keys, std::span<const Plaintext> weights) const;

  void check_compatible(const Ciphertext& a) const;
  const KeySwitchKey& galois_key(const GaloisKeys& keys, std::size_t step, int level) const;
  std::uint64_t fresh_key_id() const;

 private:
  Ciphertext rescaled(Ciphertext a) const;
  void align_pair(Ciphertext& a, Ciphertext& b, bool need_scale) const;

  std::shared_ptr<const Context> context_;
  mutable OpCounters counters_;
};

// Adds key generation and decryption: the client-side handle.
class Backend : public Evaluator {
 public:
  using Evaluator::Evaluator;

  // seed fixes all randomness (test mode); nullopt draws from the OS.
  virtual KeyMaterial keygen(const RotationKeyPlan& plan, std::optional<std::uint64_t> seed = std::nullopt) const = 0;
  // Keys for every step at the top level.
  KeyMaterial keygen(const std::set<long>& steps, std::optional<std::uint64_t> seed = std::nullopt) const;

  Plaintext decrypt(const SecretKey& sk, const Ciphertext& ct) const;
  std::vector<double> decrypt_values(const SecretKey& sk, const Ciphertext& ct) const {
    return decode(decrypt(sk, ct));
  }

 protected:
  virtual Plaintext decrypt_impl(const SecretKey& sk, const Ciphertext& ct) const = 0;
};

std::unique_ptr<Backend> make_backend(BackendKind kind, std::shared_ptr<const Context> context);
std::unique_ptr<Backend> make_backend(BackendKind kind, const CkksParams& params);

// Server-side handle: evaluation only, no decryption entry point.
std::shared_ptr<const Evaluator> make_evaluator(BackendKind kind, std::shared_ptr<const Context> context);

// HEI_BACKEND environment variable, defaulting to exact.
BackendKind default_backend_kind();

}  // namespace hei::ckks
