#include "hei/protocol/pipeline.hpp"

#include <chrono>

#include "hei/errors.hpp"

namespace hei::protocol {

namespace {

constexpr std::size_t kPackCopies = 2;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void require_level(const ckks::Ciphertext& x, int needed, const std::string& stage) {
  if (x.level < needed) {
    throw DepthError(stage, "modulus chain exhausted: ciphertext at level " + std::to_string(x.level) + ", stage needs " +
                                std::to_string(needed));
  }
}

}  // namespace

PipelinePlan compile_pipeline(const PipelineConfig& config, const ckks::CkksParams& params) {
  params.validate();
  const auto& m = config.model;
  m.validate();
  const std::size_t slots = params.slot_count();
  PipelinePlan plan;
  plan.geometry = m.geometry();
  const auto& g = plan.geometry;
  if (g.required_slots() > slots) {
    throw CapacityError("convolution layout requires B >= " + std::to_string(g.required_slots()) + " slots, have " +
                        std::to_string(slots));
  }
  const std::size_t block = g.block();
  const std::size_t period = m.channels * block;
  const int d1 = m.conv_act.depth();
  const int d2 = m.fc1_act.depth();

  plan.depth = config.conv_only ? 1 : 4 + d1 + d2;
  const int chain = params.max_level() + 1;
  if (plan.depth + 1 > chain) {
    throw DepthError("compile", "pipeline depth " + std::to_string(plan.depth) + " requires a modulus chain of " +
                                    std::to_string(plan.depth + 1) + " primes; parameters provide " +
                                    std::to_string(chain));
  }
  plan.input_level = config.input_level.value_or(plan.depth);
  if (plan.input_level < plan.depth || plan.input_level > params.max_level()) {
    throw ParameterError("input level " + std::to_string(plan.input_level) + " outside [" +
                         std::to_string(plan.depth) + ", " + std::to_string(params.max_level()) + "]");
  }

  auto need = [&](long step, int level) {
    const auto s = static_cast<std::size_t>(((step % static_cast<long>(slots)) + static_cast<long>(slots)) %
                                            static_cast<long>(slots));
    if (s == 0) return;
    plan.rotation_steps.insert(static_cast<long>(s));
    auto [it, fresh] = plan.key_levels.emplace(s, level);
    if (!fresh && it->second < level) it->second = level;
  };

  int level = plan.input_level;
  plan.stages.push_back({"conv", level, level - 1});
  --level;
  for (long s : secure::conv_rotation_steps(g)) need(s, level);
  if (config.conv_only) {
    plan.output_slots = block;
    return plan;
  }

  if (kPackCopies * period > slots) {
    throw CapacityError("packed activations need " + std::to_string(kPackCopies * period) + " slots, have " +
                        std::to_string(slots));
  }
  if (m.hidden == 0 || period % m.hidden != 0 || 2 * m.hidden > period) {
    throw ShapeError("hidden width " + std::to_string(m.hidden) + " must divide the packed width " +
                     std::to_string(period) + " at most twice over");
  }
  plan.stages.push_back({"pack", level, level - 1});
  --level;
  for (const auto& e : encoding::channel_pack_plan(m.channels, block, slots, kPackCopies)) {
    for (long r : e.rotations) need(r, level);
  }
  plan.stages.push_back({"activation1", level, level - d1});
  level -= d1;
  plan.stages.push_back({"fc1", level, level - 1});
  for (std::size_t i = 1; i < period; ++i) need(static_cast<long>(i), level);
  --level;
  plan.stages.push_back({"activation2", level, level - d2});
  level -= d2;
  plan.stages.push_back({"fc2", level, level - 1});
  for (std::size_t i = 1; i < m.hidden; ++i) need(static_cast<long>(i), level);
  plan.output_slots = m.classes;
  return plan;
}

void verify_galois_keys(const PipelinePlan& plan, const ckks::GaloisKeys& keys) {
  for (const auto& [step, level] : plan.key_levels) {
    const auto it = keys.keys.find(step);
    if (it == keys.keys.end()) throw KeyError("missing Galois key for rotation step " + std::to_string(step));
    if (it->second.level < level) {
      throw KeyError("Galois key for rotation step " + std::to_string(step) + " covers level " +
                     std::to_string(it->second.level) + ", pipeline needs " + std::to_string(level));
    }
  }
}

std::vector<double> encode_input(const encoding::Matrix& image, const encoding::ConvGeometry& g, std::size_t slots) {
  return encoding::im2col(image, g, slots).flat;
}

CompiledPipeline::CompiledPipeline(std::shared_ptr<const ckks::Evaluator> ev, const model::ModelWeights& weights,
                                   PipelineConfig config)
    : ev_(std::move(ev)), config_(std::move(config)) {
  plan_ = compile_pipeline(config_, ev_->params());
  const auto& m = config_.model;
  weights.check_shapes(m);
  const auto& g = plan_.geometry;
  const std::size_t slots = ev_->slot_count();
  const std::size_t block = g.block();

  int level = plan_.input_level;
  for (std::size_t c = 0; c < m.channels; ++c) {
    kernels_.push_back(encoding::encode_kernel(weights.conv_kernels[c], g, slots));
    kernel_pt_.push_back(ev_->encode_multiplier(kernels_.back().flat, level));
    conv_bias_.emplace_back(block, weights.conv_bias[c]);
  }
  if (config_.conv_only) return;
  --level;
  pack_ = encoding::channel_pack_plan(m.channels, block, slots, kPackCopies);
  for (const auto& e : pack_) mask_pt_.push_back(ev_->encode_multiplier(e.mask, level));
  --level;
  level -= m.conv_act.depth();

  fc1_ = encoding::diagonal_encode(weights.fc1, encoding::RowFill::tile);
  fc1_prepared_ = secure::prepare_dense(*ev_, fc1_, level);
  for (std::size_t i = 0; i < fc1_.dim; ++i) fc1_bias_.push_back(weights.fc1_bias[i % m.hidden]);
  --level;
  level -= m.fc1_act.depth();

  fc2_ = encoding::diagonal_encode(weights.fc2, encoding::RowFill::zero);
  fc2_prepared_ = secure::prepare_dense(*ev_, fc2_, level);
  fc2_bias_ = weights.fc2_bias;
}

ckks::Ciphertext CompiledPipeline::conv_and_pack(const ckks::Ciphertext& x, const ckks::EvaluationKeys& keys,
                                                 const StageTimer& timer,
                                                 std::optional<ckks::Ciphertext>* conv_only) const {
  const auto& ev = *ev_;
  const auto& g = plan_.geometry;
  std::vector<long> taps(g.taps());
  for (std::size_t r = 0; r < g.taps(); ++r) taps[r] = static_cast<long>(r * g.block());

  auto t0 = Clock::now();
  std::vector<ckks::Ciphertext> convs;
  secure::in_stage("conv", [&] {
    require_level(x, 1, "conv");
    for (std::size_t c = 0; c < kernels_.size(); ++c) {
      ckks::Ciphertext p = kernel_pt_[c].level == x.level ? ev.pl_mult(x, kernel_pt_[c])
                                                          : ev.pl_mult(x, kernels_[c].flat);
      ckks::Ciphertext out = ev.rotate_sum(p, taps, keys.galois_keys);
      out.valid_slots = g.block();
      convs.push_back(secure::add_bias(ev, out, conv_bias_[c]));
    }
    return 0;
  });
  if (timer) timer("conv", ms_since(t0));
  if (conv_only) {
    *conv_only = std::move(convs.front());
    return {};
  }

  t0 = Clock::now();
  ckks::Ciphertext packed = secure::in_stage("pack", [&] {
    std::optional<ckks::Ciphertext> acc;
    for (std::size_t c = 0; c < pack_.size(); ++c) {
      const auto& conv = convs[c];
      require_level(conv, 1, "pack");
      ckks::Ciphertext masked = mask_pt_[c].level == conv.level ? ev.pl_mult(conv, mask_pt_[c])
                                                                : ev.pl_mult(conv, pack_[c].mask);
      ckks::Ciphertext placed = ev.rotate_sum(masked, pack_[c].rotations, keys.galois_keys);
      acc = acc ? ev.add(*acc, placed) : std::move(placed);
    }
    acc->valid_slots = pack_.size() * g.block();
    return std::move(*acc);
  });
  if (timer) timer("conv", ms_since(t0));
  return packed;
}

ckks::Ciphertext CompiledPipeline::dense(const ckks::Ciphertext& x, const encoding::EncodedDense& d,
                                         const secure::PreparedRotateSum& prepared, const ckks::GaloisKeys& keys,
                                         const std::string& stage) const {
  require_level(x, 1, stage);
  return secure::in_stage(stage, [&] {
    if (x.level == prepared.level) return secure::encrypted_dense(*ev_, x, d, prepared, keys, secure::DenseInput::replicated);
    return secure::encrypted_dense(*ev_, x, d, keys, secure::DenseInput::replicated);
  });
}

ckks::Ciphertext CompiledPipeline::run(const ckks::Ciphertext& input, const ckks::EvaluationKeys& keys,
                                       const StageTimer& timer) const {
  const auto& ev = *ev_;
  const auto& m = config_.model;
  ckks::Ciphertext x = input.level > plan_.input_level ? ev.drop_to_level(input, plan_.input_level) : input;

  if (config_.conv_only) {
    std::optional<ckks::Ciphertext> out;
    conv_and_pack(x, keys, timer, &out);
    return std::move(*out);
  }
  x = conv_and_pack(x, keys, timer, nullptr);

  auto t0 = Clock::now();
  x = secure::apply_activation(ev, x, m.conv_act, keys.relin_key, "activation1");
  if (timer) timer("activation", ms_since(t0));

  t0 = Clock::now();
  x = dense(x, fc1_, fc1_prepared_, keys.galois_keys, "fc1");
  x = secure::add_bias(ev, x, fc1_bias_);
  if (timer) timer("fc", ms_since(t0));

  t0 = Clock::now();
  x = secure::apply_activation(ev, x, m.fc1_act, keys.relin_key, "activation2");
  if (timer) timer("activation", ms_since(t0));

  t0 = Clock::now();
  x = dense(x, fc2_, fc2_prepared_, keys.galois_keys, "fc2");
  x = secure::add_bias(ev, x, fc2_bias_);
  if (timer) timer("fc", ms_since(t0));
  return x;
}

}  // namespace hei::protocol
