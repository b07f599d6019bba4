#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hei/ckks/evaluator.hpp"
#include "hei/model/model.hpp"
#include "hei/secure/ops.hpp"

namespace hei::protocol {

struct PipelineConfig {
  model::ModelConfig model;
  // Stop after the convolution stage (benchmarks, rotation-set checks).
  bool conv_only = false;
  // Level the client encrypts at; defaults to the pipeline depth.
  std::optional<int> input_level;
};

struct StageLevels {
  std::string name;
  int input_level = 0;
  int output_level = 0;
};

struct PipelinePlan {
  encoding::ConvGeometry geometry;
  std::set<long> rotation_steps;
  ckks::RotationKeyPlan key_levels;  // step -> level the key must serve
  int depth = 0;
  int input_level = 0;
  std::vector<StageLevels> stages;
  std::size_t output_slots = 0;
};

// Static schedule: conv, pack, act, fc1, act, fc2. Throws DepthError when the
// chain is too short and ParameterError/CapacityError for unusable layouts.
PipelinePlan compile_pipeline(const PipelineConfig& config, const ckks::CkksParams& params);

// Throws KeyError naming the first step the keys do not cover at its level.
void verify_galois_keys(const PipelinePlan& plan, const ckks::GaloisKeys& keys);

// Client-side input encoding: im2col, flattened and zero-padded to the slots.
std::vector<double> encode_input(const encoding::Matrix& image, const encoding::ConvGeometry& g, std::size_t slots);

using StageTimer = std::function<void(std::string_view stage, double ms)>;

// Server-side pipeline: weights pre-encoded for one parameter set and backend.
// Immutable once built; run() may be called concurrently.
class CompiledPipeline {
 public:
  CompiledPipeline(std::shared_ptr<const ckks::Evaluator> ev, const model::ModelWeights& weights,
                   PipelineConfig config);

  const PipelinePlan& plan() const { return plan_; }
  const PipelineConfig& config() const { return config_; }
  const ckks::Evaluator& evaluator() const { return *ev_; }

  // Encrypted logits in slots [0, classes). For conv-only pipelines the
  // result is channel 0's convolution.
  ckks::Ciphertext run(const ckks::Ciphertext& input, const ckks::EvaluationKeys& keys,
                       const StageTimer& timer = {}) const;

 private:
  ckks::Ciphertext conv_and_pack(const ckks::Ciphertext& x, const ckks::EvaluationKeys& keys,
                                 const StageTimer& timer, std::optional<ckks::Ciphertext>* conv_only) const;
  ckks::Ciphertext dense(const ckks::Ciphertext& x, const encoding::EncodedDense& d,
                         const secure::PreparedRotateSum& prepared, const ckks::GaloisKeys& keys,
                         const std::string& stage) const;

  std::shared_ptr<const ckks::Evaluator> ev_;
  PipelineConfig config_;
  PipelinePlan plan_;
  std::vector<encoding::EncodedKernel> kernels_;
  std::vector<ckks::Plaintext> kernel_pt_;
  std::vector<std::vector<double>> conv_bias_;
  std::vector<encoding::PackEntry> pack_;
  std::vector<ckks::Plaintext> mask_pt_;
  encoding::EncodedDense fc1_;
  encoding::EncodedDense fc2_;
  secure::PreparedRotateSum fc1_prepared_;
  secure::PreparedRotateSum fc2_prepared_;
  std::vector<double> fc1_bias_;
  std::vector<double> fc2_bias_;
};

}  // namespace hei::protocol
