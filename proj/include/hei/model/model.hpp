#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hei/encoding/layout.hpp"
#include "hei/encoding/tensor.hpp"
#include "hei/secure/ops.hpp"

namespace hei::model {

using encoding::Matrix;

// The fixed network: 28x28 input, 4-channel 7x7 stride-3 convolution,
// fc1 256 -> 64, fc2 64 -> 11. Activations follow conv and fc1 only.
struct ModelConfig {
  std::size_t image = 28;
  std::size_t channels = 4;
  std::size_t kernel = 7;
  std::size_t stride = 3;
  std::size_t padding = 0;
  std::size_t hidden = 64;
  std::size_t classes = 11;
  secure::ActivationSpec conv_act = secure::ActivationSpec::square();
  secure::ActivationSpec fc1_act = secure::ActivationSpec::square();
  std::uint64_t seed = 1;

  encoding::ConvGeometry geometry() const;
  std::size_t conv_block() const { return geometry().block(); }
  std::size_t flat_dim() const { return channels * conv_block(); }
  // Throws ShapeError unless channels * H_o * W_o feeds fc1 and shapes are sane.
  void validate() const;
};

struct ModelWeights {
  std::vector<Matrix> conv_kernels;  // channels x (k x k)
  std::vector<double> conv_bias;
  Matrix fc1;  // hidden x flat_dim
  std::vector<double> fc1_bias;
  Matrix fc2;  // classes x hidden
  std::vector<double> fc2_bias;

  static ModelWeights zeros(const ModelConfig& cfg);
  // Uniform in +-1/sqrt(fan_in), zero biases.
  static ModelWeights random(const ModelConfig& cfg, std::uint64_t seed);

  void check_shapes(const ModelConfig& cfg) const;
  bool all_finite() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& v);

  bool operator==(const ModelWeights&) const = default;
};

enum class ActMode { exact, poly };

struct ForwardTrace {
  std::vector<double> conv_pre;  // channel-major, channels * block
  std::vector<double> conv_act;
  std::vector<double> fc1_pre;
  std::vector<double> fc1_act;
  std::vector<double> logits;
};

// Direct sliding-window convolution; independent of the im2col path.
std::vector<double> conv2d(const Matrix& image, const Matrix& kernel, const encoding::ConvGeometry& g);

double activate(const secure::ActivationSpec& spec, ActMode mode, double x);
ForwardTrace forward_trace(const ModelWeights& w, const ModelConfig& cfg, const Matrix& x, ActMode mode);
std::vector<double> forward_plain(const ModelWeights& w, const ModelConfig& cfg, const Matrix& x, ActMode mode);

// Lowest index wins ties.
std::size_t argmax(std::span<const double> v);

// "HEW1" weight files.
void save_weights(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& cfg = {});
std::vector<std::uint8_t> serialize_weights(const ModelWeights& w);
ModelWeights parse_weights(std::span<const std::uint8_t> bytes, const ModelConfig& cfg = {});

}  // namespace hei::model
