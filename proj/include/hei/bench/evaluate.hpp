#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hei/bench/metrics.hpp"
#include "hei/ckks/params.hpp"
#include "hei/model/data.hpp"
#include "hei/model/model.hpp"

namespace hei::bench {

enum class EvalPath { plain_exact, plain_poly, encrypted_exact, encrypted_lattice };

std::string to_string(EvalPath p);
EvalPath eval_path_from_string(const std::string& name);

struct EvalOptions {
  EvalPath path = EvalPath::encrypted_exact;
  std::size_t ring_dim = 8192;
  // Overrides the default chain for ring_dim (deeper activations).
  std::optional<ckks::CkksParams> params;
  model::ModelConfig model;
  std::optional<std::size_t> limit;  // first n samples only
  std::uint64_t seed = 1;            // keys and encryption randomness
};

struct Evaluation {
  ConfusionMatrix confusion{11};
  MetricsReport report;
  std::vector<std::size_t> predictions;
};

// Runs every sample through the chosen path. Encrypted paths compile the
// pipeline for the parameters first and surface its DepthError.
Evaluation evaluate(const model::ModelWeights& weights, const model::Dataset& data, const EvalOptions& options);

struct StageStats {
  std::string stage;
  double median_ms = 0;
  double p95_ms = 0;
  std::vector<double> samples;
};

struct BenchOptions {
  ckks::BackendKind backend = ckks::BackendKind::exact;
  std::size_t ring_dim = 8192;
  std::optional<ckks::CkksParams> params;
  model::ModelConfig model;
  std::size_t trials = 5;
  // Time only encode, encrypt, conv and decrypt; the convolution runs at the
  // level it would occupy in the full pipeline.
  bool conv_only = false;
  std::uint64_t seed = 1;
};

struct BenchResult {
  std::vector<StageStats> stages;  // encode, encrypt, conv, activation, fc, decrypt
  std::size_t ring_dim = 0;
  std::string activation;
  std::string backend;

  const StageStats& stage(const std::string& name) const;
};

BenchResult bench(const model::ModelWeights& weights, const BenchOptions& options);

std::string render_table(const std::vector<BenchResult>& results);
// stage,median_ms,p95_ms,ring_dim,activation,backend
std::string render_csv(const std::vector<BenchResult>& results);

ckks::CkksParams params_for(std::size_t ring_dim, const std::optional<ckks::CkksParams>& override_params);

}  // namespace hei::bench
