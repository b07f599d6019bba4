#pragma once

#include <cstdint>
#include <vector>

#include "hei/model/data.hpp"
#include "hei/model/model.hpp"

namespace hei::model {

struct TrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  // poly trains through the polynomial activations that run under encryption.
  ActMode mode = ActMode::exact;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<double> epoch_loss;
};

// Minibatch Adam on softmax cross-entropy.
TrainResult train(const Dataset& data, const ModelConfig& cfg, const TrainOptions& opt);

double accuracy(const ModelWeights& w, const ModelConfig& cfg, const Dataset& data, ActMode mode);

}  // namespace hei::model
