#include "hei/model/train.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "hei/errors.hpp"

namespace hei::model {

namespace {

double act_grad(const secure::ActivationSpec& spec, ActMode mode, double z) {
  if (spec.kind == secure::ActivationKind::square) return 2.0 * z;
  if (mode == ActMode::poly) {
    const auto& c = spec.poly->mono_coeffs;
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) acc = acc * z + static_cast<double>(k) * c[k];
    return acc;
  }
  const std::string& t = spec.poly->target;
  if (t == "relu") return z > 0.0 ? 1.0 : 0.0;
  if (t == "silu") {
    const double s = 1.0 / (1.0 + std::exp(-z));
    return s * (1.0 + z * (1.0 - s));
  }
  return 2.0 * z;  // square / x2 targets
}

// Adds the gradient of the cross-entropy loss for one sample into `grad`
// (laid out like ModelWeights::flatten) and returns the loss.
double accumulate_gradient(const ModelWeights& w, const ModelConfig& cfg, const LabeledImage& s, ActMode mode,
                           ModelWeights& grad) {
  const auto t = forward_trace(w, cfg, s.pixels, mode);
  const auto g = cfg.geometry();
  const std::size_t block = g.block();

  const double mx = *std::max_element(t.logits.begin(), t.logits.end());
  double denom = 0.0;
  for (double v : t.logits) denom += std::exp(v - mx);
  std::vector<double> dlogits(t.logits.size());
  for (std::size_t k = 0; k < t.logits.size(); ++k) dlogits[k] = std::exp(t.logits[k] - mx) / denom;
  const double loss = -(t.logits[s.label] - mx - std::log(denom));
  dlogits[s.label] -= 1.0;

  std::vector<double> da2(cfg.hidden, 0.0);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    grad.fc2_bias[k] += dlogits[k];
    for (std::size_t h = 0; h < cfg.hidden; ++h) {
      grad.fc2(k, h) += dlogits[k] * t.fc1_act[h];
      da2[h] += w.fc2(k, h) * dlogits[k];
    }
  }
  std::vector<double> dz2(cfg.hidden);
  for (std::size_t h = 0; h < cfg.hidden; ++h) dz2[h] = da2[h] * act_grad(cfg.fc1_act, mode, t.fc1_pre[h]);

  const std::size_t flat = cfg.flat_dim();
  std::vector<double> da1(flat, 0.0);
  for (std::size_t h = 0; h < cfg.hidden; ++h) {
    grad.fc1_bias[h] += dz2[h];
    const double d = dz2[h];
    if (d == 0.0) continue;
    for (std::size_t i = 0; i < flat; ++i) {
      grad.fc1(h, i) += d * t.conv_act[i];
      da1[i] += w.fc1(h, i) * d;
    }
  }
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    auto& gk = grad.conv_kernels[c];
    for (std::size_t j = 0; j < block; ++j) {
      const std::size_t idx = c * block + j;
      const double dz = da1[idx] * act_grad(cfg.conv_act, mode, t.conv_pre[idx]);
      grad.conv_bias[c] += dz;
      for (std::size_t ky = 0; ky < g.kH; ++ky) {
        for (std::size_t kx = 0; kx < g.kW; ++kx) {
          const long y = static_cast<long>(g.j_h(j) * g.sH + ky) - static_cast<long>(g.pH);
          const long x = static_cast<long>(g.j_w(j) * g.sW + kx) - static_cast<long>(g.pW);
          if (y < 0 || x < 0 || y >= static_cast<long>(g.H) || x >= static_cast<long>(g.W)) continue;
          gk(ky, kx) += dz * s.pixels(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        }
      }
    }
  }
  return loss;
}

}  // namespace

TrainResult train(const Dataset& data, const ModelConfig& cfg, const TrainOptions& opt) {
  cfg.validate();
  if (data.empty()) throw TrainingError("training set is empty");
  for (const auto& s : data) {
    if (s.label >= cfg.classes) throw TrainingError("label " + std::to_string(s.label) + " out of range");
    if (s.pixels.rows != cfg.image || s.pixels.cols != cfg.image) throw ShapeError("training image has the wrong size");
  }
  if (opt.batch_size == 0) throw TrainingError("batch size must be positive");

  TrainResult res;
  res.weights = ModelWeights::random(cfg, opt.seed);
  std::vector<double> theta = res.weights.flatten();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
  std::mt19937_64 g(opt.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[g() % i]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      ModelWeights grad = ModelWeights::zeros(cfg);
      for (std::size_t k = start; k < end; ++k) epoch_loss += accumulate_gradient(res.weights, cfg, data[order[k]], opt.mode, grad);
      auto gv = grad.flatten();
      const double inv = 1.0 / static_cast<double>(end - start);
      ++step;
      const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < theta.size(); ++p) {
        const double gp = gv[p] * inv;
        m[p] = opt.beta1 * m[p] + (1.0 - opt.beta1) * gp;
        v[p] = opt.beta2 * v[p] + (1.0 - opt.beta2) * gp * gp;
        theta[p] -= opt.lr * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + opt.eps);
      }
      res.weights.unflatten(theta);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss) || !res.weights.all_finite()) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1) + " (loss is not finite)");
    }
    res.epoch_loss.push_back(epoch_loss);
  }
  return res;
}

double accuracy(const ModelWeights& w, const ModelConfig& cfg, const Dataset& data, ActMode mode) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : data) {
    const auto logits = forward_plain(w, cfg, s.pixels, mode);
    if (argmax(logits) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace hei::model
