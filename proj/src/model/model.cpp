#include "hei/model/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "hei/errors.hpp"

namespace hei::model {

encoding::ConvGeometry ModelConfig::geometry() const {
  return encoding::make_geometry(image, image, kernel, kernel, stride, stride, padding, padding);
}

void ModelConfig::validate() const {
  const auto g = geometry();
  if (channels == 0 || hidden == 0 || classes == 0) throw ShapeError("model dimensions must be positive");
  if (classes > hidden) throw ShapeError("class count must not exceed the hidden width");
  if (channels * g.block() != flat_dim()) throw ShapeError("conv output does not flatten to fc1 input");
}

ModelWeights ModelWeights::zeros(const ModelConfig& cfg) {
  ModelWeights w;
  w.conv_kernels.assign(cfg.channels, Matrix(cfg.kernel, cfg.kernel));
  w.conv_bias.assign(cfg.channels, 0.0);
  w.fc1 = Matrix(cfg.hidden, cfg.flat_dim());
  w.fc1_bias.assign(cfg.hidden, 0.0);
  w.fc2 = Matrix(cfg.classes, cfg.hidden);
  w.fc2_bias.assign(cfg.classes, 0.0);
  return w;
}

ModelWeights ModelWeights::random(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w = zeros(cfg);
  std::mt19937_64 g(seed);
  auto fill = [&g](std::vector<double>& v, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : v) x = (2.0 * (static_cast<double>(g() >> 11) * 0x1.0p-53) - 1.0) * bound;
  };
  for (auto& k : w.conv_kernels) fill(k.data, cfg.kernel * cfg.kernel);
  fill(w.fc1.data, cfg.flat_dim());
  fill(w.fc2.data, cfg.hidden);
  return w;
}

void ModelWeights::check_shapes(const ModelConfig& cfg) const {
  auto fail = [](const std::string& name) { throw ShapeError("tensor '" + name + "' has the wrong shape"); };
  if (conv_kernels.size() != cfg.channels) fail("conv.weight");
  for (const auto& k : conv_kernels) {
    if (k.rows != cfg.kernel || k.cols != cfg.kernel) fail("conv.weight");
  }
  if (conv_bias.size() != cfg.channels) fail("conv.bias");
  if (fc1.rows != cfg.hidden || fc1.cols != cfg.flat_dim()) fail("fc1.weight");
  if (fc1_bias.size() != cfg.hidden) fail("fc1.bias");
  if (fc2.rows != cfg.classes || fc2.cols != cfg.hidden) fail("fc2.weight");
  if (fc2_bias.size() != cfg.classes) fail("fc2.bias");
}

bool ModelWeights::all_finite() const {
  const auto v = flatten();
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> ModelWeights::flatten() const {
  std::vector<double> v;
  for (const auto& k : conv_kernels) v.insert(v.end(), k.data.begin(), k.data.end());
  v.insert(v.end(), conv_bias.begin(), conv_bias.end());
  v.insert(v.end(), fc1.data.begin(), fc1.data.end());
  v.insert(v.end(), fc1_bias.begin(), fc1_bias.end());
  v.insert(v.end(), fc2.data.begin(), fc2.data.end());
  v.insert(v.end(), fc2_bias.begin(), fc2_bias.end());
  return v;
}

void ModelWeights::unflatten(const std::vector<double>& v) {
  auto it = v.begin();
  auto take = [&it, &v](std::vector<double>& dst) {
    if (static_cast<std::size_t>(v.end() - it) < dst.size()) throw ShapeError("parameter vector too short");
    std::copy_n(it, dst.size(), dst.begin());
    it += static_cast<long>(dst.size());
  };
  for (auto& k : conv_kernels) take(k.data);
  take(conv_bias);
  take(fc1.data);
  take(fc1_bias);
  take(fc2.data);
  take(fc2_bias);
  if (it != v.end()) throw ShapeError("parameter vector too long");
}

std::vector<double> conv2d(const Matrix& image, const Matrix& kernel, const encoding::ConvGeometry& g) {
  std::vector<double> out(g.block(), 0.0);
  for (std::size_t oy = 0; oy < g.Ho; ++oy) {
    for (std::size_t ox = 0; ox < g.Wo; ++ox) {
      double acc = 0.0;
      for (std::size_t ky = 0; ky < g.kH; ++ky) {
        for (std::size_t kx = 0; kx < g.kW; ++kx) {
          const long y = static_cast<long>(oy * g.sH + ky) - static_cast<long>(g.pH);
          const long x = static_cast<long>(ox * g.sW + kx) - static_cast<long>(g.pW);
          if (y < 0 || x < 0 || y >= static_cast<long>(g.H) || x >= static_cast<long>(g.W)) continue;
          acc += kernel(ky, kx) * image(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        }
      }
      out[oy * g.Wo + ox] = acc;
    }
  }
  return out;
}

double activate(const secure::ActivationSpec& spec, ActMode mode, double x) {
  if (mode == ActMode::poly || spec.kind == secure::ActivationKind::square) return spec.apply_plain(x);
  return secure::activation_value(spec.poly->target, x);
}

ForwardTrace forward_trace(const ModelWeights& w, const ModelConfig& cfg, const Matrix& x, ActMode mode) {
  const auto g = cfg.geometry();
  ForwardTrace t;
  t.conv_pre.reserve(cfg.flat_dim());
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    auto o = conv2d(x, w.conv_kernels[c], g);
    for (auto v : o) t.conv_pre.push_back(v + w.conv_bias[c]);
  }
  t.conv_act.resize(t.conv_pre.size());
  for (std::size_t i = 0; i < t.conv_pre.size(); ++i) t.conv_act[i] = activate(cfg.conv_act, mode, t.conv_pre[i]);
  t.fc1_pre = encoding::matvec(w.fc1, t.conv_act);
  for (std::size_t i = 0; i < t.fc1_pre.size(); ++i) t.fc1_pre[i] += w.fc1_bias[i];
  t.fc1_act.resize(t.fc1_pre.size());
  for (std::size_t i = 0; i < t.fc1_pre.size(); ++i) t.fc1_act[i] = activate(cfg.fc1_act, mode, t.fc1_pre[i]);
  t.logits = encoding::matvec(w.fc2, t.fc1_act);
  for (std::size_t i = 0; i < t.logits.size(); ++i) t.logits[i] += w.fc2_bias[i];
  return t;
}

std::vector<double> forward_plain(const ModelWeights& w, const ModelConfig& cfg, const Matrix& x, ActMode mode) {
  return forward_trace(w, cfg, x, mode).logits;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// ---- HEW1 ----

namespace {

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, std::vector<std::uint32_t> dims,
                const std::vector<double>& values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> d) : d_(d) {}
  bool done() const { return pos_ == d_.size(); }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(d_[pos_++]) << (8 * b);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(d_[pos_++]) << (8 * b);
    return std::bit_cast<double>(v);
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(d_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (d_.size() - pos_ < n) throw FormatError("weight file truncated");
  }

 private:
  std::span<const std::uint8_t> d_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_weights(const ModelWeights& w) {
  std::vector<std::uint8_t> out{'H', 'E', 'W', '1'};
  const auto k = static_cast<std::uint32_t>(w.conv_kernels.empty() ? 0 : w.conv_kernels[0].rows);
  std::vector<double> conv;
  for (const auto& m : w.conv_kernels) conv.insert(conv.end(), m.data.begin(), m.data.end());
  put_tensor(out, "conv.weight", {static_cast<std::uint32_t>(w.conv_kernels.size()), k, k}, conv);
  put_tensor(out, "conv.bias", {static_cast<std::uint32_t>(w.conv_bias.size())}, w.conv_bias);
  put_tensor(out, "fc1.weight", {static_cast<std::uint32_t>(w.fc1.rows), static_cast<std::uint32_t>(w.fc1.cols)},
             w.fc1.data);
  put_tensor(out, "fc1.bias", {static_cast<std::uint32_t>(w.fc1_bias.size())}, w.fc1_bias);
  put_tensor(out, "fc2.weight", {static_cast<std::uint32_t>(w.fc2.rows), static_cast<std::uint32_t>(w.fc2.cols)},
             w.fc2.data);
  put_tensor(out, "fc2.bias", {static_cast<std::uint32_t>(w.fc2_bias.size())}, w.fc2_bias);
  return out;
}

ModelWeights parse_weights(std::span<const std::uint8_t> bytes, const ModelConfig& cfg) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "HEW", 3) != 0) throw FormatError("not a weight file (bad magic)");
  if (bytes[3] != '1') throw FormatError("unsupported weight file version '" + std::string(1, static_cast<char>(bytes[3])) + "'");
  ByteReader r(bytes.subspan(4));
  std::map<std::string, Tensor> tensors;
  while (!r.done()) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 256) throw FormatError("tensor name too long");
    const std::string name = r.text(name_len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank");
    Tensor t;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.dims.push_back(r.u32());
      count *= t.dims.back();
      if (count > (1ull << 28)) throw FormatError("tensor '" + name + "' is too large");
    }
    r.need(count * 8);
    t.values.resize(count);
    for (auto& v : t.values) v = r.f64();
    if (!tensors.emplace(name, std::move(t)).second) throw FormatError("duplicate tensor '" + name + "'");
  }

  ModelWeights w = ModelWeights::zeros(cfg);
  auto get = [&](const std::string& name, const std::vector<std::uint32_t>& dims) -> const std::vector<double>& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("weight file lacks tensor '" + name + "'");
    if (it->second.dims != dims) {
      std::string got;
      for (auto d : it->second.dims) got += (got.empty() ? "" : "x") + std::to_string(d);
      std::string want;
      for (auto d : dims) want += (want.empty() ? "" : "x") + std::to_string(d);
      throw ShapeError("tensor '" + name + "' has shape " + got + ", expected " + want);
    }
    return it->second.values;
  };
  const auto C = static_cast<std::uint32_t>(cfg.channels);
  const auto K = static_cast<std::uint32_t>(cfg.kernel);
  const auto& conv = get("conv.weight", {C, K, K});
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    std::copy_n(conv.begin() + static_cast<long>(c * K * K), K * K, w.conv_kernels[c].data.begin());
  }
  w.conv_bias = get("conv.bias", {C});
  w.fc1.data = get("fc1.weight", {static_cast<std::uint32_t>(cfg.hidden), static_cast<std::uint32_t>(cfg.flat_dim())});
  w.fc1_bias = get("fc1.bias", {static_cast<std::uint32_t>(cfg.hidden)});
  w.fc2.data = get("fc2.weight", {static_cast<std::uint32_t>(cfg.classes), static_cast<std::uint32_t>(cfg.hidden)});
  w.fc2_bias = get("fc2.bias", {static_cast<std::uint32_t>(cfg.classes)});
  if (!w.all_finite()) throw FormatError("weight file contains non-finite values");
  return w;
}

void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_weights(bytes, cfg);
}

}  // namespace hei::model
