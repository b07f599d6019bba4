#include "hei/model/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hei/errors.hpp"

namespace hei::model {

namespace {

double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

double normal(std::mt19937_64& g) {
  const double u1 = std::max(unit(g), 1e-300);
  const double u2 = unit(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct Blob {
  double cx, cy, sigma, amp;
};

encoding::Matrix to_model_range(const cv::Mat& gray01, std::size_t size) {
  encoding::Matrix m(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double v = gray01.at<double>(static_cast<int>(r), static_cast<int>(c));
      m(r, c) = std::clamp((v - 0.5) / 0.5, -1.0, 1.0);
    }
  }
  return m;
}

// Resize an H x W x C image of doubles in [0, 1] (RGB order) and reduce to luminance.
encoding::Matrix reduce(const cv::Mat& img, std::size_t size) {
  cv::Mat resized;
  cv::resize(img, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0, cv::INTER_LINEAR);
  const int channels = resized.channels();
  cv::Mat gray(resized.rows, resized.cols, CV_64F);
  for (int r = 0; r < resized.rows; ++r) {
    const double* src = resized.ptr<double>(r);
    for (int c = 0; c < resized.cols; ++c) {
      const double* px = src + c * channels;
      double y = px[0];
      if (channels >= 3) y = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
      gray.at<double>(r, c) = y;
    }
  }
  return to_model_range(gray, size);
}

}  // namespace

Dataset synth_dataset(std::uint64_t seed, std::size_t per_class, std::size_t classes, std::size_t size) {
  if (per_class == 0) throw ParameterError("per_class must be at least 1");
  std::mt19937_64 g(seed);
  const double extent = static_cast<double>(size);
  std::vector<std::vector<Blob>> templates(classes);
  for (auto& t : templates) {
    for (int b = 0; b < 3; ++b) {
      t.push_back({extent * (0.2 + 0.6 * unit(g)), extent * (0.2 + 0.6 * unit(g)), extent * (0.07 + 0.1 * unit(g)),
                   b == 2 ? -0.8 : 1.0});
    }
  }
  Dataset out;
  out.reserve(classes * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      LabeledImage img{encoding::Matrix(size, size), c};
      std::vector<Blob> blobs = templates[c];
      for (auto& b : blobs) {
        b.cx += 1.5 * normal(g);
        b.cy += 1.5 * normal(g);
        b.amp *= 0.8 + 0.4 * unit(g);
      }
      for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t col = 0; col < size; ++col) {
          double v = -0.8;
          for (const auto& b : blobs) {
            const double dx = static_cast<double>(col) - b.cx;
            const double dy = static_cast<double>(r) - b.cy;
            v += 1.6 * b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
          }
          v += 0.15 * normal(g);
          img.pixels(r, col) = std::clamp(v, -1.0, 1.0);
        }
      }
      out.push_back(std::move(img));
    }
  }
  return out;
}

Split split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ParameterError("train fraction must be in (0, 1]");
  std::size_t classes = 0;
  for (const auto& d : data) classes = std::max(classes, d.label + 1);
  std::mt19937_64 g(seed);
  Split s;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].label == c) idx.push_back(i);
    }
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[g() % i]);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? s.train : s.test).push_back(data[idx[k]]);
  }
  return s;
}

encoding::Matrix preprocess(std::span<const std::uint8_t> pixels, std::size_t height, std::size_t width,
                            std::size_t channels, std::size_t size) {
  if (height == 0 || width == 0 || channels == 0 || channels > 4) throw FormatError("empty or malformed image");
  if (pixels.size() != height * width * channels) throw FormatError("pixel buffer does not match H x W x C");
  cv::Mat img(static_cast<int>(height), static_cast<int>(width), CV_64FC(static_cast<int>(channels)));
  for (std::size_t r = 0; r < height; ++r) {
    double* dst = img.ptr<double>(static_cast<int>(r));
    for (std::size_t k = 0; k < width * channels; ++k) dst[k] = pixels[r * width * channels + k] / 255.0;
  }
  return reduce(img, size);
}

encoding::Matrix preprocess_encoded(std::span<const std::uint8_t> file_bytes, std::size_t size) {
  if (file_bytes.empty()) throw FormatError("empty image file");
  const cv::Mat raw(1, static_cast<int>(file_bytes.size()), CV_8U, const_cast<std::uint8_t*>(file_bytes.data()));
  cv::Mat decoded = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
  if (decoded.empty()) throw FormatError("undecodable image");
  const double max = decoded.depth() == CV_16U ? 65535.0 : decoded.depth() == CV_8U ? 255.0 : 1.0;
  cv::Mat img;
  decoded.convertTo(img, CV_64F, 1.0 / max);
  if (img.channels() == 3) cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
  if (img.channels() == 4) cv::cvtColor(img, img, cv::COLOR_BGRA2RGB);
  if (img.channels() == 2) {
    std::vector<cv::Mat> parts;
    cv::split(img, parts);
    img = parts[0];
  }
  return reduce(img, size);
}

encoding::Matrix load_image(const std::filesystem::path& path, std::size_t size) {
  if (!std::filesystem::is_regular_file(path)) throw FormatError("no image file at " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image " + path.string());
  const std::string ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") {
    std::vector<double> values;
    std::string token;
    char ch;
    auto flush = [&] {
      if (token.empty()) return;
      try {
        values.push_back(std::stod(token));
      } catch (const std::logic_error&) {
        throw FormatError(path.string() + ": bad number '" + token + "'");
      }
      token.clear();
    };
    while (in.get(ch)) {
      if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
        flush();
      } else {
        token.push_back(ch);
      }
    }
    flush();
    if (values.size() != size * size) {
      throw FormatError(path.string() + ": expected " + std::to_string(size * size) + " values, found " +
                        std::to_string(values.size()));
    }
    encoding::Matrix m(size, size);
    std::copy(values.begin(), values.end(), m.data.begin());
    return m;
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return preprocess_encoded(bytes, size);
}

Dataset load_directory(const std::filesystem::path& root, std::size_t size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw FormatError("dataset root " + root.string() + " is not a directory");
  std::vector<std::pair<std::size_t, fs::path>> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
    dirs.emplace_back(std::stoul(name), e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  Dataset out;
  for (const auto& [label, dir] : dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      try {
        out.push_back({preprocess_encoded(bytes, size), label});
      } catch (const FormatError& e) {
        throw FormatError(f.string() + ": " + e.what());
      }
    }
  }
  if (out.empty()) throw FormatError("no images found under " + root.string());
  return out;
}

}  // namespace hei::model
