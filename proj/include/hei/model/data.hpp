#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hei/encoding/tensor.hpp"

namespace hei::model {

struct LabeledImage {
  encoding::Matrix pixels;  // 28x28 in [-1, 1]
  std::size_t label = 0;
};

using Dataset = std::vector<LabeledImage>;

// 11 classes of Gaussian-blob patterns with per-sample jitter and noise.
Dataset synth_dataset(std::uint64_t seed, std::size_t per_class, std::size_t classes = 11, std::size_t size = 28);

struct Split {
  Dataset train;
  Dataset test;
};
// Per-class split, train_fraction of every class to train (0.8 for 80:20).
Split split_dataset(const Dataset& data, double train_fraction = 0.8, std::uint64_t seed = 0);

// Bilinear resize to size x size, luminance grayscale, then (x/max - 0.5) / 0.5.
encoding::Matrix preprocess(std::span<const std::uint8_t> pixels, std::size_t height, std::size_t width,
                            std::size_t channels, std::size_t size = 28);
// Decodes an encoded image file (PNG, JPEG, ...) first.
encoding::Matrix preprocess_encoded(std::span<const std::uint8_t> file_bytes, std::size_t size = 28);

// Image file (PNG/JPEG/...) through preprocess_encoded, or a .csv/.txt grid of
// size*size already-normalised values.
encoding::Matrix load_image(const std::filesystem::path& path, std::size_t size = 28);

// <root>/<class_index>/<image files>
Dataset load_directory(const std::filesystem::path& root, std::size_t size = 28);

}  // namespace hei::model
