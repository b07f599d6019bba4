#pragma once

#include <cstddef>
#include <vector>

#include "hei/encoding/tensor.hpp"

namespace hei::encoding {

// Output shape of a single-channel 2-D convolution, with floor division:
// H_o = (H + 2 p_H - k_H) / s_H + 1.
struct ConvGeometry {
  std::size_t H = 0, W = 0;
  std::size_t kH = 0, kW = 0;
  std::size_t sH = 1, sW = 1;
  std::size_t pH = 0, pW = 0;
  std::size_t Ho = 0, Wo = 0;

  std::size_t block() const { return Ho * Wo; }
  std::size_t taps() const { return kH * kW; }
  std::size_t required_slots() const { return taps() * block(); }

  std::size_t j_h(std::size_t j) const { return j / Wo; }
  std::size_t j_w(std::size_t j) const { return j % Wo; }
  std::size_t h_k(std::size_t i) const { return i / kW; }
  std::size_t w_k(std::size_t i) const { return i % kW; }

  bool operator==(const ConvGeometry&) const = default;
};

ConvGeometry make_geometry(std::size_t H, std::size_t W, std::size_t kH, std::size_t kW, std::size_t sH,
                           std::size_t sW, std::size_t pH = 0, std::size_t pW = 0);

// Column representation: column j is the j-th sliding window read row-major,
// row i is kernel tap i. flat is the matrix flattened row-major and
// zero-padded to the slot count.
struct EncodedImage {
  Matrix matrix;
  std::vector<double> flat;
  ConvGeometry geometry;
};

EncodedImage im2col(const Matrix& image, const ConvGeometry& g, std::size_t slots);

// Kernel tap r repeated over a run of block() slots at offset r * block().
struct EncodedKernel {
  std::vector<double> flat;
  ConvGeometry geometry;
};

EncodedKernel encode_kernel(const Matrix& kernel, const ConvGeometry& g, std::size_t slots);

// Generalized diagonals of the n x n padded matrix:
// diagonals[i][j] = M_pad[j][(j + i) mod n], n = in_dim.
struct EncodedDense {
  std::size_t dim = 0;
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  bool tiled = false;
  std::vector<std::vector<double>> diagonals;
};

enum class RowFill {
  zero,  // rows out_dim..n-1 are zero
  tile,  // row r repeats row r mod out_dim; out_dim must divide n
};

EncodedDense diagonal_encode(const Matrix& m, RowFill fill = RowFill::zero);

// Plan for moving each channel's first `block` slots to its packed offset.
// rotations[k] is the left-rotation step realising offsets[k] (0 when none).
struct PackEntry {
  std::size_t channel = 0;
  std::vector<double> mask;  // indicator of [0, block), length slots
  std::vector<std::size_t> offsets;
  std::vector<long> rotations;
};

// With copies > 1 every channel is also placed at offset + k * (num_channels * block),
// giving a vector that repeats with period num_channels * block.
std::vector<PackEntry> channel_pack_plan(std::size_t num_channels, std::size_t block, std::size_t slots,
                                         std::size_t copies = 1);

}  // namespace hei::encoding
