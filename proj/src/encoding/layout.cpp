#include "hei/encoding/layout.hpp"

#include <string>

#include "hei/errors.hpp"

namespace hei::encoding {

namespace {

void check_capacity(const ConvGeometry& g, std::size_t slots) {
  if (g.required_slots() > slots) {
    throw CapacityError("layout needs " + std::to_string(g.required_slots()) + " slots (k_H*k_W*H_o*W_o), requires B >= " +
                        std::to_string(g.required_slots()) + " but B = " + std::to_string(slots));
  }
}

}  // namespace

ConvGeometry make_geometry(std::size_t H, std::size_t W, std::size_t kH, std::size_t kW, std::size_t sH,
                           std::size_t sW, std::size_t pH, std::size_t pW) {
  if (H == 0 || W == 0 || kH == 0 || kW == 0 || sH == 0 || sW == 0) {
    throw GeometryError("image, kernel and stride dimensions must be positive");
  }
  if (kH > H + 2 * pH || kW > W + 2 * pW) {
    throw GeometryError("kernel " + std::to_string(kH) + "x" + std::to_string(kW) + " does not fit the padded " +
                        std::to_string(H + 2 * pH) + "x" + std::to_string(W + 2 * pW) + " input");
  }
  ConvGeometry g{H, W, kH, kW, sH, sW, pH, pW, 0, 0};
  g.Ho = (H + 2 * pH - kH) / sH + 1;
  g.Wo = (W + 2 * pW - kW) / sW + 1;
  return g;
}

EncodedImage im2col(const Matrix& image, const ConvGeometry& g, std::size_t slots) {
  if (image.rows != g.H || image.cols != g.W) {
    throw ShapeError("image is " + std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                     ", geometry expects " + std::to_string(g.H) + "x" + std::to_string(g.W));
  }
  check_capacity(g, slots);
  EncodedImage out;
  out.geometry = g;
  out.matrix = Matrix(g.taps(), g.block());
  for (std::size_t i = 0; i < g.taps(); ++i) {
    for (std::size_t j = 0; j < g.block(); ++j) {
      // Coordinates in the padded image; the padding ring reads as zero.
      const std::size_t r = g.j_h(j) * g.sH + g.h_k(i);
      const std::size_t c = g.j_w(j) * g.sW + g.w_k(i);
      const bool inside = r >= g.pH && r < g.pH + g.H && c >= g.pW && c < g.pW + g.W;
      out.matrix(i, j) = inside ? image(r - g.pH, c - g.pW) : 0.0;
    }
  }
  out.flat.assign(slots, 0.0);
  std::copy(out.matrix.data.begin(), out.matrix.data.end(), out.flat.begin());
  return out;
}

EncodedKernel encode_kernel(const Matrix& kernel, const ConvGeometry& g, std::size_t slots) {
  if (kernel.rows != g.kH || kernel.cols != g.kW) throw ShapeError("kernel shape does not match the geometry");
  check_capacity(g, slots);
  EncodedKernel out;
  out.geometry = g;
  out.flat.assign(slots, 0.0);
  for (std::size_t r = 0; r < g.taps(); ++r) {
    const double v = kernel(g.h_k(r), g.w_k(r));
    std::fill_n(out.flat.begin() + static_cast<long>(r * g.block()), g.block(), v);
  }
  return out;
}

EncodedDense diagonal_encode(const Matrix& m, RowFill fill) {
  if (m.rows == 0 || m.cols == 0) throw ShapeError("cannot encode an empty matrix");
  if (m.rows > m.cols) {
    throw ShapeError("diagonal encoding needs out_dim <= in_dim, got " + std::to_string(m.rows) + "x" +
                     std::to_string(m.cols));
  }
  const std::size_t n = m.cols;
  if (fill == RowFill::tile && n % m.rows != 0) throw ShapeError("row tiling needs out_dim to divide in_dim");
  EncodedDense d;
  d.dim = n;
  d.out_dim = m.rows;
  d.in_dim = m.cols;
  d.tiled = fill == RowFill::tile;
  d.diagonals.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t row = j;
      if (row >= m.rows) {
        if (!d.tiled) continue;
        row %= m.rows;
      }
      d.diagonals[i][j] = m(row, (j + i) % n);
    }
  }
  return d;
}

std::vector<PackEntry> channel_pack_plan(std::size_t num_channels, std::size_t block, std::size_t slots,
                                         std::size_t copies) {
  if (num_channels == 0 || block == 0 || copies == 0) throw ShapeError("empty packing plan");
  const std::size_t period = num_channels * block;
  if (period * copies > slots) {
    throw CapacityError("packing " + std::to_string(num_channels) + " channels of " + std::to_string(block) +
                        " slots (x" + std::to_string(copies) + ") exceeds B = " + std::to_string(slots));
  }
  std::vector<PackEntry> plan;
  for (std::size_t c = 0; c < num_channels; ++c) {
    PackEntry e;
    e.channel = c;
    e.mask.assign(slots, 0.0);
    std::fill_n(e.mask.begin(), block, 1.0);
    for (std::size_t k = 0; k < copies; ++k) {
      const std::size_t off = c * block + k * period;
      e.offsets.push_back(off);
      e.rotations.push_back(off == 0 ? 0 : static_cast<long>(slots - off));
    }
    plan.push_back(std::move(e));
  }
  return plan;
}

}  // namespace hei::encoding
