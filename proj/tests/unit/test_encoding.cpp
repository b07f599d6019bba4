#include <fstream>
#include <random>

#include <json.hpp>

#include "doctest.h"
#include "hei/encoding/layout.hpp"
#include "hei/errors.hpp"
#include "hei/model/model.hpp"

using namespace hei;
using namespace hei::encoding;

namespace {

Matrix random_matrix(std::mt19937_64& g, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> d(-1, 1);
  Matrix m(r, c);
  for (auto& v : m.data) v = d(g);
  return m;
}

Matrix from_json(const nlohmann::json& j) {
  Matrix m(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// Slot-wise product of the two layouts summed over taps: the plaintext image
// of one PlMult followed by the rotate-and-add tree.
std::vector<double> conv_via_layout(const EncodedImage& x, const EncodedKernel& k) {
  const auto& g = x.geometry;
  std::vector<double> out(g.block(), 0.0);
  for (std::size_t r = 0; r < g.taps(); ++r) {
    for (std::size_t j = 0; j < g.block(); ++j) out[j] += x.flat[r * g.block() + j] * k.flat[r * g.block() + j];
  }
  return out;
}

}  // namespace

TEST_CASE("im2col golden fixture") {
  std::ifstream in(std::string(HEI_FIXTURE_DIR) + "/im2col_golden.json");
  REQUIRE(in);
  const auto j = nlohmann::json::parse(in);
  const auto image = from_json(j["image"]);
  const auto kernel = from_json(j["kernel"]);
  const auto s = j["stride"].get<std::size_t>();
  const auto g = make_geometry(image.rows, image.cols, kernel.rows, kernel.cols, s, s);
  CHECK(g.Ho == 2);
  CHECK(g.Wo == 2);

  const auto enc = im2col(image, g, 32);
  const auto want_flat = j["flat_prefix"].get<std::vector<double>>();
  for (std::size_t i = 0; i < want_flat.size(); ++i) CHECK(enc.flat[i] == want_flat[i]);
  for (std::size_t i = want_flat.size(); i < enc.flat.size(); ++i) CHECK(enc.flat[i] == 0.0);

  const auto want_conv = j["conv"].get<std::vector<double>>();
  CHECK(conv_via_layout(enc, encode_kernel(kernel, g, 32)) == want_conv);
  CHECK(model::conv2d(image, kernel, g) == want_conv);
}

TEST_CASE("geometry of the network convolution") {
  const auto g = make_geometry(28, 28, 7, 7, 3, 3);
  CHECK(g.Ho == 8);
  CHECK(g.Wo == 8);
  CHECK(g.block() == 64);
  CHECK(g.required_slots() == 3136);

  const auto p = make_geometry(5, 5, 3, 3, 1, 1, 1, 1);
  CHECK(p.Ho == 5);
  CHECK(make_geometry(10, 10, 3, 3, 4, 4).Ho == 2);  // floor division

  CHECK_THROWS_AS(make_geometry(3, 3, 4, 4, 1, 1), GeometryError);
  CHECK_THROWS_AS(make_geometry(3, 3, 2, 2, 0, 1), GeometryError);
}

TEST_CASE("im2col capacity and shape errors") {
  const auto g = make_geometry(28, 28, 7, 7, 3, 3);
  Matrix img(28, 28, 0.5);
  CHECK_THROWS_WITH_AS(im2col(img, g, 2048), doctest::Contains("requires B >= 3136"), CapacityError);
  CHECK_THROWS_AS(im2col(Matrix(27, 28), g, 4096), ShapeError);
  CHECK_NOTHROW(im2col(img, g, 4096));
}

TEST_CASE("padding reads as zero") {
  const Matrix img{{1, 2}, {3, 4}};
  const auto g = make_geometry(2, 2, 3, 3, 1, 1, 1, 1);
  const auto enc = im2col(img, g, 64);
  // Tap (0,0) of output (0,0) is the padded corner.
  CHECK(enc.matrix(0, 0) == 0.0);
  // Centre tap of output (0,0) is pixel (0,0).
  CHECK(enc.matrix(4, 0) == 1.0);
  CHECK(conv_via_layout(enc, encode_kernel(Matrix(3, 3, 1.0), g, 64)) == std::vector<double>{10, 10, 10, 10});
}

TEST_CASE("layout convolution equals direct convolution on random inputs") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto img = random_matrix(rng, 28, 28);
    const auto ker = random_matrix(rng, 7, 7);
    const auto g = make_geometry(28, 28, 7, 7, 3, 3);
    const auto got = conv_via_layout(im2col(img, g, 4096), encode_kernel(ker, g, 4096));
    const auto want = model::conv2d(img, ker, g);
    for (std::size_t j = 0; j < 64; ++j) CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
  }
}

TEST_CASE("diagonal encoding reproduces the matrix-vector product") {
  std::mt19937_64 rng(5);
  for (auto [rows, cols, fill] : {std::tuple{64u, 256u, RowFill::zero}, std::tuple{64u, 256u, RowFill::tile},
                                  std::tuple{11u, 64u, RowFill::zero}, std::tuple{8u, 8u, RowFill::zero}}) {
    const auto m = random_matrix(rng, rows, cols);
    const auto x = random_matrix(rng, 1, cols).data;
    const auto d = diagonal_encode(m, fill);
    REQUIRE(d.dim == cols);
    // sum_i diag_i (.) rot(x, i) over the n x n padded matrix.
    std::vector<double> y(d.dim, 0.0);
    for (std::size_t i = 0; i < d.dim; ++i) {
      for (std::size_t j = 0; j < d.dim; ++j) y[j] += d.diagonals[i][j] * x[(j + i) % d.dim];
    }
    const auto want = matvec(m, x);
    for (std::size_t j = 0; j < d.dim; ++j) {
      if (j < rows) {
        CHECK(y[j] == doctest::Approx(want[j]).epsilon(1e-12));
      } else if (fill == RowFill::tile) {
        CHECK(y[j] == doctest::Approx(want[j % rows]).epsilon(1e-12));
      } else {
        CHECK(y[j] == 0.0);
      }
    }
  }
  CHECK_THROWS_AS(diagonal_encode(Matrix(5, 3)), ShapeError);
  CHECK_THROWS_AS(diagonal_encode(Matrix(3, 8), RowFill::tile), ShapeError);
}

TEST_CASE("channel packing plan") {
  const auto plan = channel_pack_plan(4, 64, 4096, 2);
  REQUIRE(plan.size() == 4);
  CHECK(plan[0].offsets == std::vector<std::size_t>{0, 256});
  CHECK(plan[0].rotations == std::vector<long>{0, 4096 - 256});
  CHECK(plan[3].offsets == std::vector<std::size_t>{192, 448});
  CHECK(plan[3].rotations == std::vector<long>{4096 - 192, 4096 - 448});
  for (const auto& e : plan) {
    CHECK(std::count(e.mask.begin(), e.mask.end(), 1.0) == 64);
    CHECK(e.mask[63] == 1.0);
    CHECK(e.mask[64] == 0.0);
  }
  CHECK_THROWS_AS(channel_pack_plan(4, 64, 256, 2), CapacityError);
}
