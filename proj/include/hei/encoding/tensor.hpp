#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace hei::encoding {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::vector<double> row(std::size_t r) const;

  bool operator==(const Matrix&) const = default;
};

std::vector<double> matvec(const Matrix& m, const std::vector<double>& x);

}  // namespace hei::encoding
