#include "hei/encoding/tensor.hpp"

#include "hei/errors.hpp"

namespace hei::encoding {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
  rows = init.size();
  cols = rows ? init.begin()->size() : 0;
  data.reserve(rows * cols);
  for (const auto& r : init) {
    if (r.size() != cols) throw ShapeError("ragged matrix initializer");
    data.insert(data.end(), r.begin(), r.end());
  }
}

std::vector<double> Matrix::row(std::size_t r) const {
  return {data.begin() + static_cast<long>(r * cols), data.begin() + static_cast<long>((r + 1) * cols)};
}

std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
  if (x.size() != m.cols) throw ShapeError("matvec: vector length does not match matrix columns");
  std::vector<double> y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += m(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

}  // namespace hei::encoding
