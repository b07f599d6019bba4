#include "hei/secure/chebyshev.hpp"

#include <cmath>
#include <numbers>

#include "hei/errors.hpp"

namespace hei::secure {

double activation_value(const std::string& target, double x) {
  if (target == "relu") return x > 0.0 ? x : 0.0;
  if (target == "silu") return x / (1.0 + std::exp(-x));
  if (target == "square" || target == "x2") return x * x;
  throw ParameterError("unknown activation target '" + target + "' (expected relu, silu or square)");
}

ChebyshevPoly chebyshev_fit(const std::function<double(double)>& f, double a, double b, int degree,
                            std::string name) {
  if (degree < 1) throw ParameterError("Chebyshev degree must be at least 1");
  if (!(a < b)) throw ParameterError("Chebyshev interval must satisfy a < b");
  const int N = degree + 1;
  std::vector<double> t(static_cast<std::size_t>(N));
  std::vector<double> fx(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    t[static_cast<std::size_t>(k)] = std::cos(std::numbers::pi * (k + 0.5) / N);
    fx[static_cast<std::size_t>(k)] = f(0.5 * (b - a) * t[static_cast<std::size_t>(k)] + 0.5 * (a + b));
  }
  ChebyshevPoly p;
  p.a = a;
  p.b = b;
  p.degree = degree;
  p.target = std::move(name);
  p.cheb_coeffs.assign(static_cast<std::size_t>(N), 0.0);
  for (int j = 0; j < N; ++j) {
    double acc = 0.0;
    for (int k = 0; k < N; ++k) acc += fx[static_cast<std::size_t>(k)] * std::cos(j * std::acos(t[static_cast<std::size_t>(k)]));
    p.cheb_coeffs[static_cast<std::size_t>(j)] = (j == 0 ? 1.0 : 2.0) / N * acc;
  }

  // T_j as polynomials in t, accumulated into sum_j c_j T_j(t).
  const std::size_t n = static_cast<std::size_t>(N);
  std::vector<double> in_t(n, 0.0);
  std::vector<double> prev(n, 0.0), cur(n, 0.0);
  prev[0] = 1.0;
  in_t[0] += p.cheb_coeffs[0];
  if (n > 1) {
    cur[1] = 1.0;
    in_t[1] += p.cheb_coeffs[1];
  }
  for (std::size_t j = 2; j < n; ++j) {
    std::vector<double> next(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) next[k + 1] += 2.0 * cur[k];
    for (std::size_t k = 0; k < n; ++k) next[k] -= prev[k];
    for (std::size_t k = 0; k < n; ++k) in_t[k] += p.cheb_coeffs[j] * next[k];
    prev = std::move(cur);
    cur = std::move(next);
  }

  // Substitute t = alpha * x + beta.
  const double alpha = 2.0 / (b - a);
  const double beta = -(a + b) / (b - a);
  p.mono_coeffs.assign(n, 0.0);
  std::vector<double> power(n, 0.0);  // coefficients of (alpha x + beta)^k
  power[0] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i <= k; ++i) p.mono_coeffs[i] += in_t[k] * power[i];
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i <= k && i + 1 < n; ++i) {
      next[i + 1] += alpha * power[i];
      next[i] += beta * power[i];
    }
    power = std::move(next);
  }
  return p;
}

ChebyshevPoly chebyshev_fit(const std::string& target, double a, double b, int degree) {
  activation_value(target, 0.0);
  return chebyshev_fit([&target](double x) { return activation_value(target, x); }, a, b, degree, target);
}

double ChebyshevPoly::eval(double x) const {
  const double t = (2.0 * x - a - b) / (b - a);
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t j = cheb_coeffs.size(); j-- > 1;) {
    const double b0 = 2.0 * t * b1 - b2 + cheb_coeffs[j];
    b2 = b1;
    b1 = b0;
  }
  return t * b1 - b2 + cheb_coeffs[0];
}

double ChebyshevPoly::eval_monomial(double x) const {
  double acc = 0.0;
  for (std::size_t k = mono_coeffs.size(); k-- > 0;) acc = acc * x + mono_coeffs[k];
  return acc;
}

GridError grid_error(const ChebyshevPoly& p, const std::function<double(double)>& f, int points) {
  GridError e;
  for (int i = 0; i < points; ++i) {
    const double x = p.a + (p.b - p.a) * i / (points - 1);
    const double d = std::abs(p.eval(x) - f(x));
    if (d > e.max_error) {
      e.max_error = d;
      e.argmax = x;
    }
  }
  return e;
}

GridError grid_error(const ChebyshevPoly& p, int points) {
  const std::string target = p.target;
  return grid_error(p, [&target](double x) { return activation_value(target, x); }, points);
}

}  // namespace hei::secure
