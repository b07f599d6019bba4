#pragma once

#include <functional>
#include <string>
#include <vector>

namespace hei::secure {

// Polynomial approximation of an activation on [a, b], kept in both the
// Chebyshev basis (in t = (2x - a - b) / (b - a)) and the monomial basis in x.
struct ChebyshevPoly {
  double a = -8.0;
  double b = 8.0;
  int degree = 0;
  std::vector<double> cheb_coeffs;
  std::vector<double> mono_coeffs;  // mono_coeffs[k] multiplies x^k
  std::string target;

  // Clenshaw recurrence in the Chebyshev basis.
  double eval(double x) const;
  // Horner in the monomial basis; the form evaluated under encryption.
  double eval_monomial(double x) const;
};

// Interpolation at degree+1 Chebyshev nodes mapped to [a, b]:
// c_j = (2 - [j = 0]) / N * sum_k f(x_k) T_j(t_k).
ChebyshevPoly chebyshev_fit(const std::function<double(double)>& f, double a, double b, int degree,
                            std::string name = "custom");
// Named targets: relu, silu, square (alias x2).
ChebyshevPoly chebyshev_fit(const std::string& target, double a, double b, int degree);

double activation_value(const std::string& target, double x);

// Maximum |p(x) - f(x)| over `points` evenly spaced points of [a, b]; also
// reports where it occurs.
struct GridError {
  double max_error = 0.0;
  double argmax = 0.0;
};
GridError grid_error(const ChebyshevPoly& p, const std::function<double(double)>& f, int points = 1001);
GridError grid_error(const ChebyshevPoly& p, int points = 1001);

}  // namespace hei::secure
