#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "hei/model/data.hpp"
#include "hei/model/model.hpp"

namespace acceptance {

// One criterion's verdict: every sub-check must hold.
struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(ok ? what : "FAILED " + what);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

inline std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

inline double max_abs(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b, std::size_t n) {
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// max |a - b| / max |b| over the first n entries.
inline double rel_err(std::span<const double> got, std::span<const double> ref, std::size_t n) {
  const double scale = max_abs(ref.first(n));
  return max_abs_diff(got, ref, n) / (scale > 0 ? scale : 1.0);
}

// Trained surrogate: synthetic 11-class data, 80:20 split, square activations.
struct Surrogate {
  hei::model::ModelConfig cfg;
  hei::model::Split split;
  hei::model::ModelWeights weights;
};
Surrogate train_surrogate();

Outcome criterion_1();
Outcome criterion_2();
Outcome criterion_3();
Outcome criterion_4();
Outcome criterion_5();
Outcome criterion_6();
Outcome criterion_7();
Outcome criterion_8();
Outcome criterion_9();
Outcome criterion_10();

}  // namespace acceptance
