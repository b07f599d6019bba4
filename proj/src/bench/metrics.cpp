#include "hei/bench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hei/errors.hpp"

namespace hei::bench {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw ParameterError("confusion matrix needs at least one class");
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].size() != rows.size()) throw ShapeError("confusion matrix must be square");
    for (std::size_t p = 0; p < rows.size(); ++p) cm.add(a, p, rows[a][p]);
  }
  return cm;
}

void ConfusionMatrix::add(std::size_t actual, std::size_t predicted, std::uint64_t n) {
  if (actual >= k_ || predicted >= k_) throw ShapeError("class index outside the confusion matrix");
  counts_[actual * k_ + predicted] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < k_; ++c) t += at(c, c);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::uint64_t t = 0;
  for (std::size_t p = 0; p < k_; ++p) t += at(c, p);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t t = 0;
  for (std::size_t a = 0; a < k_; ++a) t += at(a, c);
  return t;
}

std::string ConfusionMatrix::render() const {
  std::ostringstream os;
  char buf[32];
  os << "actual\\pred";
  for (std::size_t p = 0; p < k_; ++p) {
    std::snprintf(buf, sizeof buf, "%7zu", p);
    os << buf;
  }
  os << '\n';
  for (std::size_t a = 0; a < k_; ++a) {
    std::snprintf(buf, sizeof buf, "%11zu", a);
    os << buf;
    const double n = static_cast<double>(row_sum(a));
    for (std::size_t p = 0; p < k_; ++p) {
      std::snprintf(buf, sizeof buf, "%7.1f", n > 0 ? 100.0 * static_cast<double>(at(a, p)) / n : 0.0);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os << "actual";
  for (std::size_t p = 0; p < k_; ++p) os << ",pred_" << p;
  os << '\n';
  for (std::size_t a = 0; a < k_; ++a) {
    os << a;
    for (std::size_t p = 0; p < k_; ++p) os << ',' << at(a, p);
    os << '\n';
  }
  return os.str();
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  if (cm.total() == 0) throw ParameterError("empty confusion matrix");
  MetricsReport r;
  const std::size_t k = cm.classes();
  double acc = 0, prec = 0, rec = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(cm.tp(c));
    const double tn = static_cast<double>(cm.tn(c));
    acc += (tp + tn) / total;
    const std::uint64_t predicted = cm.tp(c) + cm.fp(c);
    const std::uint64_t actual = cm.tp(c) + cm.fn(c);
    if (predicted == 0) {
      r.warnings.push_back("class " + std::to_string(c) + ": no predictions, precision 0/0 counted as 0");
    } else {
      prec += tp / static_cast<double>(predicted);
    }
    if (actual == 0) {
      r.warnings.push_back("class " + std::to_string(c) + ": no samples, recall 0/0 counted as 0");
    } else {
      rec += tp / static_cast<double>(actual);
    }
  }
  const double kk = static_cast<double>(k);
  r.accuracy_macro = acc / kk;
  r.accuracy_overall = static_cast<double>(cm.trace()) / total;
  r.precision_macro = prec / kk;
  r.recall_macro = rec / kk;
  const double s = r.precision_macro + r.recall_macro;
  r.f1_macro = s > 0 ? 2 * r.precision_macro * r.recall_macro / s : 0.0;
  return r;
}

std::string MetricsReport::render() const {
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof buf, "ring_dim=%zu activation=%s backend=%s\n", ring_dim, activation.c_str(),
                backend.c_str());
  os << buf;
  const std::pair<const char*, double> rows[] = {{"accuracy (macro)", accuracy_macro},
                                                 {"accuracy (overall)", accuracy_overall},
                                                 {"precision (macro)", precision_macro},
                                                 {"recall (macro)", recall_macro},
                                                 {"f1 (macro)", f1_macro}};
  for (const auto& [name, v] : rows) {
    std::snprintf(buf, sizeof buf, "  %-20s %8.4f%%\n", name, 100.0 * v);
    os << buf;
  }
  for (const auto& [stage, ms] : stage_ms) {
    std::snprintf(buf, sizeof buf, "  %-20s %10.3f ms\n", (stage + " (median)").c_str(), ms);
    os << buf;
  }
  for (const auto& w : warnings) os << "  warning: " << w << '\n';
  return os.str();
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "metric,value,ring_dim,activation,backend\n";
  char buf[64];
  const std::pair<const char*, double> rows[] = {{"accuracy_macro", accuracy_macro},
                                                 {"accuracy_overall", accuracy_overall},
                                                 {"precision_macro", precision_macro},
                                                 {"recall_macro", recall_macro},
                                                 {"f1_macro", f1_macro}};
  for (const auto& [name, v] : rows) {
    std::snprintf(buf, sizeof buf, "%.9f", v);
    os << name << ',' << buf << ',' << ring_dim << ',' << activation << ',' << backend << '\n';
  }
  return os.str();
}

double median(std::vector<double> v) {
  if (v.empty()) throw ParameterError("median of no samples");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) throw ParameterError("percentile of no samples");
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace hei::bench
