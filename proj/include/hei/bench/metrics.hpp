#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hei::bench {

// Rows are actual classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 11);
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows);

  void add(std::size_t actual, std::size_t predicted, std::uint64_t n = 1);
  std::uint64_t at(std::size_t actual, std::size_t predicted) const { return counts_[actual * k_ + predicted]; }
  std::size_t classes() const { return k_; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;

  std::uint64_t tp(std::size_t c) const { return at(c, c); }
  std::uint64_t fp(std::size_t c) const { return col_sum(c) - tp(c); }
  std::uint64_t fn(std::size_t c) const { return row_sum(c) - tp(c); }
  std::uint64_t tn(std::size_t c) const { return total() - tp(c) - fp(c) - fn(c); }

  // Row-normalised percentages, one line per actual class.
  std::string render() const;
  std::string to_csv() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct MetricsReport {
  double accuracy_macro = 0;    // mean over classes of (TP+TN)/total
  double accuracy_overall = 0;  // trace / total
  double precision_macro = 0;
  double recall_macro = 0;
  double f1_macro = 0;  // harmonic mean of the macro precision and recall
  std::vector<std::string> warnings;

  // Median milliseconds per stage (encrypted paths only).
  std::map<std::string, double> stage_ms;
  std::size_t ring_dim = 0;
  std::string activation;
  std::string backend;

  std::string render() const;
  // metric,value,ring_dim,activation,backend; stable formatting.
  std::string to_csv() const;
};

// Classes with 0/0 precision or recall contribute 0 and add a warning.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Median and nearest-rank 95th percentile.
double median(std::vector<double> v);
double percentile(std::vector<double> v, double p);

}  // namespace hei::bench
