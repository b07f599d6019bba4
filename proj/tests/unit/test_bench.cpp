#include <random>

#include "doctest.h"
#include "hei/bench/evaluate.hpp"
#include "hei/bench/metrics.hpp"
#include "hei/errors.hpp"

using namespace hei;
using namespace hei::bench;

TEST_CASE("perfect diagonal matrix") {
  ConfusionMatrix cm(11);
  for (std::size_t c = 0; c < 11; ++c) cm.add(c, c, 5);
  const auto r = compute_metrics(cm);
  CHECK(r.accuracy_macro == 1.0);
  CHECK(r.accuracy_overall == 1.0);
  CHECK(r.precision_macro == 1.0);
  CHECK(r.recall_macro == 1.0);
  CHECK(r.f1_macro == 1.0);
  CHECK(r.warnings.empty());
}

TEST_CASE("two-class hand example") {
  const auto r = compute_metrics(ConfusionMatrix::from_rows({{1, 1}, {1, 1}}));
  CHECK(r.accuracy_overall == 0.5);
  CHECK(r.accuracy_macro == 0.5);
  CHECK(r.precision_macro == 0.5);
  CHECK(r.recall_macro == 0.5);
}

TEST_CASE("single predicted class over balanced truths") {
  ConfusionMatrix cm(11);
  for (std::size_t c = 0; c < 11; ++c) cm.add(c, 0, 10);
  const auto r = compute_metrics(cm);
  CHECK(r.recall_macro == doctest::Approx(1.0 / 11).epsilon(1e-15));
  CHECK(r.precision_macro == doctest::Approx(1.0 / 11 / 11).epsilon(1e-15));
  CHECK(r.warnings.size() == 10);  // ten classes never predicted
}

TEST_CASE("empty matrix is rejected") { CHECK_THROWS_AS(compute_metrics(ConfusionMatrix(11)), ParameterError); }

TEST_CASE("macro metrics equal independent per-class recomputation") {
  std::mt19937_64 g(17);
  std::uniform_int_distribution<int> count(0, 9);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + t % 10;
    std::vector<std::vector<std::uint64_t>> rows(k, std::vector<std::uint64_t>(k));
    for (auto& row : rows) {
      for (auto& v : row) v = static_cast<std::uint64_t>(count(g) < 3 ? 0 : count(g));
    }
    rows[0][0] += 1;
    const auto cm = ConfusionMatrix::from_rows(rows);
    const auto r = compute_metrics(cm);

    // Binarise every class from the raw rows.
    double total = 0;
    for (const auto& row : rows) {
      for (auto v : row) total += static_cast<double>(v);
    }
    double acc = 0, prec = 0, rec = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double tp = 0, fp = 0, fn = 0, tn = 0;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t p = 0; p < k; ++p) {
          const double v = static_cast<double>(rows[a][p]);
          if (a == c && p == c) tp += v;
          else if (p == c) fp += v;
          else if (a == c) fn += v;
          else tn += v;
        }
      }
      acc += (tp + tn) / total;
      prec += tp + fp > 0 ? tp / (tp + fp) : 0;
      rec += tp + fn > 0 ? tp / (tp + fn) : 0;
    }
    CHECK(r.accuracy_macro == doctest::Approx(acc / static_cast<double>(k)).epsilon(1e-12));
    CHECK(r.precision_macro == doctest::Approx(prec / static_cast<double>(k)).epsilon(1e-12));
    CHECK(r.recall_macro == doctest::Approx(rec / static_cast<double>(k)).epsilon(1e-12));
    const double s = r.precision_macro + r.recall_macro;
    CHECK(std::abs(r.f1_macro - (s > 0 ? 2 * r.precision_macro * r.recall_macro / s : 0)) <= 1e-12);
    for (double v : {r.accuracy_macro, r.accuracy_overall, r.precision_macro, r.recall_macro, r.f1_macro}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    for (std::size_t c = 0; c < k; ++c) CHECK(cm.tp(c) + cm.fp(c) + cm.fn(c) + cm.tn(c) == cm.total());
  }
}

TEST_CASE("median and percentile") {
  CHECK(median({3.0}) == 3.0);
  CHECK(percentile({3.0}, 95) == 3.0);
  CHECK(median({1, 4, 2, 3}) == 2.5);
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  CHECK(percentile(v, 95) == 95);
}

TEST_CASE("encrypted exact backend reproduces plaintext-poly predictions") {
  model::ModelConfig cfg;
  const auto w = model::ModelWeights::random(cfg, 3);
  const auto data = model::synth_dataset(5, 3);
  EvalOptions o;
  o.model = cfg;
  o.path = EvalPath::plain_poly;
  const auto plain = evaluate(w, data, o);
  o.path = EvalPath::encrypted_exact;
  const auto enc = evaluate(w, data, o);
  CHECK(plain.confusion == enc.confusion);
  CHECK(enc.report.stage_ms.count("conv") == 1);
  CHECK(enc.report.backend == "exact");

  o.ring_dim = 16384;
  CHECK(evaluate(w, data, o).confusion == enc.confusion);
}

TEST_CASE("metrics CSV is deterministic") {
  model::ModelConfig cfg;
  const auto w = model::ModelWeights::random(cfg, 3);
  const auto data = model::synth_dataset(5, 2);
  EvalOptions o;
  o.model = cfg;
  o.seed = 4;
  const auto a = evaluate(w, data, o).report.to_csv();
  const auto b = evaluate(w, data, o).report.to_csv();
  CHECK(a == b);
  CHECK(a.rfind("metric,value,ring_dim,activation,backend\n", 0) == 0);
}

TEST_CASE("evaluate surfaces depth overflow") {
  model::ModelConfig cfg;
  cfg.conv_act = secure::ActivationSpec::chebyshev("relu", -8, 8, 8);
  cfg.fc1_act = cfg.conv_act;
  EvalOptions o;
  o.model = cfg;
  CHECK_THROWS_AS(evaluate(model::ModelWeights::random(cfg, 1), model::synth_dataset(1, 1), o), DepthError);
}

TEST_CASE("bench on the exact backend") {
  model::ModelConfig cfg;
  BenchOptions o;
  o.model = cfg;
  o.trials = 1;
  const auto r = bench::bench(model::ModelWeights::random(cfg, 2), o);
  REQUIRE(r.stages.size() == 6);
  for (const auto& s : r.stages) {
    CHECK(s.median_ms > 0);
    CHECK(s.p95_ms == s.samples.front());
  }
  const auto csv = render_csv({r});
  CHECK(csv.rfind("stage,median_ms,p95_ms,ring_dim,activation,backend\n", 0) == 0);
  CHECK(csv.find(",8192,square,exact") != std::string::npos);
  CHECK(render_table({r}).find("activation") != std::string::npos);

  o.conv_only = true;
  o.trials = 3;
  const auto c = bench::bench(model::ModelWeights::random(cfg, 2), o);
  CHECK(c.stages.size() == 4);
  CHECK(c.stage("conv").samples.size() == 3);
}
