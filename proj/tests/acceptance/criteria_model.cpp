#include <chrono>
#include <fstream>

#include "common.hpp"
#include "hei/bench/evaluate.hpp"
#include "hei/ckks/evaluator.hpp"
#include "hei/encoding/layout.hpp"
#include "hei/protocol/client.hpp"
#include "hei/protocol/pipeline.hpp"
#include "hei/protocol/server.hpp"
#include "hei/secure/chebyshev.hpp"
#include "json.hpp"

namespace acceptance {

using namespace hei;

namespace {

encoding::Matrix matrix_from_json(const nlohmann::json& j) {
  encoding::Matrix m(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

double percent(double fraction) { return 100.0 * fraction; }

}  // namespace

// The committed 3x3 / 2x2 hand-worked fixture, plaintext arithmetic only.
Outcome criterion_4() {
  Outcome out;
  std::ifstream in(std::string(HEI_FIXTURE_DIR) + "/im2col_golden.json");
  if (!in) {
    out.check(false, "fixture im2col_golden.json not found");
    return out;
  }
  const auto j = nlohmann::json::parse(in);
  const auto image = matrix_from_json(j["image"]);
  const auto kernel = matrix_from_json(j["kernel"]);
  const auto s = j["stride"].get<std::size_t>();
  const auto want_flat = j["flat_prefix"].get<std::vector<double>>();
  const auto want_conv = j["conv"].get<std::vector<double>>();
  const auto g = encoding::make_geometry(image.rows, image.cols, kernel.rows, kernel.cols, s, s);

  const std::size_t slots = 32;
  const auto enc = encoding::im2col(image, g, slots);
  const std::vector<double> flat(enc.flat.begin(), enc.flat.begin() + static_cast<long>(want_flat.size()));
  bool tail_zero = true;
  for (std::size_t i = want_flat.size(); i < slots; ++i) tail_zero = tail_zero && enc.flat[i] == 0.0;
  out.check(flat == want_flat && tail_zero, "flat prefix [1,2,4,5,2,3,5,6,4,5,7,8,5,6,8,9], zeros after");

  // Elementwise product with the replicated kernel, then block sums.
  const auto k = encoding::encode_kernel(kernel, g, slots);
  std::vector<double> via_layout(g.block(), 0.0);
  for (std::size_t r = 0; r < g.taps(); ++r)
    for (std::size_t b = 0; b < g.block(); ++b) {
      const std::size_t i = r * g.block() + b;
      via_layout[b] += enc.flat[i] * k.flat[i];
    }
  out.check(via_layout == want_conv, "im2col product conv output [37,47,67,77]");
  out.check(model::conv2d(image, kernel, g) == want_conv, "direct sliding-window conv output [37,47,67,77]");
  return out;
}

Outcome criterion_5() {
  Outcome out;
  const auto sq = secure::chebyshev_fit([](double x) { return x * x; }, -1.0, 1.0, 2, "square");
  const double sq_err = secure::grid_error(sq, [](double x) { return x * x; }).max_error;
  out.check(sq_err <= 1e-9, fmt("degree-2 fit of x^2 on [-1,1]: grid max error %.3e <= 1e-9", sq_err));

  std::string silu_line = "SiLU grid max error on [-8,8]:";
  bool decreasing = true;
  double prev = INFINITY;
  for (int d : {2, 4, 8, 16}) {
    const double e = secure::grid_error(secure::chebyshev_fit("silu", -8, 8, d)).max_error;
    silu_line += fmt(" d%d=%.4e", d, e);
    decreasing = decreasing && e < prev;
    prev = e;
  }
  out.check(decreasing, silu_line + " (strictly decreasing)");

  // Default ReLU degree.
  const auto relu = secure::grid_error(secure::chebyshev_fit("relu", -8, 8, 8));
  out.check(std::abs(relu.argmax) <= 0.5,
            fmt("ReLU degree 8 on [-8,8]: grid-error argmax x=%.3f (max error %.4f), want |x| <= 0.5", relu.argmax,
                relu.max_error));
  std::string odd = "ReLU argmax for odd degrees (no node at 0):";
  for (int d : {3, 5, 7, 9}) odd += fmt(" d%d=%.3f", d, secure::grid_error(secure::chebyshev_fit("relu", -8, 8, d)).argmax);
  out.note(odd);
  return out;
}

// client_run against a live server on a local socket, lattice backend.
Outcome criterion_6() {
  Outcome out;
  const auto s = train_surrogate();
  protocol::ServerConfig sc;
  sc.model = s.cfg;
  protocol::Server server(s.weights, sc);
  const std::string address = "127.0.0.1:" + std::to_string(server.start("127.0.0.1:0"));

  const auto params = ckks::CkksParams::defaults(8192);
  const auto backend = ckks::make_backend(ckks::BackendKind::lattice, params);
  protocol::PipelineConfig pc;
  pc.model = s.cfg;
  const auto plan = protocol::compile_pipeline(pc, params);
  const auto keys = backend->keygen(plan.key_levels, 606);
  ckks::Prng rng(ckks::Prng::seed_from_u64(6, 1));

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = std::min<std::size_t>(100, s.split.test.size());
  std::size_t agree = 0;
  double worst_logit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& img = s.split.test[i].pixels;
    const auto r = protocol::client_run(address, img, keys, *backend, {}, &rng);
    const auto plain = model::forward_plain(s.weights, s.cfg, img, model::ActMode::poly);
    agree += r.label == model::argmax(plain) ? 1 : 0;
    worst_logit = std::max(worst_logit, max_abs_diff(r.logits, plain, plain.size()));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  server.stop();

  out.check(n == 100 && agree >= 99, fmt("encrypted label == plaintext poly label on %zu of %zu images (want >= 99)",
                                         agree, n));
  out.note(fmt("max |encrypted logit - plaintext logit| = %.3e", worst_logit));
  out.note(fmt("square activation, R=8192, %.1f s for %zu sessions (target < 600 s)", secs, n));
  return out;
}

Outcome criterion_7() {
  Outcome out;
  const auto s = train_surrogate();
  bench::EvalOptions opt;
  opt.model = s.cfg;
  opt.ring_dim = 8192;
  opt.seed = 707;
  auto run = [&](bench::EvalPath p) {
    opt.path = p;
    return bench::evaluate(s.weights, s.split.test, opt).report;
  };
  const auto exact = run(bench::EvalPath::plain_exact);
  const auto poly = run(bench::EvalPath::plain_poly);
  const auto lat = run(bench::EvalPath::encrypted_lattice);
  const double a_exact = percent(exact.accuracy_overall);
  const double a_poly = percent(poly.accuracy_overall);
  const double a_lat = percent(lat.accuracy_overall);
  out.note(fmt("accuracy on %zu test images: plaintext-exact %.3f%%, plaintext-poly %.3f%%, encrypted-lattice %.3f%%",
               s.split.test.size(), a_exact, a_poly, a_lat));
  out.check(std::abs(a_lat - a_poly) <= 1.0, fmt("|lattice - poly| = %.3f pp <= 1", std::abs(a_lat - a_poly)));
  out.check(std::abs(a_lat - a_exact) <= 3.0, fmt("|lattice - exact| = %.3f pp <= 3", std::abs(a_lat - a_exact)));
  out.check(std::abs(a_poly - a_exact) <= 3.0, fmt("|poly - exact| = %.3f pp <= 3", std::abs(a_poly - a_exact)));
  out.note(fmt("macro F1: exact %.4f, poly %.4f, lattice %.4f", exact.f1_macro, poly.f1_macro, lat.f1_macro));
  return out;
}

Outcome criterion_8() {
  Outcome out;
  const auto s = train_surrogate();
  const std::vector<std::size_t> dims = {8192, 16384, 32768};

  std::vector<bench::Evaluation> evals;
  for (auto r : dims) {
    bench::EvalOptions opt;
    opt.model = s.cfg;
    opt.path = bench::EvalPath::encrypted_exact;
    opt.ring_dim = r;
    evals.push_back(bench::evaluate(s.weights, s.split.test, opt));
  }
  bool same = true;
  for (std::size_t i = 1; i < evals.size(); ++i) {
    const auto& a = evals[0];
    const auto& b = evals[i];
    same = same && a.confusion == b.confusion && a.predictions == b.predictions &&
           a.report.accuracy_macro == b.report.accuracy_macro &&
           a.report.accuracy_overall == b.report.accuracy_overall &&
           a.report.precision_macro == b.report.precision_macro && a.report.recall_macro == b.report.recall_macro &&
           a.report.f1_macro == b.report.f1_macro;
  }
  out.check(same, fmt("exact-backend metrics identical at R=8192/16384/32768 (accuracy %.3f%%, macro F1 %.4f)",
                      percent(evals[0].report.accuracy_overall), evals[0].report.f1_macro));

  std::vector<double> conv_ms;
  for (auto r : dims) {
    bench::BenchOptions bo;
    bo.backend = ckks::BackendKind::lattice;
    bo.ring_dim = r;
    bo.model = s.cfg;
    bo.trials = 5;
    bo.conv_only = true;
    conv_ms.push_back(bench::bench(s.weights, bo).stage("conv").median_ms);
  }
  out.check(conv_ms[0] < conv_ms[1] && conv_ms[1] < conv_ms[2],
            fmt("lattice median conv ms: %.2f (8192) < %.2f (16384) < %.2f (32768)", conv_ms[0], conv_ms[1],
                conv_ms[2]));
  return out;
}

}  // namespace acceptance
