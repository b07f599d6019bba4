#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hei/bench/evaluate.hpp"
#include "hei/ckks/serialize.hpp"
#include "hei/errors.hpp"
#include "hei/model/data.hpp"
#include "hei/model/train.hpp"
#include "hei/protocol/client.hpp"

namespace {

using namespace hei;
namespace ser = ckks::serial;

struct ActivationArgs {
  std::string name = "square";
  int degree = 8;
  std::string interval = "-8,8";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--activation", name, "square, relu or silu")->capture_default_str();
    cmd->add_option("--degree", degree, "Chebyshev degree")->capture_default_str();
    cmd->add_option("--interval", interval, "approximation interval a,b")->capture_default_str();
  }

  secure::ActivationSpec spec() const {
    if (name == "square" || name == "x2") return secure::ActivationSpec::square();
    const auto sep = interval.find_first_of(",:");
    if (sep == std::string::npos) throw ParameterError("interval must look like a,b");
    double a = 0, b = 0;
    try {
      a = std::stod(interval.substr(0, sep));
      b = std::stod(interval.substr(sep + 1));
    } catch (const std::logic_error&) {
      throw ParameterError("interval must look like a,b");
    }
    return secure::ActivationSpec::chebyshev(name, a, b, degree);
  }

  model::ModelConfig model() const {
    model::ModelConfig cfg;
    cfg.conv_act = spec();
    cfg.fc1_act = cfg.conv_act;
    return cfg;
  }
};

struct DataArgs {
  std::string data = "synth";
  std::uint64_t data_seed = 7;
  std::size_t per_class = 50;
  std::uint64_t split_seed = 7;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", data, "'synth' or a directory <root>/<class>/<images>")->capture_default_str();
    cmd->add_option("--data-seed", data_seed, "synthetic dataset seed")->capture_default_str();
    cmd->add_option("--per-class", per_class, "synthetic samples per class")->capture_default_str();
    cmd->add_option("--split-seed", split_seed, "80:20 split seed")->capture_default_str();
  }

  model::Split split() const {
    const auto all = data == "synth" ? model::synth_dataset(data_seed, per_class) : model::load_directory(data);
    return model::split_dataset(all, 0.8, split_seed);
  }
};

ckks::CkksParams make_params(std::size_t ring_dim, int depth) {
  return depth > 0 ? ckks::CkksParams::with_depth(ring_dim, depth) : ckks::CkksParams::defaults(ring_dim);
}

ckks::BackendKind backend_or_default(const std::string& name) {
  return name.empty() ? ckks::default_backend_kind() : ckks::backend_from_string(name);
}

struct LoadedKeys {
  ser::KeyFile file;
  std::unique_ptr<ckks::Backend> backend;
};

LoadedKeys load_keys(const std::string& path) {
  LoadedKeys k{ser::load_key_file(ser::read_file(path)), nullptr};
  k.backend = ckks::make_backend(k.file.keys.public_key.header.backend, k.file.context);
  return k;
}

encoding::ConvGeometry parse_geometry(const std::string& text) {
  std::vector<std::size_t> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) v.push_back(std::stoul(part));
  if (v.size() == 4) return encoding::make_geometry(v[0], v[1], v[2], v[2], v[3], v[3]);
  if (v.size() == 6) return encoding::make_geometry(v[0], v[1], v[2], v[3], v[4], v[5]);
  if (v.size() == 8) return encoding::make_geometry(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]);
  throw GeometryError("geometry must be H,W,k,s or H,W,kH,kW,sH,sW[,pH,pW]");
}

void print_values(const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) std::printf("  [%2zu] % .6f\n", i, v[i]);
}

int selftest() {
  int passed = 0, total = 0;
  auto check = [&](const std::string& name, auto&& fn) {
    ++total;
    try {
      const bool ok = fn();
      std::printf("%-34s %s\n", name.c_str(), ok ? "ok" : "FAILED");
      passed += ok;
    } catch (const std::exception& e) {
      std::printf("%-34s FAILED (%s)\n", name.c_str(), e.what());
    }
  };

  check("im2col golden fixture", [] {
    const encoding::Matrix img{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    const auto g = encoding::make_geometry(3, 3, 2, 2, 1, 1);
    const auto enc = encoding::im2col(img, g, 16);
    const std::vector<double> want{1, 2, 4, 5, 2, 3, 5, 6, 4, 5, 7, 8, 5, 6, 8, 9};
    return std::equal(want.begin(), want.end(), enc.flat.begin());
  });
  check("chebyshev x^2 degree 2", [] {
    const auto p = secure::chebyshev_fit("square", -8, 8, 2);
    return secure::grid_error(p).max_error < 1e-9;
  });
  for (auto kind : {ckks::BackendKind::exact, ckks::BackendKind::lattice}) {
    check(ckks::to_string(kind) + " backend mult + rotate", [kind] {
      auto be = ckks::make_backend(kind, ckks::CkksParams::with_depth(2048, 2));
      auto km = be->keygen(std::set<long>{3}, 11);
      std::vector<double> x(be->slot_count());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.1 * static_cast<double>(i));
      auto ct = be->encrypt(km.public_key, x);
      auto out = be->decrypt_values(km.secret_key, be->rotate(be->mult(ct, ct, km.relin_key), 3, km.galois_keys));
      double err = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double want = x[(i + 3) % x.size()] * x[(i + 3) % x.size()];
        err = std::max(err, std::abs(out[i] - want));
      }
      return err < 1e-4;
    });
  }
  check("socket round trip (exact backend)", [] {
    model::ModelConfig cfg;
    const auto w = model::ModelWeights::random(cfg, 5);
    protocol::ServerConfig sc;
    sc.model = cfg;
    protocol::Server server(w, sc);
    const auto port = server.start("127.0.0.1:0");
    auto be = ckks::make_backend(ckks::BackendKind::exact, ckks::CkksParams::defaults(8192));
    protocol::PipelineConfig pc;
    pc.model = cfg;
    const auto plan = protocol::compile_pipeline(pc, be->params());
    const auto km = be->keygen(plan.key_levels, 3);
    const auto img = model::synth_dataset(1, 1)[4].pixels;
    const auto r = protocol::client_run("127.0.0.1:" + std::to_string(port), img, km, *be);
    const auto want = model::forward_plain(w, cfg, img, model::ActMode::poly);
    double err = 0;
    for (std::size_t i = 0; i < want.size(); ++i) err = std::max(err, std::abs(want[i] - r.logits[i]));
    return err < 1e-9;
  });
  std::printf("selftest: %d/%d passed\n", passed, total);
  return passed == total ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homomorphically encrypted CNN inference"};
  app.require_subcommand(1);

  // keygen
  auto* keygen = app.add_subcommand("keygen", "generate a key set for the inference pipeline");
  std::size_t kg_ring = 8192;
  int kg_depth = 0;
  std::string kg_out = "keys.hek", kg_backend;
  std::optional<std::uint64_t> kg_seed;
  ActivationArgs kg_act;
  keygen->add_option("--ring-dim", kg_ring, "ring dimension R")->capture_default_str();
  keygen->add_option("--depth", kg_depth, "modulus chain depth (default: per ring dimension)");
  keygen->add_option("--out", kg_out, "key file")->capture_default_str();
  keygen->add_option("--backend", kg_backend, "exact or lattice (default: $HEI_BACKEND or exact)");
  keygen->add_option("--seed", kg_seed, "deterministic keys (testing only)");
  kg_act.add_to(keygen);

  // train
  auto* train = app.add_subcommand("train", "train the plaintext model");
  DataArgs tr_data;
  model::TrainOptions tr_opt;
  tr_opt.epochs = 30;
  tr_opt.seed = 3;
  std::string tr_out = "weights.hew", tr_mode;
  ActivationArgs tr_act;
  tr_data.add_to(train);
  train->add_option("--epochs", tr_opt.epochs)->capture_default_str();
  train->add_option("--lr", tr_opt.lr)->capture_default_str();
  train->add_option("--batch", tr_opt.batch_size)->capture_default_str();
  train->add_option("--seed", tr_opt.seed)->capture_default_str();
  train->add_option("--mode", tr_mode, "exact or poly activations during training (default: poly for Chebyshev)");
  train->add_option("--out", tr_out)->capture_default_str();
  tr_act.add_to(train);

  // encrypt
  auto* encrypt = app.add_subcommand("encrypt", "im2col-encode and encrypt an image");
  std::string en_image, en_keys, en_out = "image.hec", en_geometry = "28,28,7,3";
  int en_level = -1;
  encrypt->add_option("--image", en_image, "PNG/JPEG or .csv grid")->required();
  encrypt->add_option("--keys", en_keys, "key file")->required();
  encrypt->add_option("--geometry", en_geometry, "H,W,k,s or H,W,kH,kW,sH,sW[,pH,pW]")->capture_default_str();
  encrypt->add_option("--level", en_level, "encryption level (default: top)");
  encrypt->add_option("--out", en_out)->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "run the inference server");
  std::string sv_weights, sv_listen = "127.0.0.1:9000";
  std::size_t sv_cap_mib = 256, sv_pin_ring = 0;
  ActivationArgs sv_act;
  serve->add_option("--weights", sv_weights)->required();
  serve->add_option("--listen", sv_listen, "host:port (port 0 picks one)")->capture_default_str();
  serve->add_option("--frame-cap-mib", sv_cap_mib)->capture_default_str();
  serve->add_option("--ring-dim", sv_pin_ring, "only accept this ring dimension's default parameters");
  sv_act.add_to(serve);

  // infer
  auto* infer = app.add_subcommand("infer", "classify an image on a remote server");
  std::string in_server, in_image, in_keys;
  double in_timeout = 30;
  infer->add_option("--server", in_server, "host:port")->required();
  infer->add_option("--image", in_image)->required();
  infer->add_option("--keys", in_keys)->required();
  infer->add_option("--timeout", in_timeout, "seconds")->capture_default_str();

  // decrypt
  auto* decrypt = app.add_subcommand("decrypt", "decrypt a ciphertext file");
  std::string de_in, de_keys;
  std::size_t de_count = 11;
  decrypt->add_option("--in", de_in)->required();
  decrypt->add_option("--keys", de_keys)->required();
  decrypt->add_option("--count", de_count, "slots to print")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "accuracy, macro metrics and confusion matrix");
  std::string ev_weights, ev_backend, ev_csv;
  std::vector<std::size_t> ev_rings{8192};
  int ev_depth = 0;
  std::optional<std::size_t> ev_limit;
  DataArgs ev_data;
  ActivationArgs ev_act;
  eval->add_option("--weights", ev_weights)->required();
  eval->add_option("--backend", ev_backend, "plain-exact, plain-poly, exact or lattice (default: $HEI_BACKEND)");
  eval->add_option("--ring-dim", ev_rings, "one or more ring dimensions")->capture_default_str();
  eval->add_option("--depth", ev_depth, "modulus chain depth override");
  eval->add_option("--limit", ev_limit, "evaluate the first n test samples");
  eval->add_option("--csv", ev_csv, "write metrics CSV here");
  ev_data.add_to(eval);
  ev_act.add_to(eval);

  // bench
  auto* benchc = app.add_subcommand("bench", "per-stage timing");
  std::size_t be_trials = 5;
  std::vector<std::size_t> be_rings{8192};
  std::string be_backend, be_csv, be_weights;
  bool be_conv_only = false;
  int be_depth = 0;
  ActivationArgs be_act;
  benchc->add_option("--trials", be_trials)->capture_default_str();
  benchc->add_option("--ring-dim", be_rings)->capture_default_str();
  benchc->add_option("--backend", be_backend, "exact or lattice (default: $HEI_BACKEND)");
  benchc->add_option("--depth", be_depth, "modulus chain depth override");
  benchc->add_option("--weights", be_weights, "weights (default: random)");
  benchc->add_flag("--conv-only", be_conv_only, "time the convolution stage only");
  benchc->add_option("--csv", be_csv, "write CSV here");
  be_act.add_to(benchc);

  app.add_subcommand("selftest", "quick end-to-end health check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (keygen->parsed()) {
      const auto params = make_params(kg_ring, kg_depth);
      protocol::PipelineConfig pc;
      pc.model = kg_act.model();
      const auto plan = protocol::compile_pipeline(pc, params);
      const auto be = ckks::make_backend(backend_or_default(kg_backend), params);
      const auto km = be->keygen(plan.key_levels, kg_seed);
      const auto bytes = ser::save_key_file(params, km);
      ser::write_file(kg_out, bytes);
      std::printf("%s\nbackend %s, depth %d, %zu rotation keys, %.1f MiB -> %s\n", params.canonical_string().c_str(),
                  ckks::to_string(be->kind()).c_str(), plan.depth, plan.rotation_steps.size(),
                  static_cast<double>(bytes.size()) / (1 << 20), kg_out.c_str());
    } else if (train->parsed()) {
      const auto cfg = tr_act.model();
      tr_opt.mode = tr_mode.empty() ? (cfg.conv_act.kind == secure::ActivationKind::square ? model::ActMode::exact
                                                                                          : model::ActMode::poly)
                    : tr_mode == "poly" ? model::ActMode::poly
                                        : model::ActMode::exact;
      const auto split = tr_data.split();
      const auto r = model::train(split.train, cfg, tr_opt);
      model::save_weights(r.weights, tr_out);
      std::printf("final loss %.4f\n", r.epoch_loss.back());
      std::printf("train accuracy %.2f%%, test accuracy exact %.2f%% poly %.2f%% (%zu/%zu samples) -> %s\n",
                  100 * model::accuracy(r.weights, cfg, split.train, model::ActMode::exact),
                  100 * model::accuracy(r.weights, cfg, split.test, model::ActMode::exact),
                  100 * model::accuracy(r.weights, cfg, split.test, model::ActMode::poly), split.train.size(),
                  split.test.size(), tr_out.c_str());
    } else if (encrypt->parsed()) {
      const auto k = load_keys(en_keys);
      const auto g = parse_geometry(en_geometry);
      const auto img = model::load_image(en_image, g.H);
      const int level = en_level < 0 ? k.backend->max_level() : en_level;
      const auto ct = protocol::encrypt_image(*k.backend, k.file.keys.public_key, img, g, level);
      ser::write_file(en_out, ser::save(ct));
      std::printf("encrypted %s at level %d -> %s\n", en_image.c_str(), level, en_out.c_str());
    } else if (serve->parsed()) {
      protocol::ServerConfig sc;
      sc.model = sv_act.model();
      sc.frame_cap = sv_cap_mib << 20;
      if (sv_pin_ring) sc.pinned_params = ckks::CkksParams::defaults(sv_pin_ring);
      const auto w = model::load_weights(sv_weights, sc.model);
      protocol::Server server(w, sc);
      const auto port = server.start(sv_listen);
      std::printf("listening on port %u\n", port);
      std::fflush(stdout);
      server.wait();
    } else if (infer->parsed()) {
      const auto k = load_keys(in_keys);
      const auto img = model::load_image(in_image);
      protocol::ClientOptions o;
      o.timeout = std::chrono::milliseconds(static_cast<long>(in_timeout * 1000));
      const auto r = protocol::client_run(in_server, img, k.file.keys, *k.backend, o);
      std::printf("label %zu\n", r.label);
      print_values(r.logits);
    } else if (decrypt->parsed()) {
      const auto k = load_keys(de_keys);
      const auto ct = ser::load_ciphertext(ser::read_file(de_in), *k.file.context);
      auto v = k.backend->decrypt_values(k.file.keys.secret_key, ct);
      v.resize(std::min(de_count, v.size()));
      std::printf("level %d, scale 2^%.2f, argmax %zu\n", ct.level, std::log2(ct.scale), model::argmax(v));
      print_values(v);
    } else if (eval->parsed()) {
      const auto cfg = ev_act.model();
      const auto w = model::load_weights(ev_weights, cfg);
      const auto split = ev_data.split();
      std::string csv;
      for (std::size_t ring : ev_rings) {
        bench::EvalOptions o;
        o.path = ev_backend.empty() ? (ckks::default_backend_kind() == ckks::BackendKind::lattice
                                           ? bench::EvalPath::encrypted_lattice
                                           : bench::EvalPath::encrypted_exact)
                                    : bench::eval_path_from_string(ev_backend);
        o.ring_dim = ring;
        if (ev_depth > 0) o.params = make_params(ring, ev_depth);
        o.model = cfg;
        o.limit = ev_limit;
        const auto r = bench::evaluate(w, split.test, o);
        std::printf("%s%s\n", r.report.render().c_str(), r.confusion.render().c_str());
        const auto part = r.report.to_csv();
        csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
      }
      if (!ev_csv.empty()) std::ofstream(ev_csv) << csv;
    } else if (benchc->parsed()) {
      const auto cfg = be_act.model();
      const auto w = be_weights.empty() ? model::ModelWeights::random(cfg, 1) : model::load_weights(be_weights, cfg);
      std::vector<bench::BenchResult> results;
      for (std::size_t ring : be_rings) {
        bench::BenchOptions o;
        o.backend = backend_or_default(be_backend);
        o.ring_dim = ring;
        if (be_depth > 0) o.params = make_params(ring, be_depth);
        o.model = cfg;
        o.trials = be_trials;
        o.conv_only = be_conv_only;
        results.push_back(bench::bench(w, o));
      }
      std::printf("%s", bench::render_table(results).c_str());
      if (!be_csv.empty()) std::ofstream(be_csv) << bench::render_csv(results);
    } else {
      return selftest();
    }
  } catch (const RemoteError& e) {
    std::fprintf(stderr, "server error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
