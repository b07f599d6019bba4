#include "hei/bench/evaluate.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>

#include "hei/errors.hpp"
#include "hei/protocol/client.hpp"
#include "hei/protocol/pipeline.hpp"

namespace hei::bench {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

const std::vector<std::string> kStages = {"encode", "encrypt", "conv", "activation", "fc", "decrypt"};

std::string activation_label(const model::ModelConfig& m) {
  const auto a = m.conv_act.name();
  const auto b = m.fc1_act.name();
  return a == b ? a : a + "+" + b;
}

// Keys, pipeline and encryption randomness for one encrypted run.
struct EncryptedSession {
  std::shared_ptr<ckks::Backend> backend;
  std::unique_ptr<protocol::CompiledPipeline> pipeline;
  ckks::KeyMaterial keys;
  ckks::EvaluationKeys eval_keys;
  ckks::Prng rng;

  EncryptedSession(ckks::BackendKind kind, const ckks::CkksParams& params, const model::ModelWeights& w,
                   const protocol::PipelineConfig& cfg, std::uint64_t seed)
      : rng(ckks::Prng::seed_from_u64(seed, 0x656e63)) {
    protocol::compile_pipeline(cfg, params);
    backend = ckks::make_backend(kind, params);
    pipeline = std::make_unique<protocol::CompiledPipeline>(backend, w, cfg);
    keys = backend->keygen(pipeline->plan().key_levels, seed);
    eval_keys = keys.evaluation_keys();
  }

  // Per-stage milliseconds are added into `times`.
  std::vector<double> infer(const model::Matrix& image, std::map<std::string, double>& times) {
    const auto& plan = pipeline->plan();
    auto t0 = Clock::now();
    const auto flat = protocol::encode_input(image, plan.geometry, backend->slot_count());
    const auto pt = backend->encode(flat, plan.input_level, backend->default_scale());
    times["encode"] += ms_since(t0);
    t0 = Clock::now();
    auto ct = backend->encrypt(keys.public_key, pt, &rng);
    ct.valid_slots = plan.geometry.required_slots();
    times["encrypt"] += ms_since(t0);
    const auto out = pipeline->run(ct, eval_keys, [&](std::string_view stage, double ms) {
      times[std::string(stage)] += ms;
    });
    t0 = Clock::now();
    auto values = backend->decrypt_values(keys.secret_key, out);
    values.resize(plan.output_slots);
    times["decrypt"] += ms_since(t0);
    return values;
  }
};

}  // namespace

std::string to_string(EvalPath p) {
  switch (p) {
    case EvalPath::plain_exact: return "plain-exact";
    case EvalPath::plain_poly: return "plain-poly";
    case EvalPath::encrypted_exact: return "exact";
    case EvalPath::encrypted_lattice: return "lattice";
  }
  return "?";
}

EvalPath eval_path_from_string(const std::string& name) {
  if (name == "plain-exact") return EvalPath::plain_exact;
  if (name == "plain-poly") return EvalPath::plain_poly;
  if (name == "exact" || name == "encrypted-exact") return EvalPath::encrypted_exact;
  if (name == "lattice" || name == "encrypted-lattice") return EvalPath::encrypted_lattice;
  throw ParameterError("unknown evaluation path '" + name + "'");
}

ckks::CkksParams params_for(std::size_t ring_dim, const std::optional<ckks::CkksParams>& override_params) {
  return override_params ? *override_params : ckks::CkksParams::defaults(ring_dim);
}

Evaluation evaluate(const model::ModelWeights& weights, const model::Dataset& data, const EvalOptions& options) {
  const auto& cfg = options.model;
  const std::size_t n = std::min(data.size(), options.limit.value_or(data.size()));
  if (n == 0) throw ParameterError("evaluation needs at least one sample");
  Evaluation ev;
  ev.confusion = ConfusionMatrix(cfg.classes);

  std::unique_ptr<EncryptedSession> session;
  const auto params = params_for(options.ring_dim, options.params);
  if (options.path == EvalPath::encrypted_exact || options.path == EvalPath::encrypted_lattice) {
    protocol::PipelineConfig pc;
    pc.model = cfg;
    const auto kind =
        options.path == EvalPath::encrypted_exact ? ckks::BackendKind::exact : ckks::BackendKind::lattice;
    session = std::make_unique<EncryptedSession>(kind, params, weights, pc, options.seed);
  }

  std::map<std::string, std::vector<double>> samples;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data[i];
    std::vector<double> logits;
    switch (options.path) {
      case EvalPath::plain_exact: logits = model::forward_plain(weights, cfg, s.pixels, model::ActMode::exact); break;
      case EvalPath::plain_poly: logits = model::forward_plain(weights, cfg, s.pixels, model::ActMode::poly); break;
      default: {
        std::map<std::string, double> times;
        logits = session->infer(s.pixels, times);
        for (const auto& [k, v] : times) samples[k].push_back(v);
      }
    }
    const std::size_t pred = model::argmax(logits);
    ev.predictions.push_back(pred);
    ev.confusion.add(s.label, pred);
  }
  ev.report = compute_metrics(ev.confusion);
  for (const auto& [k, v] : samples) ev.report.stage_ms[k] = median(v);
  ev.report.ring_dim = params.ring_dim;
  ev.report.activation = activation_label(cfg);
  ev.report.backend = to_string(options.path);
  return ev;
}

const StageStats& BenchResult::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.stage == name) return s;
  }
  throw ParameterError("no timing for stage '" + name + "'");
}

BenchResult bench(const model::ModelWeights& weights, const BenchOptions& options) {
  const auto params = params_for(options.ring_dim, options.params);
  protocol::PipelineConfig pc;
  pc.model = options.model;
  if (options.conv_only) {
    pc.input_level = protocol::compile_pipeline(pc, params).input_level;
    pc.conv_only = true;
  }
  EncryptedSession session(options.backend, params, weights, pc, options.seed);
  const auto images = model::synth_dataset(options.seed, 1, options.model.classes, options.model.image);

  std::map<std::string, std::vector<double>> samples;
  const std::size_t trials = std::max<std::size_t>(options.trials, 1);
  for (std::size_t t = 0; t < trials; ++t) {
    std::map<std::string, double> times;
    session.infer(images[t % images.size()].pixels, times);
    for (const auto& [k, v] : times) samples[k].push_back(v);
  }
  BenchResult r;
  r.ring_dim = params.ring_dim;
  r.activation = activation_label(options.model);
  r.backend = ckks::to_string(options.backend);
  for (const auto& name : kStages) {
    auto it = samples.find(name);
    if (it == samples.end()) continue;
    r.stages.push_back({name, median(it->second), percentile(it->second, 95), it->second});
  }
  return r;
}

std::string render_table(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-11s %12s %12s %9s %-12s %-8s\n", "stage", "median_ms", "p95_ms", "ring_dim",
                "activation", "backend");
  os << buf;
  for (const auto& r : results) {
    for (const auto& s : r.stages) {
      std::snprintf(buf, sizeof buf, "%-11s %12.3f %12.3f %9zu %-12s %-8s\n", s.stage.c_str(), s.median_ms, s.p95_ms,
                    r.ring_dim, r.activation.c_str(), r.backend.c_str());
      os << buf;
    }
  }
  return os.str();
}

std::string render_csv(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  os << "stage,median_ms,p95_ms,ring_dim,activation,backend\n";
  char buf[64];
  for (const auto& r : results) {
    for (const auto& s : r.stages) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", s.median_ms, s.p95_ms);
      os << s.stage << ',' << buf << ',' << r.ring_dim << ',' << r.activation << ',' << r.backend << '\n';
    }
  }
  return os.str();
}

}  // namespace hei::bench
