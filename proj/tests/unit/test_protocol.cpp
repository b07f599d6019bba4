#include <random>

#include "doctest.h"
#include "hei/ckks/serialize.hpp"
#include "hei/errors.hpp"
#include "hei/model/data.hpp"
#include "hei/protocol/client.hpp"
#include "hei/protocol/pipeline.hpp"
#include "hei/protocol/server.hpp"

using namespace hei;
using namespace hei::protocol;

// The server side can neither hold nor use a secret key.
template <typename T>
concept HasSecretKey = requires(T t) { t.secret_key; } || requires(T t) { t.sk; };
static_assert(!HasSecretKey<SessionState>);
template <typename E>
concept CanDecrypt = requires(const E& e, const ckks::SecretKey& sk, const ckks::Ciphertext& c) { e.decrypt(sk, c); };
static_assert(!CanDecrypt<ckks::Evaluator>);
static_assert(CanDecrypt<ckks::Backend>);
static_assert(std::is_same_v<decltype(std::declval<const CompiledPipeline&>().evaluator()), const ckks::Evaluator&>);

namespace {

struct Fixture {
  model::ModelConfig cfg;
  model::ModelWeights weights;
  std::unique_ptr<Server> server;
  std::string address;
  std::unique_ptr<ckks::Backend> backend;
  PipelinePlan plan;
  ckks::KeyMaterial keys;

  explicit Fixture(model::ModelWeights w = model::ModelWeights::random({}, 21), ServerConfig sc = {},
                   ckks::CkksParams params = ckks::CkksParams::defaults(8192))
      : weights(std::move(w)) {
    sc.model = cfg;
    server = std::make_unique<Server>(weights, sc);
    address = "127.0.0.1:" + std::to_string(server->start("127.0.0.1:0"));
    backend = ckks::make_backend(ckks::BackendKind::exact, params);
    PipelineConfig pc;
    pc.model = cfg;
    plan = compile_pipeline(pc, params);
    keys = backend->keygen(plan.key_levels, 77);
  }
};

Frame read_reply(Socket& s) {
  auto r = read_frame(s);
  REQUIRE(r.status == ReadStatus::ok);
  return r.frame;
}

}  // namespace

TEST_CASE("frame wire format") {
  const Frame f{FrameType::infer_req, {0xAA, 0xBB, 0xCC}};
  const auto bytes = f.encode();
  CHECK(bytes == std::vector<std::uint8_t>{0, 0, 0, 3, 0x03, 0xAA, 0xBB, 0xCC});
  CHECK(Frame::error_frame("boom").encode() == std::vector<std::uint8_t>{0, 0, 0, 4, 0x7F, 'b', 'o', 'o', 'm'});
  CHECK(is_known_type(0x01));
  CHECK(is_known_type(0x7F));
  CHECK_FALSE(is_known_type(0x05));
  CHECK(parse_address("10.0.0.1:80") == std::pair<std::string, std::uint16_t>{"10.0.0.1", 80});
  CHECK(parse_address("9000").first == "127.0.0.1");
  CHECK_THROWS_AS(parse_address("host:port"), ProtocolError);
}

TEST_CASE("HELLO_PARAMS reply layout") {
  HelloReply h;
  h.params_hash = 0x01020304;
  h.steps = {1, 0x0A0B};
  h.depth = 6;
  h.input_level = 6;
  h.key_levels = {{1, 3}, {0x0A0B, 5}};
  h.geometry = encoding::make_geometry(28, 28, 7, 7, 3, 3);
  h.classes = 11;
  h.activation = "square,square";
  const auto bytes = h.encode();
  const std::vector<std::uint8_t> head{1, 2, 3, 4, 0, 0, 0, 2, 1, 0, 0, 0, 0x0B, 0x0A, 0, 0, 0, 0, 0, 6};
  CHECK(std::equal(head.begin(), head.end(), bytes.begin()));
  const auto back = HelloReply::decode(bytes);
  CHECK(back.params_hash == h.params_hash);
  CHECK(back.steps == h.steps);
  CHECK(back.key_levels == h.key_levels);
  CHECK(back.geometry == h.geometry);
  CHECK(back.activation == h.activation);
  auto cut = bytes;
  cut.resize(10);
  CHECK_THROWS_AS(HelloReply::decode(cut), ProtocolError);
}

TEST_CASE("compile_pipeline: depth, levels and rotation set") {
  const auto params = ckks::CkksParams::defaults(8192);
  PipelineConfig pc;
  const auto plan = compile_pipeline(pc, params);
  CHECK(plan.depth == 6);
  CHECK(plan.input_level == 6);
  REQUIRE(plan.stages.size() == 6);
  CHECK(plan.stages.back().name == "fc2");
  CHECK(plan.stages.back().output_level == 0);

  std::set<long> want;
  for (long r = 1; r <= 48; ++r) want.insert(64 * r);
  for (long c = 1; c <= 3; ++c) want.insert(4096 - 64 * c);
  for (long c = 0; c <= 3; ++c) want.insert(4096 - 256 - 64 * c);
  for (long i = 1; i <= 255; ++i) want.insert(i);
  CHECK(plan.rotation_steps == want);
  CHECK(plan.key_levels.at(64 * 48) == 5);
  CHECK(plan.key_levels.at(4096 - 64) == 4);
  CHECK(plan.key_levels.at(64) == 5);   // conv and fc1 share step 64
  CHECK(plan.key_levels.at(200) == 3);  // fc1 only
  CHECK(plan.key_levels.at(1) == 3);    // fc1 and fc2

  PipelineConfig conv_only;
  conv_only.conv_only = true;
  std::set<long> conv;
  for (long r = 1; r <= 48; ++r) conv.insert(64 * r);
  CHECK(compile_pipeline(conv_only, params).rotation_steps == conv);
  CHECK(compile_pipeline(conv_only, params).depth == 1);
}

TEST_CASE("compile_pipeline rejects chains that are too short") {
  PipelineConfig pc;
  pc.model.conv_act = secure::ActivationSpec::chebyshev("relu", -8, 8, 8);
  pc.model.fc1_act = pc.model.conv_act;
  CHECK_THROWS_WITH_AS(compile_pipeline(pc, ckks::CkksParams::defaults(8192)),
                       doctest::Contains("chain of 21 primes"), DepthError);
  const auto plan = compile_pipeline(pc, ckks::CkksParams::with_depth(8192, 20));
  CHECK(plan.depth == 20);
  CHECK(compile_pipeline(PipelineConfig{}, ckks::CkksParams::defaults(32768)).rotation_steps.count(16384 - 64) == 1);
}

TEST_CASE("verify_galois_keys names the missing step") {
  auto be = ckks::make_backend(ckks::BackendKind::exact, ckks::CkksParams::defaults(8192));
  const auto plan = compile_pipeline({}, be->params());
  auto partial = plan.key_levels;
  partial.erase(64);
  const auto km = be->keygen(partial);
  CHECK_THROWS_WITH_AS(verify_galois_keys(plan, km.galois_keys), doctest::Contains("step 64"), KeyError);
}

TEST_CASE("socket inference matches the plaintext forward pass") {
  Fixture f;
  const auto images = model::synth_dataset(3, 2);
  for (std::size_t i = 0; i < images.size(); i += 2) {
    const auto r = client_run(f.address, images[i].pixels, f.keys, *f.backend);
    const auto want = model::forward_plain(f.weights, f.cfg, images[i].pixels, model::ActMode::poly);
    CHECK(r.label == model::argmax(want));
    for (std::size_t k = 0; k < 11; ++k) CHECK(r.logits[k] == doctest::Approx(want[k]).epsilon(1e-9));
  }
}

TEST_CASE("zero weights classify as label 0") {
  Fixture f(model::ModelWeights::zeros({}));
  const auto r = client_run(f.address, model::synth_dataset(1, 1)[5].pixels, f.keys, *f.backend);
  CHECK(r.label == 0);
}

TEST_CASE("session reuse: two requests on one connection") {
  Fixture f;
  auto client = Client::connect(f.address);
  const auto hello = client.hello(f.backend->params(), f.backend->kind());
  CHECK(hello.depth == 6);
  CHECK(hello.steps.size() == f.plan.rotation_steps.size());
  client.send_keys(f.keys.evaluation_keys());
  const auto images = model::synth_dataset(4, 1);
  for (int i : {0, 7}) {
    const auto ct = encrypt_image(*f.backend, f.keys.public_key, images[i].pixels, hello.geometry,
                                  static_cast<int>(hello.input_level));
    const auto out = decrypt_logits(*f.backend, f.keys.secret_key, client.infer(ct, f.backend->context()), 11);
    CHECK(out.label == model::argmax(model::forward_plain(f.weights, f.cfg, images[i].pixels, model::ActMode::poly)));
  }
}

TEST_CASE("server state machine errors") {
  Fixture f;
  SUBCASE("request before KEYS") {
    auto client = Client::connect(f.address);
    client.hello(f.backend->params(), f.backend->kind());
    const auto ct = encrypt_image(*f.backend, f.keys.public_key, model::synth_dataset(1, 1)[0].pixels,
                                  f.plan.geometry, f.plan.input_level);
    CHECK_THROWS_WITH_AS(client.infer(ct, f.backend->context()), "keys not established", RemoteError);
  }
  SUBCASE("missing Galois key for step 64") {
    auto partial = f.plan.key_levels;
    partial.erase(64);
    const auto km = f.backend->keygen(partial, 1);
    CHECK_THROWS_WITH_AS(client_run(f.address, model::synth_dataset(1, 1)[0].pixels, km, *f.backend),
                         doctest::Contains("rotation step 64"), RemoteError);
  }
  SUBCASE("depth exhaustion names the stage") {
    auto client = Client::connect(f.address);
    client.hello(f.backend->params(), f.backend->kind());
    client.send_keys(f.keys.evaluation_keys());
    const auto ct = encrypt_image(*f.backend, f.keys.public_key, model::synth_dataset(1, 1)[0].pixels,
                                  f.plan.geometry, 2);
    CHECK_THROWS_WITH_AS(client.infer(ct, f.backend->context()), doctest::Contains("activation1"), RemoteError);
  }
  SUBCASE("ciphertext under foreign keys") {
    auto client = Client::connect(f.address);
    client.hello(f.backend->params(), f.backend->kind());
    client.send_keys(f.keys.evaluation_keys());
    const auto other = f.backend->keygen(std::set<long>{}, 5);
    const auto ct = encrypt_image(*f.backend, other.public_key, model::synth_dataset(1, 1)[0].pixels,
                                  f.plan.geometry, f.plan.input_level);
    CHECK_THROWS_AS(client.infer(ct, f.backend->context()), RemoteError);
  }
}

TEST_CASE("raw frames: oversized, unknown type, malformed payload") {
  ServerConfig sc;
  sc.frame_cap = 1 << 20;
  Fixture f(model::ModelWeights::random({}, 21), sc);
  const auto [host, port] = parse_address(f.address);

  SUBCASE("oversized frame gets ERROR and close") {
    auto s = connect_to(host, port, std::chrono::seconds(5));
    std::vector<std::uint8_t> header;
    put_u32_be(header, (1u << 20) + 1);
    header.push_back(0x03);
    s.write_all(header);
    s.shutdown_write();
    const auto reply = read_reply(s);
    CHECK(reply.type == FrameType::error);
    CHECK(reply.error_message().find("cap") != std::string::npos);
    CHECK(read_frame(s).status == ReadStatus::eof);
  }
  SUBCASE("unknown type gets ERROR and the session continues") {
    auto s = connect_to(host, port, std::chrono::seconds(5));
    write_frame(s, {static_cast<FrameType>(0x42), {1, 2}});
    const auto reply = read_reply(s);
    CHECK(reply.type == FrameType::error);
    CHECK(reply.error_message().find("0x42") != std::string::npos);
    write_frame(s, {FrameType::hello, encode_hello_request(f.backend->params(), f.backend->kind())});
    CHECK(read_reply(s).type == FrameType::hello);
  }
  SUBCASE("garbage KEYS payload gets ERROR and close") {
    auto s = connect_to(host, port, std::chrono::seconds(5));
    write_frame(s, {FrameType::hello, encode_hello_request(f.backend->params(), f.backend->kind())});
    CHECK(read_reply(s).type == FrameType::hello);
    write_frame(s, {FrameType::keys, {1, 2, 3, 4, 5}});
    const auto reply = read_reply(s);
    CHECK(reply.type == FrameType::error);
    CHECK(reply.error_message().find("malformed") != std::string::npos);
    CHECK(read_frame(s).status == ReadStatus::eof);
  }
  SUBCASE("truncated header gets ERROR") {
    auto s = connect_to(host, port, std::chrono::seconds(5));
    s.write_all(std::vector<std::uint8_t>{0, 0, 1});
    s.shutdown_write();
    const auto reply = read_reply(s);
    CHECK(reply.type == FrameType::error);
    CHECK(reply.error_message().find("truncated") != std::string::npos);
    CHECK(read_frame(s).status == ReadStatus::eof);
  }
  SUBCASE("truncated frame gets ERROR") {
    auto s = connect_to(host, port, std::chrono::seconds(5));
    std::vector<std::uint8_t> header;
    put_u32_be(header, 100);
    header.push_back(0x01);
    header.push_back(0);
    s.write_all(header);
    s.shutdown_write();
    CHECK(read_reply(s).type == FrameType::error);
  }
}

TEST_CASE("parameter hash pinning") {
  ServerConfig sc;
  sc.pinned_params = ckks::CkksParams::defaults(16384);
  Fixture f(model::ModelWeights::random({}, 21), sc);
  auto client = Client::connect(f.address);
  CHECK_THROWS_WITH_AS(client.hello(f.backend->params(), f.backend->kind()), doctest::Contains("hash mismatch"),
                       RemoteError);
}

TEST_CASE("client timeout") {
  auto listener = listen_on("127.0.0.1", 0);
  const auto port = local_port(listener);
  ClientOptions o;
  o.timeout = std::chrono::milliseconds(200);
  auto client = Client::connect("127.0.0.1:" + std::to_string(port), o);
  CHECK_THROWS_WITH_AS(client.hello(ckks::CkksParams::defaults(8192), ckks::BackendKind::exact),
                       doctest::Contains("timeout"), ProtocolError);
}

TEST_CASE("transport equivalence on the exact backend") {
  Fixture f;
  const auto img = model::synth_dataset(6, 1)[2].pixels;
  ckks::Prng r1(ckks::Prng::seed_from_u64(99));
  const auto remote = client_run(f.address, img, f.keys, *f.backend, {}, &r1);

  PipelineConfig pc;
  pc.model = f.cfg;
  const CompiledPipeline local(ckks::make_evaluator(ckks::BackendKind::exact, f.backend->context_ptr()), f.weights, pc);
  ckks::Prng r2(ckks::Prng::seed_from_u64(99));
  const auto ct = encrypt_image(*f.backend, f.keys.public_key, img, local.plan().geometry, local.plan().input_level, &r2);
  const auto direct = decrypt_logits(*f.backend, f.keys.secret_key, local.run(ct, f.keys.evaluation_keys()), 11);
  CHECK(remote.logits == direct.logits);
}

TEST_SUITE("lattice" * doctest::skip()) {
  TEST_CASE("transport equivalence on the lattice backend") {
    model::ModelConfig cfg;
    const auto w = model::ModelWeights::random(cfg, 8);
    ServerConfig sc;
    sc.model = cfg;
    Server server(w, sc);
    const auto address = "127.0.0.1:" + std::to_string(server.start("127.0.0.1:0"));
    auto be = ckks::make_backend(ckks::BackendKind::lattice, ckks::CkksParams::defaults(8192));
    PipelineConfig pc;
    pc.model = cfg;
    const CompiledPipeline local(ckks::make_evaluator(ckks::BackendKind::lattice, be->context_ptr()), w, pc);
    const auto km = be->keygen(local.plan().key_levels, 31);
    const auto img = model::synth_dataset(6, 1)[9].pixels;

    ckks::Prng r1(ckks::Prng::seed_from_u64(5));
    const auto remote = client_run(address, img, km, *be, {}, &r1);
    ckks::Prng r2(ckks::Prng::seed_from_u64(5));
    const auto ct = encrypt_image(*be, km.public_key, img, local.plan().geometry, local.plan().input_level, &r2);
    const auto direct = decrypt_logits(*be, km.secret_key, local.run(ct, km.evaluation_keys()), 11);
    CHECK(remote.logits == direct.logits);
    const auto want = model::forward_plain(w, cfg, img, model::ActMode::poly);
    for (std::size_t k = 0; k < 11; ++k) CHECK(std::abs(remote.logits[k] - want[k]) < 1e-3);
  }
}
