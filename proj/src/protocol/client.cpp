#include "hei/protocol/client.hpp"

#include "hei/ckks/serialize.hpp"
#include "hei/errors.hpp"

namespace hei::protocol {

namespace ser = ckks::serial;

Client Client::connect(const std::string& address, ClientOptions options) {
  const auto [host, port] = parse_address(address);
  return Client(connect_to(host, port, options.timeout), options);
}

Frame Client::exchange(const Frame& request) {
  write_frame(socket_, request);
  ReadResult r = read_frame(socket_, options_.frame_cap);
  switch (r.status) {
    case ReadStatus::ok: break;
    case ReadStatus::eof: throw ProtocolError("server closed the connection");
    case ReadStatus::truncated: throw ProtocolError("truncated reply from server");
    case ReadStatus::oversized: throw ProtocolError("reply exceeds the frame cap");
  }
  if (!is_known_type(r.raw_type)) throw ProtocolError("unknown frame type in reply");
  return std::move(r.frame);
}

Frame Client::expect(const Frame& request, FrameType type) {
  Frame reply = exchange(request);
  if (reply.type == FrameType::error) throw RemoteError(reply.error_message());
  if (reply.type != type) {
    throw ProtocolError("expected " + to_string(type) + " reply, got " + to_string(reply.type));
  }
  return reply;
}

HelloReply Client::hello(const ckks::CkksParams& params, ckks::BackendKind backend) {
  const Frame reply = expect({FrameType::hello, encode_hello_request(params, backend)}, FrameType::hello);
  HelloReply h = HelloReply::decode(reply.payload);
  if (h.params_hash != params.hash()) {
    throw IncompatibleError("parameter hash mismatch: server answered " + std::to_string(h.params_hash) +
                            ", client uses " + std::to_string(params.hash()));
  }
  return h;
}

void Client::send_keys(const ckks::EvaluationKeys& keys) { expect({FrameType::keys, ser::save(keys)}, FrameType::keys); }

ckks::Ciphertext Client::infer(const ckks::Ciphertext& ct, const ckks::Context& ctx) {
  const Frame reply = expect({FrameType::infer_req, ser::save(ct)}, FrameType::infer_resp);
  return ser::load_ciphertext(reply.payload, ctx);
}

ckks::Ciphertext encrypt_image(const ckks::Backend& backend, const ckks::PublicKey& pk, const encoding::Matrix& image,
                               const encoding::ConvGeometry& g, int level, ckks::Prng* rng) {
  const auto flat = encode_input(image, g, backend.slot_count());
  auto ct = backend.encrypt(pk, backend.encode(flat, level, backend.default_scale()), rng);
  ct.valid_slots = g.required_slots();
  return ct;
}

ClientResult decrypt_logits(const ckks::Backend& backend, const ckks::SecretKey& sk, const ckks::Ciphertext& ct,
                            std::size_t classes) {
  const auto slots = backend.decrypt_values(sk, ct);
  if (classes > slots.size()) throw ShapeError("more classes than slots");
  ClientResult r;
  r.logits.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(classes));
  r.label = model::argmax(r.logits);
  r.response = ct;
  return r;
}

ClientResult client_run(const std::string& address, const encoding::Matrix& image, const ckks::KeyMaterial& keys,
                        const ckks::Backend& backend, ClientOptions options, ckks::Prng* rng) {
  Client client = Client::connect(address, options);
  const HelloReply hello = client.hello(backend.params(), backend.kind());
  client.send_keys(keys.evaluation_keys());
  const auto ct = encrypt_image(backend, keys.public_key, image, hello.geometry,
                                static_cast<int>(hello.input_level), rng);
  const auto out = client.infer(ct, backend.context());
  return decrypt_logits(backend, keys.secret_key, out, hello.classes);
}

}  // namespace hei::protocol
