#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "hei/ckks/evaluator.hpp"
#include "hei/protocol/frame.hpp"
#include "hei/protocol/server.hpp"

namespace hei::protocol {

struct ClientOptions {
  std::chrono::milliseconds timeout{std::chrono::seconds(30)};
  std::size_t frame_cap = kDefaultFrameCap;
};

// Frame-level client. ERROR replies surface as RemoteError.
class Client {
 public:
  static Client connect(const std::string& address, ClientOptions options = {});

  HelloReply hello(const ckks::CkksParams& params, ckks::BackendKind backend);
  void send_keys(const ckks::EvaluationKeys& keys);
  ckks::Ciphertext infer(const ckks::Ciphertext& ct, const ckks::Context& ctx);

  Frame exchange(const Frame& request);
  Socket& socket() { return socket_; }

 private:
  explicit Client(Socket s, ClientOptions o) : socket_(std::move(s)), options_(o) {}
  Frame expect(const Frame& request, FrameType type);

  Socket socket_;
  ClientOptions options_;
};

struct ClientResult {
  std::size_t label = 0;
  std::vector<double> logits;  // first `classes` decrypted slots
  ckks::Ciphertext response;
};

// HELLO, KEYS, INFER_REQ of the im2col-encoded image, decrypt, argmax.
// `rng` fixes the encryption randomness (tests); nullptr draws fresh.
ClientResult client_run(const std::string& address, const encoding::Matrix& image, const ckks::KeyMaterial& keys,
                        const ckks::Backend& backend, ClientOptions options = {}, ckks::Prng* rng = nullptr);

// Encrypts the image as client_run would, for a session already past KEYS.
ckks::Ciphertext encrypt_image(const ckks::Backend& backend, const ckks::PublicKey& pk, const encoding::Matrix& image,
                               const encoding::ConvGeometry& g, int level, ckks::Prng* rng = nullptr);

ClientResult decrypt_logits(const ckks::Backend& backend, const ckks::SecretKey& sk, const ckks::Ciphertext& ct,
                            std::size_t classes);

}  // namespace hei::protocol
