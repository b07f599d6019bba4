#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "hei/ckks/types.hpp"
#include "hei/model/model.hpp"
#include "hei/protocol/frame.hpp"
#include "hei/protocol/pipeline.hpp"

namespace hei::protocol {

struct ServerConfig {
  model::ModelConfig model;
  std::size_t frame_cap = kDefaultFrameCap;
  std::chrono::milliseconds io_timeout{std::chrono::minutes(5)};
  // When set, HELLO with any other parameter set is rejected.
  std::optional<ckks::CkksParams> pinned_params;
};

// Per-connection server state. Public material only: there is no secret-key
// field and the pipeline exposes an Evaluator, which cannot decrypt.
struct SessionState {
  std::optional<ckks::CkksParams> params;
  ckks::BackendKind backend = ckks::BackendKind::exact;
  std::shared_ptr<const CompiledPipeline> pipeline;  // weights, activation, geometry
  std::optional<ckks::EvaluationKeys> keys;
  std::uint64_t requests = 0;
};

struct Reply {
  Frame frame;
  bool close = false;
};

// HELLO_PARAMS request: backend byte, then the serialized parameter set.
std::vector<std::uint8_t> encode_hello_request(const ckks::CkksParams& params, ckks::BackendKind backend);

// HELLO_PARAMS reply. The first three fields are the fixed header
// (params hash, steps, depth); the rest is an extension block.
struct HelloReply {
  std::uint32_t params_hash = 0;
  std::vector<std::uint32_t> steps;
  std::uint32_t depth = 0;
  std::uint32_t input_level = 0;
  ckks::RotationKeyPlan key_levels;
  encoding::ConvGeometry geometry;
  std::uint32_t classes = 0;
  std::string activation;

  std::vector<std::uint8_t> encode() const;
  static HelloReply decode(std::span<const std::uint8_t> payload);
};

class Server {
 public:
  Server(model::ModelWeights weights, ServerConfig config = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and accepts on a background thread. Returns the bound port.
  std::uint16_t start(const std::string& listen_address);
  // Blocks until stop() is called from another thread.
  void wait();
  void stop();
  std::uint16_t port() const { return port_; }

  // One request/response step of the state machine.
  Reply handle(SessionState& session, const Frame& request);

  std::shared_ptr<const CompiledPipeline> pipeline_for(const ckks::CkksParams& params, ckks::BackendKind backend);

 private:
  struct Connection {
    std::thread thread;
    int fd = -1;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void serve(Socket socket, Connection* conn);
  void reap(bool all);

  model::ModelWeights weights_;
  ServerConfig config_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  std::mutex conn_mutex_;
  std::list<Connection> connections_;
  std::mutex pipeline_mutex_;
  std::map<std::pair<std::uint32_t, ckks::BackendKind>, std::shared_ptr<const CompiledPipeline>> pipelines_;
  std::mutex stop_mutex_;
  std::condition_variable stopped_cv_;
  bool stopped_ = false;
};

// Serves until the process is terminated.
void server_run(const std::string& listen_address, const model::ModelWeights& weights, const ServerConfig& config);

}  // namespace hei::protocol
