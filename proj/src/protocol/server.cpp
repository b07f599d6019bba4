#include "hei/protocol/server.hpp"

#include <sys/socket.h>

#include <cerrno>
#include <cstdio>
#include <iostream>

#include "hei/ckks/serialize.hpp"
#include "hei/errors.hpp"

namespace hei::protocol {

namespace ser = ckks::serial;

std::vector<std::uint8_t> encode_hello_request(const ckks::CkksParams& params, ckks::BackendKind backend) {
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(backend)};
  const auto p = ser::save(params);
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<std::uint8_t> HelloReply::encode() const {
  std::vector<std::uint8_t> out;
  put_u32_be(out, params_hash);
  put_u32_be(out, static_cast<std::uint32_t>(steps.size()));
  for (auto s : steps) put_u32_le(out, s);
  put_u32_be(out, depth);
  put_u32_be(out, input_level);
  for (auto s : steps) {
    const auto it = key_levels.find(s);
    put_u32_be(out, it == key_levels.end() ? 0u : static_cast<std::uint32_t>(it->second));
  }
  for (std::size_t v : {geometry.H, geometry.W, geometry.kH, geometry.kW, geometry.sH, geometry.sW, geometry.pH,
                        geometry.pW}) {
    put_u32_be(out, static_cast<std::uint32_t>(v));
  }
  put_u32_be(out, classes);
  put_u32_be(out, static_cast<std::uint32_t>(activation.size()));
  out.insert(out.end(), activation.begin(), activation.end());
  return out;
}

HelloReply HelloReply::decode(std::span<const std::uint8_t> payload) {
  HelloReply r;
  std::size_t off = 0;
  auto be = [&] {
    const auto v = get_u32_be(payload, off);
    off += 4;
    return v;
  };
  r.params_hash = be();
  const std::uint32_t count = be();
  if (count > (payload.size() - off) / 4) throw ProtocolError("HELLO_PARAMS step count exceeds payload");
  for (std::uint32_t i = 0; i < count; ++i) {
    r.steps.push_back(get_u32_le(payload, off));
    off += 4;
  }
  r.depth = be();
  r.input_level = be();
  for (auto s : r.steps) r.key_levels[s] = static_cast<int>(be());
  std::size_t g[8];
  for (auto& v : g) v = be();
  r.geometry = encoding::make_geometry(g[0], g[1], g[2], g[3], g[4], g[5], g[6], g[7]);
  r.classes = be();
  const std::uint32_t len = be();
  if (len != payload.size() - off) throw ProtocolError("HELLO_PARAMS activation name length mismatch");
  r.activation.assign(payload.begin() + static_cast<std::ptrdiff_t>(off), payload.end());
  return r;
}

Server::Server(model::ModelWeights weights, ServerConfig config)
    : weights_(std::move(weights)), config_(std::move(config)) {
  config_.model.validate();
  weights_.check_shapes(config_.model);
}

Server::~Server() { stop(); }

std::uint16_t Server::start(const std::string& listen_address) {
  const auto [host, port] = parse_address(listen_address);
  listener_ = listen_on(host, port);
  port_ = local_port(listener_);
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void Server::wait() {
  std::unique_lock lock(stop_mutex_);
  stopped_cv_.wait(lock, [&] { return stopped_; });
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (listener_.valid()) ::shutdown(listener_.fd(), SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  {
    std::lock_guard lock(conn_mutex_);
    for (auto& c : connections_) {
      if (!c.done) ::shutdown(c.fd, SHUT_RDWR);
    }
  }
  reap(true);
  {
    std::lock_guard lock(stop_mutex_);
    stopped_ = true;
  }
  stopped_cv_.notify_all();
}

void Server::reap(bool all) {
  std::list<Connection> finished;
  {
    std::lock_guard lock(conn_mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      auto next = std::next(it);
      if (all || it->done) finished.splice(finished.end(), connections_, it);
      it = next;
    }
  }
  for (auto& c : finished) {
    if (c.thread.joinable()) c.thread.join();
  }
}

void Server::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listener_.fd(), nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    reap(false);
    Socket s(fd);
    s.set_timeout(config_.io_timeout);
    std::lock_guard lock(conn_mutex_);
    auto& conn = connections_.emplace_back();
    conn.fd = fd;
    Connection* c = &conn;
    conn.thread = std::thread([this, c, sock = std::move(s)]() mutable { serve(std::move(sock), c); });
  }
}

void Server::serve(Socket socket, Connection* conn) {
  SessionState session;
  auto send_quietly = [&](const Frame& f) {
    try {
      write_frame(socket, f);
    } catch (const std::exception&) {
    }
  };
  try {
    while (!stopping_) {
      ReadResult r = read_frame(socket, config_.frame_cap);
      if (r.status == ReadStatus::eof) break;
      if (r.status == ReadStatus::oversized) {
        send_quietly(Frame::error_frame("frame of " + std::to_string(r.declared_length) + " bytes exceeds the " +
                                        std::to_string(config_.frame_cap) + "-byte cap"));
        break;
      }
      if (r.status == ReadStatus::truncated) {
        send_quietly(Frame::error_frame("truncated frame: connection closed mid-frame"));
        break;
      }
      Reply reply;
      if (!is_known_type(r.raw_type)) {
        char hex[8];
        std::snprintf(hex, sizeof hex, "0x%02X", r.raw_type);
        reply.frame = Frame::error_frame(std::string("unknown frame type ") + hex);
      } else {
        reply = handle(session, r.frame);
      }
      write_frame(socket, reply.frame);
      if (reply.close) break;
    }
  } catch (const TimeoutError& e) {
    send_quietly(Frame::error_frame(e.what()));
  } catch (const std::exception&) {
    // Transport failure: nothing more can be sent on this socket.
  }
  // Half-close and drain what the peer already sent, so unread input does not
  // turn the close into a reset that discards the last reply.
  try {
    socket.shutdown_write();
    socket.set_timeout(std::chrono::seconds(2));
    std::uint8_t sink[4096];
    std::size_t drained = 0;
    while (drained < (64u << 20)) {
      const ssize_t n = ::recv(socket.fd(), sink, sizeof sink, 0);
      if (n <= 0) break;
      drained += static_cast<std::size_t>(n);
    }
  } catch (const std::exception&) {
  }
  socket.close();
  conn->done = true;
}

std::shared_ptr<const CompiledPipeline> Server::pipeline_for(const ckks::CkksParams& params,
                                                             ckks::BackendKind backend) {
  const auto key = std::make_pair(params.hash(), backend);
  std::lock_guard lock(pipeline_mutex_);
  if (auto it = pipelines_.find(key); it != pipelines_.end()) return it->second;
  PipelineConfig cfg;
  cfg.model = config_.model;
  compile_pipeline(cfg, params);  // reject before building any tables
  auto ev = ckks::make_evaluator(backend, ckks::Context::create(params));
  auto pipeline = std::make_shared<const CompiledPipeline>(std::move(ev), weights_, cfg);
  pipelines_[key] = pipeline;
  return pipeline;
}

namespace {

Frame hello_reply(const CompiledPipeline& p) {
  const auto& plan = p.plan();
  HelloReply r;
  r.params_hash = p.evaluator().context().params_hash();
  for (long s : plan.rotation_steps) r.steps.push_back(static_cast<std::uint32_t>(s));
  r.depth = static_cast<std::uint32_t>(plan.depth);
  r.input_level = static_cast<std::uint32_t>(plan.input_level);
  for (const auto& [s, l] : plan.key_levels) r.key_levels[s] = l;
  r.geometry = plan.geometry;
  r.classes = static_cast<std::uint32_t>(plan.output_slots);
  const auto& m = p.config().model;
  r.activation = m.conv_act.name() + "," + m.fc1_act.name();
  return {FrameType::hello, r.encode()};
}

void check_key_headers(const ckks::EvaluationKeys& k, ckks::BackendKind backend) {
  for (const ckks::KeyHeader* h : {&k.public_key.header, &k.relin_key.header, &k.galois_keys.header}) {
    if (h->backend != backend) throw IncompatibleError("key backend does not match the negotiated backend");
    if (h->key_id != k.public_key.header.key_id) throw IncompatibleError("evaluation keys come from different key sets");
  }
}

}  // namespace

Reply Server::handle(SessionState& session, const Frame& request) {
  try {
    switch (request.type) {
      case FrameType::hello: {
        if (request.payload.empty()) throw FormatError("empty HELLO_PARAMS payload");
        const std::uint8_t b = request.payload[0];
        if (b > static_cast<std::uint8_t>(ckks::BackendKind::lattice)) throw FormatError("unknown backend id");
        const auto params = ser::load_params(std::span(request.payload).subspan(1));
        if (config_.pinned_params && params.hash() != config_.pinned_params->hash()) {
          return {Frame::error_frame("parameter hash mismatch: server requires " +
                                     config_.pinned_params->canonical_string()),
                  false};
        }
        auto pipeline = pipeline_for(params, static_cast<ckks::BackendKind>(b));
        session.params = params;
        session.backend = static_cast<ckks::BackendKind>(b);
        session.pipeline = std::move(pipeline);
        session.keys.reset();
        return {hello_reply(*session.pipeline), false};
      }
      case FrameType::keys: {
        if (!session.pipeline) return {Frame::error_frame("HELLO_PARAMS not received"), false};
        auto keys = ser::load_evaluation_keys(request.payload, session.pipeline->evaluator().context());
        check_key_headers(keys, session.backend);
        verify_galois_keys(session.pipeline->plan(), keys.galois_keys);
        session.keys = std::move(keys);
        return {{FrameType::keys, {}}, false};
      }
      case FrameType::infer_req: {
        if (!session.keys) return {Frame::error_frame("keys not established"), false};
        const auto& ev = session.pipeline->evaluator();
        const auto ct = ser::load_ciphertext(request.payload, ev.context());
        if (ct.backend != session.backend) throw IncompatibleError("ciphertext backend does not match the session");
        if (ct.key_id != session.keys->public_key.header.key_id) {
          throw IncompatibleError("ciphertext was not encrypted under the session keys");
        }
        const auto out = session.pipeline->run(ct, *session.keys);
        ++session.requests;
        return {{FrameType::infer_resp, ser::save(out)}, false};
      }
      case FrameType::infer_resp:
      case FrameType::error:
        return {Frame::error_frame("unexpected " + to_string(request.type) + " frame from client"), false};
    }
    return {Frame::error_frame("unknown frame type"), false};
  } catch (const FormatError& e) {
    return {Frame::error_frame(std::string("malformed frame: ") + e.what()), true};
  } catch (const ProtocolError& e) {
    return {Frame::error_frame(std::string("malformed frame: ") + e.what()), true};
  } catch (const Error& e) {
    return {Frame::error_frame(e.what()), false};
  } catch (const std::exception& e) {
    return {Frame::error_frame(std::string("internal error: ") + e.what()), true};
  }
}

void server_run(const std::string& listen_address, const model::ModelWeights& weights, const ServerConfig& config) {
  Server server(weights, config);
  const auto port = server.start(listen_address);
  std::cerr << "listening on port " << port << std::endl;
  server.wait();
}

}  // namespace hei::protocol
