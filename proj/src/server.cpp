#include "glora/server.hpp"

#include <algorithm>

#include "glora/adapters.hpp"
#include "glora/bundle.hpp"
#include "glora/trainer.hpp"

namespace glora {

namespace {

// RAII counters backing the audit hook.
struct Count {
  std::atomic<int>& c;
  explicit Count(std::atomic<int>& counter) : c(counter) { ++c; }
  ~Count() { --c; }
};

struct ByteCount {
  std::atomic<int64_t>& c;
  int64_t n;
  ByteCount(std::atomic<int64_t>& counter, int64_t bytes) : c(counter), n(bytes) { c += n; }
  ~ByteCount() { c -= n; }
};

}  // namespace

Server::Server(std::shared_ptr<const SeqModel> model, ServerLimits limits,
               std::shared_ptr<const TokenTable> table)
    : model_(std::move(model)), table_(std::move(table)), limits_(limits) {
  if (!model_) throw std::invalid_argument("server needs a model");
  boot_params_hash_ = model_->params_hash();
}

Server::~Server() { stop(); }

AuditReport Server::audit() const {
  AuditReport r;
  r.active_sessions = active_sessions_.load();
  r.live_adapter_views = live_adapter_views_.load();
  r.retained_request_bytes = retained_request_bytes_.load();
  r.base_params_hash = model_->params_hash();
  return r;
}

void Server::start(const std::string& host, uint16_t port) {
  if (listener_) throw std::runtime_error("server already started");
  listener_ = std::make_unique<TcpListener>(TcpListener::bind(host, port));
  port_ = listener_->port();
  stopping_ = false;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  stopping_ = true;
  if (listener_) listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> sessions;
  {
    std::lock_guard<std::mutex> lock(sessions_mu_);
    sessions.swap(sessions_);
  }
  for (std::thread& t : sessions)
    if (t.joinable()) t.join();
  listener_.reset();
}

void Server::accept_loop() {
  while (!stopping_) {
    std::unique_ptr<TcpStream> client = listener_->accept();
    if (!client) break;
    std::lock_guard<std::mutex> lock(sessions_mu_);
    sessions_.emplace_back([this, stream = std::shared_ptr<TcpStream>(std::move(client))] {
      try {
        handle_session(*stream);
      } catch (...) {
        // session errors must never take the server down
      }
      stream->close();
    });
  }
}

void Server::handle_session(Stream& stream) {
  Count session_guard(active_sessions_);

  if (active_sessions_.load() > limits_.max_sessions) {
    write_frame(stream, MsgType::Error,
                encode_error({static_cast<uint32_t>(WireErrc::busy), "session limit reached"}));
    return;
  }

  auto send_error = [&](WireErrc code, const std::string& msg) {
    write_frame(stream, MsgType::Error, encode_error({static_cast<uint32_t>(code), msg}));
  };

  // Plugs the client bundle into the placeholder registry; the Adapter
  // lives only within the enclosing scope.
  auto plug = [&](const std::vector<uint8_t>& bundle_bytes) -> Adapter {
    AdapterBundle bundle = deserialize_bundle(bundle_bytes.data(), bundle_bytes.size());
    if (bundle.fingerprint != model_->fingerprint())
      throw ErrorMsg{static_cast<uint32_t>(WireErrc::fingerprint_mismatch),
                     "bundle fingerprint does not match the serving model"};
    if (bundle.rank < 1 || bundle.rank > limits_.max_rank)
      throw ErrorMsg{static_cast<uint32_t>(WireErrc::unsupported_adapter),
                     "rank " + std::to_string(bundle.rank) + " outside placeholder bounds"};
    return attach(*model_, bundle);
  };

  Frame frame;
  while (true) {
    try {
      if (!read_frame(stream, frame, limits_.max_frame_bytes)) return;  // clean EOF
    } catch (const FrameError& e) {
      if (e.kind() == FrameError::Kind::Oversize) {
        try {
          send_error(WireErrc::oversize, e.what());  // stream is desynced; drop it
        } catch (...) {
        }
      }
      return;
    } catch (...) {
      return;  // transport failure: clean disconnect
    }

    try {
      switch (static_cast<MsgType>(frame.type)) {
        case MsgType::Hello: {
          HelloMsg req = decode_hello(frame.payload);
          HelloMsg resp;
          resp.protocol_version = kProtocolVersion;
          resp.fingerprint = model_->fingerprint();
          resp.token = req.token;  // echo for session logs only
          write_frame(stream, MsgType::Hello, encode_hello(resp));
          break;
        }
        case MsgType::InferReq: {
          InferReqMsg req = decode_infer_req(frame.payload);
          ByteCount bytes_guard(retained_request_bytes_,
                                static_cast<int64_t>(frame.payload.size()));
          Adapter adapter = plug(req.bundle);
          Count view_guard(live_adapter_views_);
          InferRespMsg resp;
          resp.tokens = greedy_decode(*model_, req.features, &adapter);
          if (table_) resp.text = table_->decode(resp.tokens);
          write_frame(stream, MsgType::InferResp, encode_infer_resp(resp));
          break;
        }
        case MsgType::TrainReq: {
          TrainReqMsg req = decode_train_req(frame.payload);
          ByteCount bytes_guard(retained_request_bytes_,
                                static_cast<int64_t>(frame.payload.size()));
          Adapter adapter = plug(req.bundle);
          Count view_guard(live_adapter_views_);
          TrainConfig cfg = TrainConfig::adapter_defaults();
          cfg.steps = static_cast<int>(std::min<uint32_t>(
              req.steps, static_cast<uint32_t>(limits_.max_train_steps)));
          cfg.lr = req.lr;
          cfg.batch_size = static_cast<int>(req.batch_size);
          cfg.seed = req.seed;
          TrainRespMsg resp;
          if (cfg.steps > 0) {
            if (req.utterances.empty())
              throw std::invalid_argument("train request carries no utterances");
            TrainReport rep = train_adapter(*model_, adapter, req.utterances, cfg);
            resp.final_loss = rep.final_loss;
          }
          resp.bundle = serialize_bundle(bundle_from_adapter(adapter, model_->fingerprint()));
          write_frame(stream, MsgType::TrainResp, encode_train_resp(resp));
          break;
        }
        case MsgType::Bye:
          write_frame(stream, MsgType::Bye, {});
          return;
        default:
          send_error(WireErrc::malformed,
                     "unknown message type " + std::to_string(frame.type));
          break;
      }
    } catch (const ErrorMsg& e) {
      try {
        write_frame(stream, MsgType::Error, encode_error(e));
      } catch (...) {
        return;
      }
    } catch (const std::exception& e) {
      try {
        send_error(WireErrc::malformed, e.what());
      } catch (...) {
        return;
      }
    }
  }
}

}  // namespace glora
