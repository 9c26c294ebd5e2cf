#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "glora/korean.hpp"
#include "glora/model.hpp"
#include "glora/net.hpp"
#include "glora/wire.hpp"

namespace glora {

struct ServerLimits {
  size_t max_frame_bytes = kDefaultMaxFrameBytes;
  int max_sessions = 8;
  int max_train_steps = 1000;
  int max_rank = 16;  // placeholder slots cover kinds 0-3 up to this rank
};

// Exposed audit hook: client-derived state live right now. After every
// session ends all three counts must be zero; the base model never
// changes.
struct AuditReport {
  int active_sessions = 0;
  int live_adapter_views = 0;
  int64_t retained_request_bytes = 0;
  uint64_t base_params_hash = 0;
};

// Serves a frozen base model. Per request the client bundle is plugged
// into the adapter placeholder, used, and dropped: nothing client-derived
// is stored past the response, and the base tensors are shared read-only
// across sessions.
class Server {
 public:
  Server(std::shared_ptr<const SeqModel> model, ServerLimits limits,
         std::shared_ptr<const TokenTable> table = nullptr);
  ~Server();

  // transport-agnostic session loop; also used directly by tests
  void handle_session(Stream& stream);

  void start(const std::string& host, uint16_t port);  // spawns the accept loop
  void stop();
  uint16_t port() const { return port_; }

  AuditReport audit() const;

 private:
  void accept_loop();

  std::shared_ptr<const SeqModel> model_;
  std::shared_ptr<const TokenTable> table_;
  ServerLimits limits_;
  uint64_t boot_params_hash_ = 0;

  std::unique_ptr<TcpListener> listener_;
  uint16_t port_ = 0;
  std::thread accept_thread_;
  std::vector<std::thread> sessions_;
  std::mutex sessions_mu_;
  std::atomic<bool> stopping_{false};

  mutable std::atomic<int> active_sessions_{0};
  mutable std::atomic<int> live_adapter_views_{0};
  mutable std::atomic<int64_t> retained_request_bytes_{0};
};

}  // namespace glora
