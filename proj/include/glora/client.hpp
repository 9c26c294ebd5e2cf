#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glora/synth.hpp"
#include "glora/tensor.hpp"
#include "glora/wire.hpp"

namespace glora {

struct ClientOptions {
  double timeout_s = 30.0;
  std::string token = "desk";
};

// A server ERROR frame, surfaced verbatim with its code.
class ServerError : public std::runtime_error {
 public:
  ServerError(uint32_t code, const std::string& msg)
      : std::runtime_error("server error " + std::to_string(code) + ": " + msg), code_(code) {}
  uint32_t code() const { return code_; }

 private:
  uint32_t code_;
};

struct InferOutcome {
  std::vector<int> tokens;
  std::string text;
};

uint64_t client_hello(const std::string& host, uint16_t port, const ClientOptions& opts = {});

// The client persists nothing but its bundle file; features go up, tokens
// come back.
InferOutcome client_infer(const std::string& host, uint16_t port, const std::string& bundle_path,
                          const Tensor& features, const ClientOptions& opts = {});

struct ClientTrainRequest {
  uint32_t steps = 200;
  double lr = 3e-3;
  uint32_t batch_size = 8;
  uint64_t seed = 0;
};

// Sends the bundle plus training slices; on success the local bundle file
// is atomically replaced (write-new-then-rename). Returns the final loss.
double client_train(const std::string& host, uint16_t port, const std::string& bundle_path,
                    const std::vector<Utterance>& data, const ClientTrainRequest& req,
                    const ClientOptions& opts = {});

}  // namespace glora
