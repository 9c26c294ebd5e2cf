#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "glora/synth.hpp"
#include "glora/tensor.hpp"

namespace glora {

// Frame layout on the byte stream:
//   payload length u32 LE | message type u8 | payload bytes
// The protocol assumes a reliable ordered transport and defines framing
// only.
enum class MsgType : uint8_t {
  Hello = 0x01,
  InferReq = 0x02,
  InferResp = 0x03,
  TrainReq = 0x04,
  TrainResp = 0x05,
  Error = 0x06,
  Bye = 0x07,
};

constexpr uint8_t kProtocolVersion = 1;
constexpr size_t kDefaultMaxFrameBytes = 64ull << 20;

// ERROR frame codes
enum class WireErrc : uint32_t {
  malformed = 1,
  fingerprint_mismatch = 2,
  oversize = 3,
  unsupported_adapter = 4,
  busy = 5,
  internal = 6,
};

struct Frame {
  uint8_t type = 0;
  std::vector<uint8_t> payload;
};

// Reliable ordered byte stream.
class Stream {
 public:
  virtual ~Stream() = default;
  virtual size_t read_some(uint8_t* buf, size_t n) = 0;  // 0 = EOF
  virtual void write_all(const uint8_t* buf, size_t n) = 0;
  virtual void close() = 0;

  // false on EOF before the first byte; throws on EOF mid-buffer
  bool read_exact(uint8_t* buf, size_t n);
};

class FrameError : public std::runtime_error {
 public:
  enum class Kind { Oversize, Truncated };
  FrameError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// false on clean EOF at a frame boundary
bool read_frame(Stream& s, Frame& out, size_t max_payload);
void write_frame(Stream& s, MsgType type, const std::vector<uint8_t>& payload);

// --- message payloads ------------------------------------------------------

struct HelloMsg {
  uint8_t protocol_version = kProtocolVersion;
  uint64_t fingerprint = 0;  // server fills; 0 in requests
  std::string token;         // echoed verbatim
};

struct InferReqMsg {
  std::vector<uint8_t> bundle;
  Tensor features;  // sent as [frames x dim] f32
};

struct InferRespMsg {
  std::vector<int> tokens;
  std::string text;
};

struct TrainReqMsg {
  std::vector<uint8_t> bundle;
  std::vector<Utterance> utterances;  // features + targets travel inline
  uint32_t steps = 0;
  double lr = 3e-3;
  uint32_t batch_size = 8;
  uint64_t seed = 0;
};

struct TrainRespMsg {
  std::vector<uint8_t> bundle;
  double final_loss = 0.0;
};

struct ErrorMsg {
  uint32_t code = 0;
  std::string message;
};

std::vector<uint8_t> encode_hello(const HelloMsg&);
HelloMsg decode_hello(const std::vector<uint8_t>&);
std::vector<uint8_t> encode_infer_req(const InferReqMsg&);
InferReqMsg decode_infer_req(const std::vector<uint8_t>&);
std::vector<uint8_t> encode_infer_resp(const InferRespMsg&);
InferRespMsg decode_infer_resp(const std::vector<uint8_t>&);
std::vector<uint8_t> encode_train_req(const TrainReqMsg&);
TrainReqMsg decode_train_req(const std::vector<uint8_t>&);
std::vector<uint8_t> encode_train_resp(const TrainRespMsg&);
TrainRespMsg decode_train_resp(const std::vector<uint8_t>&);
std::vector<uint8_t> encode_error(const ErrorMsg&);
ErrorMsg decode_error(const std::vector<uint8_t>&);

// --- in-process transport ---------------------------------------------------

// One direction of a duplex pair; blocking reads, never drops bytes.
class BytePipe {
 public:
  void write(const uint8_t* p, size_t n);
  size_t read_some(uint8_t* buf, size_t n);  // blocks; 0 on closed+drained
  void close();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<uint8_t> buf_;
  bool closed_ = false;
};

class DuplexStream : public Stream {
 public:
  DuplexStream(std::shared_ptr<BytePipe> in, std::shared_ptr<BytePipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  size_t read_some(uint8_t* buf, size_t n) override { return in_->read_some(buf, n); }
  void write_all(const uint8_t* buf, size_t n) override { out_->write(buf, n); }
  void close() override {
    out_->close();
    in_->close();
  }

 private:
  std::shared_ptr<BytePipe> in_;
  std::shared_ptr<BytePipe> out_;
};

// connected pair: writes to one side are reads on the other
std::pair<std::unique_ptr<DuplexStream>, std::unique_ptr<DuplexStream>> make_duplex_pair();

}  // namespace glora
