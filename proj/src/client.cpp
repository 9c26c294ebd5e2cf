#include "glora/client.hpp"

#include "glora/container.hpp"
#include "glora/net.hpp"

namespace glora {

namespace {

Frame exchange(Stream& stream, MsgType type, const std::vector<uint8_t>& payload,
               MsgType expected) {
  write_frame(stream, type, payload);
  Frame resp;
  if (!read_frame(stream, resp, kDefaultMaxFrameBytes))
    throw std::runtime_error("server closed the connection");
  if (static_cast<MsgType>(resp.type) == MsgType::Error) {
    ErrorMsg e = decode_error(resp.payload);
    throw ServerError(e.code, e.message);
  }
  if (static_cast<MsgType>(resp.type) != expected)
    throw std::runtime_error("unexpected response type " + std::to_string(resp.type));
  return resp;
}

void say_bye(Stream& stream) {
  try {
    write_frame(stream, MsgType::Bye, {});
    Frame resp;
    read_frame(stream, resp, kDefaultMaxFrameBytes);
  } catch (...) {
    // best effort; the session is over either way
  }
}

}  // namespace

uint64_t client_hello(const std::string& host, uint16_t port, const ClientOptions& opts) {
  auto stream = tcp_connect(host, port, opts.timeout_s);
  HelloMsg req;
  req.token = opts.token;
  Frame resp = exchange(*stream, MsgType::Hello, encode_hello(req), MsgType::Hello);
  HelloMsg hello = decode_hello(resp.payload);
  say_bye(*stream);
  return hello.fingerprint;
}

InferOutcome client_infer(const std::string& host, uint16_t port, const std::string& bundle_path,
                          const Tensor& features, const ClientOptions& opts) {
  InferReqMsg req;
  req.bundle = read_file(bundle_path);
  req.features = features;
  auto stream = tcp_connect(host, port, opts.timeout_s);
  Frame resp = exchange(*stream, MsgType::InferReq, encode_infer_req(req), MsgType::InferResp);
  InferRespMsg msg = decode_infer_resp(resp.payload);
  say_bye(*stream);
  return {std::move(msg.tokens), std::move(msg.text)};
}

double client_train(const std::string& host, uint16_t port, const std::string& bundle_path,
                    const std::vector<Utterance>& data, const ClientTrainRequest& req,
                    const ClientOptions& opts) {
  TrainReqMsg msg;
  msg.bundle = read_file(bundle_path);
  msg.utterances = data;
  msg.steps = req.steps;
  msg.lr = req.lr;
  msg.batch_size = req.batch_size;
  msg.seed = req.seed;
  auto stream = tcp_connect(host, port, opts.timeout_s);
  Frame resp = exchange(*stream, MsgType::TrainReq, encode_train_req(msg), MsgType::TrainResp);
  TrainRespMsg out = decode_train_resp(resp.payload);
  say_bye(*stream);
  write_file_atomic(bundle_path, out.bundle);
  return out.final_loss;
}

}  // namespace glora
