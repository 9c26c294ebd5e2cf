#include "glora/wire.hpp"

#include <algorithm>
#include <cstring>

#include "glora/container.hpp"

namespace glora {

bool Stream::read_exact(uint8_t* buf, size_t n) {
  size_t got = 0;
  while (got < n) {
    size_t r = read_some(buf + got, n - got);
    if (r == 0) {
      if (got == 0) return false;
      throw FrameError(FrameError::Kind::Truncated, "connection closed mid-frame");
    }
    got += r;
  }
  return true;
}

bool read_frame(Stream& s, Frame& out, size_t max_payload) {
  uint8_t header[5];
  if (!s.read_exact(header, 4)) return false;
  uint32_t len = 0;
  for (int i = 3; i >= 0; --i) len = (len << 8) | header[i];
  if (!s.read_exact(header + 4, 1))
    throw FrameError(FrameError::Kind::Truncated, "connection closed before message type");
  if (len > max_payload)
    throw FrameError(FrameError::Kind::Oversize,
                     "frame of " + std::to_string(len) + " bytes exceeds limit of " +
                         std::to_string(max_payload));
  out.type = header[4];
  out.payload.resize(len);
  if (len > 0 && !s.read_exact(out.payload.data(), len))
    throw FrameError(FrameError::Kind::Truncated, "connection closed mid-payload");
  return true;
}

void write_frame(Stream& s, MsgType type, const std::vector<uint8_t>& payload) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(payload.size()));
  w.u8(static_cast<uint8_t>(type));
  w.bytes(payload.data(), payload.size());
  const auto& bytes = w.data();
  s.write_all(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// payload codecs

namespace {

void put_blob(ByteWriter& w, const std::vector<uint8_t>& b) {
  w.u32(static_cast<uint32_t>(b.size()));
  w.bytes(b.data(), b.size());
}

std::vector<uint8_t> get_blob(ByteReader& r) {
  uint32_t n = r.u32();
  std::vector<uint8_t> out(n);
  if (n > 0) r.raw(out.data(), n);
  return out;
}

void put_features(ByteWriter& w, const Tensor& t) {
  if (!t.defined() || t.ndim() != 2) throw std::invalid_argument("features must be 2-d");
  w.u32(static_cast<uint32_t>(t.dim(0)));
  w.u32(static_cast<uint32_t>(t.dim(1)));
  for (double v : t.values()) w.f32(static_cast<float>(v));
}

Tensor get_features(ByteReader& r) {
  uint32_t rows = r.u32();
  uint32_t cols = r.u32();
  if (rows == 0 || cols == 0 || static_cast<uint64_t>(rows) * cols > (1u << 28))
    throw std::runtime_error("absurd feature dims");
  std::vector<double> v(static_cast<size_t>(rows) * cols);
  for (double& x : v) x = static_cast<double>(r.f32());
  return Tensor::from_values({static_cast<int>(rows), static_cast<int>(cols)}, std::move(v));
}

void expect_done(ByteReader& r, const char* what) {
  if (!r.done()) throw std::runtime_error(std::string(what) + ": trailing bytes");
}

}  // namespace

std::vector<uint8_t> encode_hello(const HelloMsg& m) {
  ByteWriter w;
  w.u8(m.protocol_version);
  w.u64(m.fingerprint);
  w.str(m.token);
  return w.take();
}

HelloMsg decode_hello(const std::vector<uint8_t>& p) {
  ByteReader r(p.data(), p.size());
  HelloMsg m;
  m.protocol_version = r.u8();
  m.fingerprint = r.u64();
  m.token = r.str();
  expect_done(r, "hello");
  return m;
}

std::vector<uint8_t> encode_infer_req(const InferReqMsg& m) {
  ByteWriter w;
  put_blob(w, m.bundle);
  put_features(w, m.features);
  return w.take();
}

InferReqMsg decode_infer_req(const std::vector<uint8_t>& p) {
  ByteReader r(p.data(), p.size());
  InferReqMsg m;
  m.bundle = get_blob(r);
  m.features = get_features(r);
  expect_done(r, "infer_req");
  return m;
}

std::vector<uint8_t> encode_infer_resp(const InferRespMsg& m) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(m.tokens.size()));
  for (int t : m.tokens) w.u32(static_cast<uint32_t>(t));
  w.str(m.text);
  return w.take();
}

InferRespMsg decode_infer_resp(const std::vector<uint8_t>& p) {
  ByteReader r(p.data(), p.size());
  InferRespMsg m;
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) m.tokens.push_back(static_cast<int>(r.u32()));
  m.text = r.str();
  expect_done(r, "infer_resp");
  return m;
}

std::vector<uint8_t> encode_train_req(const TrainReqMsg& m) {
  ByteWriter w;
  put_blob(w, m.bundle);
  w.u32(static_cast<uint32_t>(m.utterances.size()));
  for (const Utterance& u : m.utterances) {
    put_features(w, u.features);
    w.u32(static_cast<uint32_t>(u.targets.size()));
    for (int t : u.targets) w.u32(static_cast<uint32_t>(t));
  }
  w.u32(m.steps);
  w.f64(m.lr);
  w.u32(m.batch_size);
  w.u64(m.seed);
  return w.take();
}

TrainReqMsg decode_train_req(const std::vector<uint8_t>& p) {
  ByteReader r(p.data(), p.size());
  TrainReqMsg m;
  m.bundle = get_blob(r);
  uint32_t n = r.u32();
  if (n > (1u << 20)) throw std::runtime_error("absurd utterance count");
  for (uint32_t i = 0; i < n; ++i) {
    Utterance u;
    u.features = get_features(r);
    uint32_t nt = r.u32();
    if (nt > (1u << 20)) throw std::runtime_error("absurd target count");
    for (uint32_t j = 0; j < nt; ++j) u.targets.push_back(static_cast<int>(r.u32()));
    m.utterances.push_back(std::move(u));
  }
  m.steps = r.u32();
  m.lr = r.f64();
  m.batch_size = r.u32();
  m.seed = r.u64();
  expect_done(r, "train_req");
  return m;
}

std::vector<uint8_t> encode_train_resp(const TrainRespMsg& m) {
  ByteWriter w;
  put_blob(w, m.bundle);
  w.f64(m.final_loss);
  return w.take();
}

TrainRespMsg decode_train_resp(const std::vector<uint8_t>& p) {
  ByteReader r(p.data(), p.size());
  TrainRespMsg m;
  m.bundle = get_blob(r);
  m.final_loss = r.f64();
  expect_done(r, "train_resp");
  return m;
}

std::vector<uint8_t> encode_error(const ErrorMsg& m) {
  ByteWriter w;
  w.u32(m.code);
  w.str(m.message);
  return w.take();
}

ErrorMsg decode_error(const std::vector<uint8_t>& p) {
  ByteReader r(p.data(), p.size());
  ErrorMsg m;
  m.code = r.u32();
  m.message = r.str();
  expect_done(r, "error");
  return m;
}

// ---------------------------------------------------------------------------
// in-process transport

void BytePipe::write(const uint8_t* p, size_t n) {
  std::lock_guard<std::mutex> lock(mu_);
  if (closed_) throw std::runtime_error("write on closed pipe");
  buf_.insert(buf_.end(), p, p + n);
  cv_.notify_all();
}

size_t BytePipe::read_some(uint8_t* buf, size_t n) {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [this] { return !buf_.empty() || closed_; });
  if (buf_.empty()) return 0;
  size_t take = std::min(n, buf_.size());
  for (size_t i = 0; i < take; ++i) {
    buf[i] = buf_.front();
    buf_.pop_front();
  }
  return take;
}

void BytePipe::close() {
  std::lock_guard<std::mutex> lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

std::pair<std::unique_ptr<DuplexStream>, std::unique_ptr<DuplexStream>> make_duplex_pair() {
  auto a_to_b = std::make_shared<BytePipe>();
  auto b_to_a = std::make_shared<BytePipe>();
  auto a = std::make_unique<DuplexStream>(b_to_a, a_to_b);
  auto b = std::make_unique<DuplexStream>(a_to_b, b_to_a);
  return {std::move(a), std::move(b)};
}

}  // namespace glora
