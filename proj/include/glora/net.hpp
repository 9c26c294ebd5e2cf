#pragma once

#include <memory>
#include <string>

#include "glora/wire.hpp"

namespace glora {

// Blocking TCP stream with optional read/write timeouts.
class TcpStream : public Stream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  size_t read_some(uint8_t* buf, size_t n) override;
  void write_all(const uint8_t* buf, size_t n) override;
  void close() override;
  void set_timeout(double seconds);

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  // port 0 picks an ephemeral port
  static TcpListener bind(const std::string& host, uint16_t port);
  TcpListener(TcpListener&&) noexcept;
  TcpListener& operator=(TcpListener&&) noexcept;
  TcpListener(const TcpListener&) = delete;
  ~TcpListener();

  uint16_t port() const { return port_; }
  // nullptr once close() was called
  std::unique_ptr<TcpStream> accept();
  void close();

 private:
  explicit TcpListener(int fd, uint16_t port) : fd_(fd), port_(port) {}
  int fd_ = -1;
  uint16_t port_ = 0;
};

std::unique_ptr<TcpStream> tcp_connect(const std::string& host, uint16_t port, double timeout_s);

}  // namespace glora
