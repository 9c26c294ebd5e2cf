#include "glora/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace glora {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

void set_timeout_fd(int fd, double seconds) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(seconds);
  tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

sockaddr_in make_addr(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = INADDR_ANY;
  } else if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw std::runtime_error("cannot parse IPv4 address: " + host);
  }
  return addr;
}

}  // namespace

TcpStream::~TcpStream() { close(); }

size_t TcpStream::read_some(uint8_t* buf, size_t n) {
  if (fd_ < 0) return 0;
  ssize_t r = ::recv(fd_, buf, n, 0);
  if (r < 0) {
    if (errno == EAGAIN || errno == EWOULDBLOCK) throw std::runtime_error("read timeout");
    sys_fail("recv");
  }
  return static_cast<size_t>(r);
}

void TcpStream::write_all(const uint8_t* buf, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::send(fd_, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw std::runtime_error("write timeout");
      sys_fail("send");
    }
    sent += static_cast<size_t>(r);
  }
}

void TcpStream::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpStream::set_timeout(double seconds) {
  if (fd_ >= 0 && seconds > 0) set_timeout_fd(fd_, seconds);
}

TcpListener TcpListener::bind(const std::string& host, uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host, port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    sys_fail("bind " + host + ":" + std::to_string(port));
  }
  if (::listen(fd, 16) < 0) {
    ::close(fd);
    sys_fail("listen");
  }
  socklen_t len = sizeof(addr);
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return TcpListener(fd, ntohs(addr.sin_port));
}

TcpListener::TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
  other.fd_ = -1;
}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    port_ = other.port_;
    other.fd_ = -1;
  }
  return *this;
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<TcpStream> TcpListener::accept() {
  if (fd_ < 0) return nullptr;
  int client = ::accept(fd_, nullptr, nullptr);
  if (client < 0) return nullptr;  // listener closed or interrupted
  return std::make_unique<TcpStream>(client);
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<TcpStream> tcp_connect(const std::string& host, uint16_t port, double timeout_s) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  sockaddr_in addr = make_addr(host.empty() ? "127.0.0.1" : host, port);

  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int r = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (r < 0 && errno != EINPROGRESS) {
    int err = errno;
    ::close(fd);
    errno = err;
    sys_fail("connect " + host + ":" + std::to_string(port));
  }
  if (r < 0) {
    pollfd pfd{fd, POLLOUT, 0};
    int pr = ::poll(&pfd, 1, static_cast<int>(timeout_s * 1000));
    if (pr <= 0) {
      ::close(fd);
      throw std::runtime_error("connect timeout after " + std::to_string(timeout_s) + "s to " +
                               host + ":" + std::to_string(port));
    }
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      ::close(fd);
      errno = err;
      sys_fail("connect " + host + ":" + std::to_string(port));
    }
  }
  fcntl(fd, F_SETFL, flags);
  auto stream = std::make_unique<TcpStream>(fd);
  stream->set_timeout(timeout_s);
  return stream;
}

}  // namespace glora
