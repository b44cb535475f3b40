#pragma once

// In-process TCP feature server for protocol tests. Frames are read and
// written with hand-rolled little-endian helpers, independent of the
// library's codec.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstring>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace stub {

using Bytes = std::vector<std::uint8_t>;

inline void put_u32(Bytes& b, std::uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}

inline void put_f32(Bytes& b, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(b, u);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline Bytes ok_header() { return {'B', 'A', 'C', 'R', 0}; }

struct Reply {
  Bytes bytes;
  bool close_after = false;
};

class Server {
 public:
  using Handler = std::function<Reply(const Bytes& request)>;

  explicit Server(Handler handler) : handler_(std::move(handler)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 4) != 0) {
      throw std::runtime_error("stub server: bind/listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }

  ~Server() {
    stop_ = true;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    thread_.join();
  }

  std::uint16_t port() const { return port_; }
  int connections() const { return connections_; }
  std::vector<Bytes> requests() {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  static bool read_all(int fd, std::uint8_t* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t k = ::recv(fd, dst + got, n - got, 0);
      if (k <= 0) return false;
      got += static_cast<std::size_t>(k);
    }
    return true;
  }

  void serve() {
    while (!stop_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) return;
      ++connections_;
      for (;;) {
        Bytes req(14);
        if (!read_all(fd, req.data(), 14)) break;
        const std::size_t n = 3ull * get_u32(req.data() + 6) * get_u32(req.data() + 10);
        req.resize(14 + n);
        if (!read_all(fd, req.data() + 14, n)) break;
        {
          std::lock_guard lock(mu_);
          requests_.push_back(req);
        }
        const Reply reply = handler_(req);
        std::size_t sent = 0;
        while (sent < reply.bytes.size()) {
          const ssize_t k = ::send(fd, reply.bytes.data() + sent, reply.bytes.size() - sent, MSG_NOSIGNAL);
          if (k <= 0) break;
          sent += static_cast<std::size_t>(k);
        }
        if (reply.close_after) break;
      }
      ::close(fd);
    }
  }

  Handler handler_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<int> connections_{0};
  std::mutex mu_;
  std::vector<Bytes> requests_;
  std::thread thread_;
};

}  // namespace stub
