// Copyright 2026 The Faded Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "faded/errors.hpp"

namespace faded {

// Point-to-point byte frames between workers. Both back-ends block until
// the frame is delivered / available; frames between a given pair arrive
// in order.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(int peer, std::span<const uint8_t> frame) = 0;
  virtual std::vector<uint8_t> receive(int peer) = 0;
};

// ---------------------------------------------------------------------------
// In-process channels.

class InprocFabric {
 public:
  explicit InprocFabric(int workers) : workers_(workers) {
    if (workers < 1) {
      throw ConfigError("worker count must be positive");
    }
    boxes_.resize(static_cast<size_t>(workers) * workers);
    for (auto& box : boxes_) {
      box = std::make_unique<Mailbox>();
    }
    for (int i = 0; i < workers; ++i) {
      endpoints_.push_back(std::make_unique<Endpoint>(this, i));
    }
  }

  Transport& endpoint(int worker) { return *endpoints_.at(worker); }

 private:
  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::vector<uint8_t>> frames;
  };

  class Endpoint : public Transport {
   public:
    Endpoint(InprocFabric* fabric, int self) : fabric_(fabric), self_(self) {}

    void send(int peer, std::span<const uint8_t> frame) override {
      Mailbox& box = fabric_->box(self_, peer);
      {
        std::lock_guard lock(box.mu);
        box.frames.emplace_back(frame.begin(), frame.end());
      }
      box.cv.notify_one();
    }

    std::vector<uint8_t> receive(int peer) override {
      Mailbox& box = fabric_->box(peer, self_);
      std::unique_lock lock(box.mu);
      box.cv.wait(lock, [&box] { return !box.frames.empty(); });
      std::vector<uint8_t> frame = std::move(box.frames.front());
      box.frames.pop_front();
      return frame;
    }

   private:
    InprocFabric* fabric_;
    int self_;
  };

  Mailbox& box(int src, int dst) {
    if (src < 0 || src >= workers_ || dst < 0 || dst >= workers_) {
      throw TransportError("peer index out of range");
    }
    return *boxes_[static_cast<size_t>(src) * workers_ + dst];
  }

  int workers_;
  std::vector<std::unique_ptr<Mailbox>> boxes_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
};

// ---------------------------------------------------------------------------
// TCP sockets. Frames on the wire are a u32 little-endian length followed by
// the payload bytes.

class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) : fd_(fd) {}
  UniqueFd(UniqueFd&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  UniqueFd& operator=(UniqueFd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }
  UniqueFd(const UniqueFd&) = delete;
  UniqueFd& operator=(const UniqueFd&) = delete;
  ~UniqueFd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

namespace tcp {

inline void write_all(int fd, const uint8_t* data, size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw TransportError(std::string("send failed: ") + std::strerror(errno));
    }
    data += n;
    len -= static_cast<size_t>(n);
  }
}

inline void read_all(int fd, uint8_t* data, size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw TransportError(std::string("recv failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      throw TransportError("connection closed mid-frame");
    }
    data += n;
    len -= static_cast<size_t>(n);
  }
}

inline void write_frame(int fd, std::span<const uint8_t> payload) {
  uint8_t header[4];
  const auto len = static_cast<uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) {
    header[i] = static_cast<uint8_t>(len >> (8 * i));
  }
  write_all(fd, header, sizeof(header));
  write_all(fd, payload.data(), payload.size());
}

inline std::vector<uint8_t> read_frame(int fd) {
  uint8_t header[4];
  read_all(fd, header, sizeof(header));
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) {
    len |= static_cast<uint32_t>(header[i]) << (8 * i);
  }
  if (len > (1u << 30)) {
    throw TransportError("frame too large");
  }
  std::vector<uint8_t> payload(len);
  read_all(fd, payload.data(), payload.size());
  return payload;
}

inline UniqueFd make_listener(const std::string& host, uint16_t port) {
  UniqueFd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (!fd.valid()) {
    throw TransportError("cannot create socket");
  }
  const int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("invalid listen address: " + host);
  }
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw TransportError("bind failed on " + host + ": " + std::strerror(errno));
  }
  if (::listen(fd.get(), 64) != 0) {
    throw TransportError(std::string("listen failed: ") + std::strerror(errno));
  }
  return fd;
}

inline uint16_t listener_port(const UniqueFd& fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw TransportError("getsockname failed");
  }
  return ntohs(addr.sin_port);
}

inline UniqueFd connect_to(uint32_t ipv4, uint16_t port,
                           std::chrono::milliseconds deadline = std::chrono::seconds(10)) {
  const auto give_up = std::chrono::steady_clock::now() + deadline;
  for (;;) {
    UniqueFd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd.valid()) {
      throw TransportError("cannot create socket");
    }
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(ipv4);
    if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      const int one = 1;
      ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return fd;
    }
    if (std::chrono::steady_clock::now() >= give_up) {
      throw TransportError("connect timed out");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

inline uint32_t resolve_ipv4(const std::string& host) {
  in_addr parsed{};
  if (::inet_pton(AF_INET, host.c_str(), &parsed) == 1) {
    return ntohl(parsed.s_addr);
  }
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &result) != 0 || result == nullptr) {
    throw TransportError("cannot resolve host: " + host);
  }
  const uint32_t ip = ntohl(reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr.s_addr);
  ::freeaddrinfo(result);
  return ip;
}

// "host:port" with a mandatory numeric port.
inline std::pair<std::string, uint16_t> parse_endpoint(const std::string& text) {
  const size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 >= text.size()) {
    throw ConfigError("expected host:port, got: " + text);
  }
  const int port = std::stoi(text.substr(colon + 1));
  if (port < 1 || port > 65535) {
    throw ConfigError("port out of range in: " + text);
  }
  return {text.substr(0, colon), static_cast<uint16_t>(port)};
}

}  // namespace tcp

// Loopback socket mesh for the given edges, one full-duplex connection per
// edge. Gives worker threads within one process a real TCP data path.
class TcpFabric {
 public:
  TcpFabric(int workers, const std::vector<std::pair<int, int>>& edges)
      : workers_(workers) {
    for (int i = 0; i < workers; ++i) {
      endpoints_.push_back(std::make_unique<Endpoint>(this, i));
    }
    for (const auto& [a, b] : edges) {
      if (a < 0 || a >= workers || b < 0 || b >= workers || a == b) {
        throw ConfigError("invalid fabric edge");
      }
      UniqueFd listener = tcp::make_listener("127.0.0.1", 0);
      const uint16_t port = tcp::listener_port(listener);
      UniqueFd client = tcp::connect_to(0x7f000001u, port);
      UniqueFd server(::accept(listener.get(), nullptr, nullptr));
      if (!server.valid()) {
        throw TransportError("accept failed");
      }
      const int one = 1;
      ::setsockopt(server.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      fds_[{a, b}] = std::move(client);
      fds_[{b, a}] = std::move(server);
    }
  }

  Transport& endpoint(int worker) { return *endpoints_.at(worker); }

 private:
  class Endpoint : public Transport {
   public:
    Endpoint(TcpFabric* fabric, int self) : fabric_(fabric), self_(self) {}

    void send(int peer, std::span<const uint8_t> frame) override {
      tcp::write_frame(fabric_->fd(self_, peer), frame);
    }

    std::vector<uint8_t> receive(int peer) override {
      return tcp::read_frame(fabric_->fd(self_, peer));
    }

   private:
    TcpFabric* fabric_;
    int self_;
  };

  int fd(int self, int peer) {
    const auto it = fds_.find({self, peer});
    if (it == fds_.end()) {
      throw TransportError("no connection between workers " + std::to_string(self) +
                           " and " + std::to_string(peer));
    }
    return it->second.get();
  }

  int workers_;
  std::map<std::pair<int, int>, UniqueFd> fds_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
};

// ---------------------------------------------------------------------------
// One worker process in a multi-host run. Worker 0 listens on a well-known
// bootstrap address; everyone else connects there, announces its own data
// port, and receives the full address book back. Data connections are then
// opened lazily between peers as the reduction needs them.

class TcpProcessEndpoint : public Transport {
 public:
  // Coordinator constructor (worker 0).
  TcpProcessEndpoint(int workers, const std::string& listen_endpoint)
      : self_(0), workers_(workers) {
    open_data_listener();
    auto [host, port] = tcp::parse_endpoint(listen_endpoint);
    UniqueFd bootstrap = tcp::make_listener(host, port);
    book_.resize(workers);
    book_[0] = {0, data_port_};  // peers substitute the address they dialed
    std::vector<UniqueFd> hellos(workers);
    for (int received = 1; received < workers; ++received) {
      sockaddr_in peer_addr{};
      socklen_t addr_len = sizeof(peer_addr);
      UniqueFd conn(::accept(bootstrap.get(),
                             reinterpret_cast<sockaddr*>(&peer_addr), &addr_len));
      if (!conn.valid()) {
        throw TransportError("bootstrap accept failed");
      }
      const auto hello = tcp::read_frame(conn.get());
      if (hello.size() != 10 || std::memcmp(hello.data(), "HELO", 4) != 0) {
        throw TransportError("malformed hello frame");
      }
      uint32_t index = 0;
      std::memcpy(&index, hello.data() + 4, 4);
      uint16_t peer_port = 0;
      std::memcpy(&peer_port, hello.data() + 8, 2);
      if (index == 0 || static_cast<int>(index) >= workers) {
        throw TransportError("hello from unexpected worker index");
      }
      book_[index] = {ntohl(peer_addr.sin_addr.s_addr), peer_port};
      hellos[index] = std::move(conn);
    }
    const std::vector<uint8_t> book_frame = encode_book();
    for (int i = 1; i < workers; ++i) {
      tcp::write_frame(hellos[i].get(), book_frame);
    }
  }

  // Remote worker constructor (index >= 1).
  TcpProcessEndpoint(int self, int workers, const std::string& connect_endpoint,
                     std::chrono::milliseconds bootstrap_deadline = std::chrono::seconds(30))
      : self_(self), workers_(workers) {
    if (self < 1 || self >= workers) {
      throw ConfigError("worker index out of range");
    }
    open_data_listener();
    auto [host, port] = tcp::parse_endpoint(connect_endpoint);
    const uint32_t coordinator_ip = tcp::resolve_ipv4(host);
    UniqueFd conn = tcp::connect_to(coordinator_ip, port, bootstrap_deadline);
    std::vector<uint8_t> hello(10);
    std::memcpy(hello.data(), "HELO", 4);
    const uint32_t index = static_cast<uint32_t>(self);
    std::memcpy(hello.data() + 4, &index, 4);
    std::memcpy(hello.data() + 8, &data_port_, 2);
    tcp::write_frame(conn.get(), hello);
    decode_book(tcp::read_frame(conn.get()));
    book_[0].ip = coordinator_ip;
  }

  void send(int peer, std::span<const uint8_t> frame) override {
    UniqueFd& conn = outbound_[peer];
    if (!conn.valid()) {
      check_peer(peer);
      conn = tcp::connect_to(book_[peer].ip, book_[peer].port);
      std::vector<uint8_t> id(8);
      std::memcpy(id.data(), "FROM", 4);
      const uint32_t index = static_cast<uint32_t>(self_);
      std::memcpy(id.data() + 4, &index, 4);
      tcp::write_frame(conn.get(), id);
    }
    tcp::write_frame(conn.get(), frame);
  }

  std::vector<uint8_t> receive(int peer) override {
    check_peer(peer);
    while (!inbound_.contains(peer)) {
      UniqueFd conn(::accept(listener_.get(), nullptr, nullptr));
      if (!conn.valid()) {
        throw TransportError("data accept failed");
      }
      const auto id = tcp::read_frame(conn.get());
      if (id.size() != 8 || std::memcmp(id.data(), "FROM", 4) != 0) {
        throw TransportError("malformed peer id frame");
      }
      uint32_t index = 0;
      std::memcpy(&index, id.data() + 4, 4);
      inbound_[static_cast<int>(index)] = std::move(conn);
    }
    return tcp::read_frame(inbound_[peer].get());
  }

 private:
  struct Address {
    uint32_t ip = 0;
    uint16_t port = 0;
  };

  void open_data_listener() {
    listener_ = tcp::make_listener("0.0.0.0", 0);
    data_port_ = tcp::listener_port(listener_);
  }

  void check_peer(int peer) const {
    if (peer < 0 || peer >= workers_ || peer == self_) {
      throw TransportError("peer index out of range");
    }
  }

  std::vector<uint8_t> encode_book() const {
    std::vector<uint8_t> frame(8 + book_.size() * 10);
    std::memcpy(frame.data(), "BOOK", 4);
    const uint32_t count = static_cast<uint32_t>(book_.size());
    std::memcpy(frame.data() + 4, &count, 4);
    size_t at = 8;
    for (uint32_t i = 0; i < count; ++i) {
      std::memcpy(frame.data() + at, &i, 4);
      std::memcpy(frame.data() + at + 4, &book_[i].ip, 4);
      std::memcpy(frame.data() + at + 8, &book_[i].port, 2);
      at += 10;
    }
    return frame;
  }

  void decode_book(const std::vector<uint8_t>& frame) {
    if (frame.size() < 8 || std::memcmp(frame.data(), "BOOK", 4) != 0) {
      throw TransportError("malformed address book");
    }
    uint32_t count = 0;
    std::memcpy(&count, frame.data() + 4, 4);
    if (static_cast<int>(count) != workers_ || frame.size() != 8 + count * 10ull) {
      throw TransportError("address book size mismatch");
    }
    book_.resize(count);
    size_t at = 8;
    for (uint32_t i = 0; i < count; ++i) {
      uint32_t index = 0;
      std::memcpy(&index, frame.data() + at, 4);
      if (index >= count) {
        throw TransportError("address book index out of range");
      }
      std::memcpy(&book_[index].ip, frame.data() + at + 4, 4);
      std::memcpy(&book_[index].port, frame.data() + at + 8, 2);
      at += 10;
    }
  }

  int self_;
  int workers_;
  UniqueFd listener_;
  uint16_t data_port_ = 0;
  std::vector<Address> book_;
  std::map<int, UniqueFd> outbound_;
  std::map<int, UniqueFd> inbound_;
};

}  // namespace faded
