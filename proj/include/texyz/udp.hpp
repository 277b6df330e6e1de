#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "texyz/core.hpp"
#include "texyz/frame_queue.hpp"
#include "texyz/osc.hpp"

namespace texyz {

inline constexpr std::uint16_t kDefaultUdpPort = 9009;

inline std::int64_t steady_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

struct ListenerStats {
  std::uint64_t frames_ok = 0;
  std::uint64_t packets_bad = 0;
  std::uint64_t messages_ignored = 0;
  std::uint64_t queue_overflows = 0;
  double last_rate_hz = 0.0;
};

/// Receives OSC frames on a UDP port and hands them to `sink` in arrival
/// order. Reception and delivery run on separate threads joined by a
/// bounded drop-oldest queue, so a slow sink never stalls the socket.
class UdpListener {
 public:
  using Sink = std::function<void(const Frame&)>;

  UdpListener(std::uint16_t port, Sink sink, std::size_t queue_capacity = 64)
      : sink_(std::move(sink)), queue_(queue_capacity) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw StartupError(std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      const std::string err = std::strerror(errno);
      ::close(fd_);
      throw StartupError("cannot bind UDP port " + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    receiver_ = std::thread([this] { receive_loop(); });
    dispatcher_ = std::thread([this] { dispatch_loop(); });
  }

  UdpListener(const UdpListener&) = delete;
  UdpListener& operator=(const UdpListener&) = delete;

  ~UdpListener() { stop(); }

  void stop() {
    if (stopping_.exchange(true)) return;
    if (receiver_.joinable()) receiver_.join();
    queue_.close();
    if (dispatcher_.joinable()) dispatcher_.join();
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::uint16_t port() const { return port_; }

  ListenerStats stats() const {
    ListenerStats s;
    s.frames_ok = frames_ok_.load();
    s.packets_bad = packets_bad_.load();
    s.messages_ignored = ignored_.load();
    s.queue_overflows = queue_.overflows();
    std::lock_guard lock(rate_mutex_);
    s.last_rate_hz = last_rate_hz_;
    return s;
  }

 private:
  void receive_loop() {
    std::vector<std::uint8_t> buf(65536);
    while (!stopping_.load()) {
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, 50);
      if (ready <= 0) continue;
      const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
      if (n < 0) continue;
      const std::int64_t now = steady_ms();
      try {
        auto parsed = osc::parse_packet(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)), now);
        ignored_ += parsed.ignored;
        for (auto& f : parsed.frames) {
          ++frames_ok_;
          note_arrival(now);
          queue_.push(std::move(f));
        }
      } catch (const osc::ParseError&) {
        ++packets_bad_;
      }
    }
  }

  void dispatch_loop() {
    for (;;) {
      auto f = queue_.pop(std::chrono::milliseconds(50));
      if (f) {
        sink_(*f);
        continue;
      }
      if (queue_.closed()) {
        while (auto rest = queue_.try_pop()) sink_(*rest);
        return;
      }
    }
  }

  // Rate over the trailing window of arrivals.
  void note_arrival(std::int64_t now) {
    std::lock_guard lock(rate_mutex_);
    arrivals_.push_back(now);
    while (arrivals_.size() > 16) arrivals_.pop_front();
    if (arrivals_.size() >= 2 && arrivals_.back() > arrivals_.front())
      last_rate_hz_ = 1000.0 * static_cast<double>(arrivals_.size() - 1) /
                      static_cast<double>(arrivals_.back() - arrivals_.front());
  }

  Sink sink_;
  BoundedQueue<Frame> queue_;
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> frames_ok_{0};
  std::atomic<std::uint64_t> packets_bad_{0};
  std::atomic<std::uint64_t> ignored_{0};
  mutable std::mutex rate_mutex_;
  std::deque<std::int64_t> arrivals_;
  double last_rate_hz_ = 0.0;
  std::thread receiver_;
  std::thread dispatcher_;
};

inline std::unique_ptr<UdpListener> listen_udp(std::uint16_t port, UdpListener::Sink sink) {
  return std::make_unique<UdpListener>(port, std::move(sink));
}

/// Fire-and-forget datagram sender for replaying streams.
class UdpSender {
 public:
  UdpSender(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw StartupError(std::string("socket: ") + std::strerror(errno));
    addr_.sin_family = AF_INET;
    addr_.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr_.sin_addr) != 1) {
      ::close(fd_);
      throw StartupError("bad IPv4 address: " + host);
    }
  }
  UdpSender(const UdpSender&) = delete;
  UdpSender& operator=(const UdpSender&) = delete;
  ~UdpSender() {
    if (fd_ >= 0) ::close(fd_);
  }

  void send(std::span<const std::uint8_t> bytes) {
    ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&addr_), sizeof addr_);
  }

 private:
  int fd_ = -1;
  sockaddr_in addr_{};
};

}  // namespace texyz
