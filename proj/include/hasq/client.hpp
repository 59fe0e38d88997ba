#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hasq/chain.hpp"
#include "hasq/store.hpp"

namespace hasq {

/// Could not reach the server, or the connection broke mid-request.
class ConnectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The server answered something the protocol does not allow.
class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits `host:port`. Throws std::invalid_argument.
std::pair<std::string, std::uint16_t> split_address(std::string_view address);

/// Owned TCP socket with a line reader.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)), buf_(std::move(o.buf_)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  static Socket connect(const std::string& address, std::chrono::milliseconds timeout);

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  void set_timeout(std::chrono::milliseconds timeout);

  /// Throws ConnectError on failure.
  void write_all(std::string_view bytes);
  /// Next line without its '\n'. nullopt on orderly EOF. Lines longer than
  /// `limit` are consumed and reported as `oversize`.
  struct Line {
    std::string text;
    bool oversize = false;
  };
  std::optional<Line> read_line(std::size_t limit);

 private:
  int fd_ = -1;
  std::string buf_;
};

/// Blocking client for one server. Each call is a full request/response.
class Client {
 public:
  static Client connect(const std::string& address,
                        std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));

  const std::string& address() const { return address_; }

  std::string request(std::string_view line);
  /// Collects lines up to (not including) END. A lone ERR line is returned
  /// as the only element.
  std::vector<std::string> request_block(std::string_view line);

  bool ping();
  /// Raw server response ("OK added", "ERR bad-O", ...).
  std::string add(const Record& r);
  std::optional<Record> get_head(const HashConfig& cfg, const Digest& token);
  Lookup get(const HashConfig& cfg, const Digest& token, std::uint64_t seq);
  std::vector<Record> get_chain(const HashConfig& cfg, const Digest& token);
  std::vector<std::string> peers();

 private:
  Client(std::string address, Socket sock) : address_(std::move(address)), sock_(std::move(sock)) {}

  std::string address_;
  Socket sock_;
};

}  // namespace hasq
