#include "hasq/client.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "hasq/wire.hpp"

namespace hasq {

std::pair<std::string, std::uint16_t> split_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw std::invalid_argument("address must be host:port: " + std::string(address));
  }
  auto port = parse_canonical_uint(address.substr(colon + 1));
  if (!port || *port > 65535) {
    throw std::invalid_argument("bad port in address: " + std::string(address));
  }
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(*port)};
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = std::exchange(o.fd_, -1);
    buf_ = std::move(o.buf_);
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  buf_.clear();
}

void Socket::set_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

Socket Socket::connect(const std::string& address, std::chrono::milliseconds timeout) {
  std::string host;
  std::uint16_t port = 0;
  try {
    std::tie(host, port) = split_address(address);
  } catch (const std::invalid_argument& e) {
    throw ConnectError(e.what());
  }

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_s = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_s.c_str(), &hints, &res); rc != 0) {
    throw ConnectError(address + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no address";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s.valid()) continue;
    const int flags = ::fcntl(s.fd_, F_GETFL, 0);
    ::fcntl(s.fd_, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(s.fd_, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{s.fd_, POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(s.fd_, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else {
        if (rc == 0) errno = ETIMEDOUT;
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(s.fd_, F_SETFL, flags);
      int one = 1;
      ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      s.set_timeout(timeout);
      ::freeaddrinfo(res);
      return s;
    }
    last_error = std::strerror(errno ? errno : ETIMEDOUT);
  }
  ::freeaddrinfo(res);
  throw ConnectError(address + ": " + last_error);
}

void Socket::write_all(std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ConnectError(std::string("send: ") + std::strerror(errno));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::optional<Socket::Line> Socket::read_line(std::size_t limit) {
  bool oversize = false;
  std::size_t scanned = 0;
  while (true) {
    const auto nl = buf_.find('\n', scanned);
    if (nl != std::string::npos) {
      Line line;
      line.oversize = oversize || nl > limit;
      if (!line.oversize) line.text = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return line;
    }
    scanned = buf_.size();
    if (buf_.size() > limit) {
      // Keep reading until the newline but stop buffering.
      oversize = true;
      buf_.clear();
      scanned = 0;
    }
    char chunk[8192];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n == 0) {
      if (buf_.empty() && !oversize) return std::nullopt;
      throw ConnectError("connection closed mid-line");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ConnectError(std::string("recv: ") + std::strerror(errno));
    }
    buf_.append(chunk, static_cast<std::size_t>(n));
  }
}

Client Client::connect(const std::string& address, std::chrono::milliseconds timeout) {
  return Client(address, Socket::connect(address, timeout));
}

std::string Client::request(std::string_view line) {
  std::string out(line);
  out.push_back('\n');
  sock_.write_all(out);
  auto resp = sock_.read_line(wire::kMaxLineBytes + 16);
  if (!resp) throw ConnectError(address_ + ": connection closed");
  if (resp->oversize) throw WireError(address_ + ": oversize response");
  return std::move(resp->text);
}

std::vector<std::string> Client::request_block(std::string_view line) {
  std::string out(line);
  out.push_back('\n');
  sock_.write_all(out);
  std::vector<std::string> lines;
  while (true) {
    auto resp = sock_.read_line(wire::kMaxLineBytes + 16);
    if (!resp) throw ConnectError(address_ + ": connection closed");
    if (resp->oversize) throw WireError(address_ + ": oversize response");
    if (resp->text == wire::kEnd) return lines;
    if (lines.empty() && resp->text.rfind("ERR ", 0) == 0) {
      lines.push_back(std::move(resp->text));
      return lines;
    }
    lines.push_back(std::move(resp->text));
  }
}

bool Client::ping() { return request(wire::ping()) == wire::kPong; }

std::string Client::add(const Record& r) { return request(wire::add(r)); }

namespace {

Record parse_rec(const HashConfig& cfg, std::string_view line) {
  auto payload = wire::rec_payload(line);
  if (!payload) throw WireError("unexpected response: " + std::string(line));
  try {
    // Remote records get the wire bound, the local gate enforces the store cap.
    return parse_record(cfg, *payload, wire::kMaxLineBytes);
  } catch (const ParseError& e) {
    throw WireError(std::string("bad record from server: ") + e.what());
  }
}

}  // namespace

std::optional<Record> Client::get_head(const HashConfig& cfg, const Digest& token) {
  const std::string resp = request(wire::gethead(token));
  if (resp == wire::kNotFound) return std::nullopt;
  return parse_rec(cfg, resp);
}

Lookup Client::get(const HashConfig& cfg, const Digest& token, std::uint64_t seq) {
  const std::string resp = request(wire::get(token, seq));
  if (resp == wire::kNotFound) return {};
  if (resp == wire::kPruned) return {Lookup::Status::pruned, std::nullopt};
  return {Lookup::Status::found, parse_rec(cfg, resp)};
}

std::vector<Record> Client::get_chain(const HashConfig& cfg, const Digest& token) {
  std::vector<Record> out;
  for (const auto& line : request_block(wire::getchain(token))) {
    out.push_back(parse_rec(cfg, line));
  }
  return out;
}

std::vector<std::string> Client::peers() {
  std::vector<std::string> out;
  for (const auto& line : request_block(wire::peers())) {
    auto p = wire::peer_payload(line);
    if (!p) throw WireError("unexpected response: " + line);
    out.emplace_back(*p);
  }
  return out;
}

}  // namespace hasq
