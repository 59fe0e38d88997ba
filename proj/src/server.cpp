#include "hasq/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <iostream>
#include <list>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "hasq/client.hpp"
#include "hasq/wire.hpp"

namespace hasq {

namespace {

/// ADD payloads that are well formed except for missing fields most likely
/// come from a database with a different generator count.
bool looks_like_fewer_generators(const HashConfig& cfg, std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t pos = 0;
  while (true) {
    const auto sp = line.find(' ', pos);
    f.push_back(line.substr(pos, sp == std::string_view::npos ? line.npos : sp - pos));
    if (sp == std::string_view::npos) break;
    pos = sp + 1;
  }
  if (f.size() < 4 || f.size() >= cfg.generator_count + 4) return false;
  if (!parse_canonical_uint(f[0])) return false;
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (!Digest::parse(f[i], cfg.algorithm)) return false;
  }
  return true;
}

struct PeerLink {
  std::string address;
  std::deque<Record> queue;
  bool busy = false;
  std::optional<Client> conn;
  std::thread worker;
};

}  // namespace

struct Server::Impl {
  Ledger ledger;
  ServerOptions opts;
  PeerTable peers;
  std::string address;

  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::thread acceptor;
  std::thread maintainer;

  std::mutex conn_mu;
  struct Conn {
    int fd;
    std::thread th;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::list<Conn> conns;

  mutable std::mutex notify_mu;
  std::condition_variable notify_cv;
  std::condition_variable idle_cv;
  std::map<std::string, std::unique_ptr<PeerLink>> links;
  NotifyStats stats;

  std::mutex maint_mu;
  std::condition_variable maint_cv;
  std::mutex round_mu;
  std::uint64_t tick = 0;
  std::mt19937_64 rng{std::random_device{}()};

  Impl(Ledger l, ServerOptions o)
      : ledger(std::move(l)), opts(std::move(o)), peers("", opts.peer_capacity) {}

  const HashConfig& hash() const { return ledger.config().hash; }

  // --- request handling ---------------------------------------------------

  std::string handle(std::string_view line, Server& self) {
    auto cmd = wire::parse_command(hash(), line);
    if (!cmd) return std::string(wire::kBadRequest) + "\n";
    switch (cmd->verb) {
      case wire::Verb::ping:
        return std::string(wire::kPong) + "\n";
      case wire::Verb::gethead: {
        auto head = ledger.get_head(cmd->token);
        if (!head) return std::string(wire::kNotFound) + "\n";
        return wire::rec_line(*head) + "\n";
      }
      case wire::Verb::get: {
        const Lookup l = ledger.get_record(cmd->token, cmd->seq);
        switch (l.status) {
          case Lookup::Status::found:
            return wire::rec_line(*l.record) + "\n";
          case Lookup::Status::pruned:
            return std::string(wire::kPruned) + "\n";
          case Lookup::Status::none:
            break;
        }
        return std::string(wire::kNotFound) + "\n";
      }
      case wire::Verb::getchain: {
        std::string out;
        for (const auto& r : ledger.get_chain(cmd->token)) out += wire::rec_line(r) + "\n";
        out += std::string(wire::kEnd) + "\n";
        return out;
      }
      case wire::Verb::peers: {
        std::string out;
        for (const auto& p : peers.advertised()) out += wire::peer_line(p) + "\n";
        out += std::string(wire::kEnd) + "\n";
        return out;
      }
      case wire::Verb::add:
        return handle_add(cmd->record_line, self) + "\n";
    }
    return std::string(wire::kBadRequest) + "\n";
  }

  std::string handle_add(std::string_view payload, Server& self) {
    const StoreConfig& cfg = ledger.config();
    Record r;
    try {
      r = parse_record(cfg.hash, payload, cfg.max_data_bytes);
    } catch (const ParseError& e) {
      if (e.kind() == ParseError::Kind::field_count &&
          looks_like_fewer_generators(cfg.hash, payload)) {
        return "ERR wrong-generator-count";
      }
      if (e.kind() == ParseError::Kind::bad_data) return "ERR bad-record";
      return std::string(wire::kBadRequest);
    }
    const AppendResult res = ledger.append(r);
    if (res.status == AppendStatus::added) {
      self.notify_peers(r);
      return std::string(wire::kAdded);
    }
    if (res.status == AppendStatus::duplicate) return std::string(wire::kDuplicate);
    return "ERR " + res.reason();
  }

  void serve_connection(int fd, Server& self) {
    Socket sock(fd);
    try {
      while (!stopping) {
        auto line = sock.read_line(wire::kMaxLineBytes);
        if (!line) break;
        const std::string resp = line->oversize ? std::string(wire::kBadRequest) + "\n"
                                                : handle(line->text, self);
        sock.write_all(resp);
      }
    } catch (const std::exception&) {
      // Peer went away or timed out; nothing to report back.
    }
    // Forget the fd before closing it so stop() never shuts down a reused one.
    std::lock_guard lock(conn_mu);
    for (auto& c : conns) {
      if (c.fd == fd) c.fd = -1;
    }
    sock.close();
  }

  void accept_loop(Server& self) {
    while (!stopping) {
      pollfd pfd{listen_fd, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, 100);
      reap_connections();
      if (rc <= 0) continue;
      const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      std::lock_guard lock(conn_mu);
      auto done = std::make_shared<std::atomic<bool>>(false);
      conns.push_back(Conn{fd, {}, done});
      conns.back().th = std::thread([this, fd, done, &self] {
        serve_connection(fd, self);
        *done = true;
      });
    }
  }

  void reap_connections() {
    std::lock_guard lock(conn_mu);
    for (auto it = conns.begin(); it != conns.end();) {
      if (*it->done) {
        it->th.join();
        it = conns.erase(it);
      } else {
        ++it;
      }
    }
  }

  // --- notifications ------------------------------------------------------

  void deliver(PeerLink& link, const Record& r) {
    if (opts.notify_filter && !opts.notify_filter(link.address, r)) {
      std::lock_guard lock(notify_mu);
      ++stats.filtered;
      return;
    }
    bool failed = false;
    std::string resp;
    // A cached connection may have gone stale since the last record; retry
    // once on a fresh one before calling the peer suspect.
    for (int attempt = 0; attempt < 2; ++attempt) {
      const bool fresh = !link.conn;
      try {
        if (!link.conn) link.conn.emplace(Client::connect(link.address, opts.io_timeout));
        resp = link.conn->add(r);
        failed = false;
        break;
      } catch (const std::exception&) {
        failed = true;
        link.conn.reset();
        if (fresh) break;
      }
    }
    std::lock_guard lock(notify_mu);
    ++stats.attempts;
    if (failed) {
      ++stats.failures;
      peers.mark_suspect(link.address);
    } else if (resp == wire::kAdded) {
      ++stats.added;
    } else if (resp == wire::kDuplicate) {
      ++stats.duplicates;
    } else {
      ++stats.rejected;
    }
  }

  void worker_loop(PeerLink& link) {
    std::unique_lock lock(notify_mu);
    while (true) {
      notify_cv.wait(lock, [&] { return stopping || !link.queue.empty(); });
      if (stopping) break;
      // A peer that is no longer alive gets nothing more; sync repairs it.
      if (auto info = peers.get(link.address); !info || info->state != PeerState::alive) {
        stats.dropped += link.queue.size();
        link.queue.clear();
        idle_cv.notify_all();
        continue;
      }
      Record r = std::move(link.queue.front());
      link.queue.pop_front();
      link.busy = true;
      lock.unlock();
      deliver(link, r);
      lock.lock();
      link.busy = false;
      idle_cv.notify_all();
    }
    link.busy = false;
    idle_cv.notify_all();
  }

  NotifyReport notify(const Record& r) {
    NotifyReport report;
    report.targets = peers.notification_targets();
    std::lock_guard lock(notify_mu);
    if (stopping) return report;
    for (const auto& addr : report.targets) {
      auto& slot = links[addr];
      if (!slot) {
        slot = std::make_unique<PeerLink>();
        slot->address = addr;
        PeerLink* raw = slot.get();
        slot->worker = std::thread([this, raw] { worker_loop(*raw); });
      }
      if (slot->queue.size() >= opts.notify_queue_limit) {
        slot->queue.pop_front();
        ++report.dropped;
        ++stats.dropped;
      }
      slot->queue.push_back(r);
    }
    notify_cv.notify_all();
    return report;
  }

  bool flush(std::chrono::milliseconds timeout) {
    std::unique_lock lock(notify_mu);
    return idle_cv.wait_for(lock, timeout, [&] {
      for (const auto& [addr, link] : links) {
        if (link->busy || !link->queue.empty()) return false;
      }
      return true;
    });
  }

  // --- peers --------------------------------------------------------------

  SyncResult sync(const Digest& token, const std::string& peer, Server& self) {
    SyncResult res;
    std::vector<Record> remote;
    try {
      auto c = Client::connect(peer, opts.io_timeout);
      remote = c.get_chain(hash(), token);
    } catch (const std::exception&) {
      res.reachable = false;
      peers.mark_suspect(peer);
      return res;
    }
    for (const auto& r : remote) {
      const AppendResult a = ledger.append(r);
      if (a.status == AppendStatus::added) {
        ++res.pulled;
        self.notify_peers(r);
      } else if (a.status != AppendStatus::duplicate) {
        ++res.rejected;
        if (a.conflict) ++res.conflicts;
      }
    }
    return res;
  }

  void maintain(Server& self) {
    std::lock_guard round_lock(round_mu);
    const std::uint64_t round = ++tick;
    for (const auto& addr : peers.probe_targets(round, opts.dead_probe_every)) {
      if (stopping) return;
      bool ok = false;
      try {
        ok = Client::connect(addr, opts.io_timeout).ping();
      } catch (const std::exception&) {
        ok = false;
      }
      if (ok) {
        peers.record_success(addr);
      } else {
        peers.record_failure(addr);
      }
    }
    for (const auto& addr : peers.notification_targets()) {
      if (stopping) return;
      try {
        for (const auto& learned : Client::connect(addr, opts.io_timeout).peers()) {
          peers.learn(learned, addr);
        }
      } catch (const std::exception&) {
        peers.mark_suspect(addr);
      }
    }
    if (opts.anti_entropy_every && round % opts.anti_entropy_every == 0) {
      const auto alive = peers.notification_targets();
      if (!alive.empty()) {
        for (const auto& token : ledger.tokens()) {
          if (stopping) return;
          std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
          sync(token, alive[pick(rng)], self);
        }
      }
    }
    if (ledger.config().history_depth && opts.compact_every &&
        round % opts.compact_every == 0) {
      ledger.compact();
    }
  }

  void maintain_loop(Server& self) {
    std::unique_lock lock(maint_mu);
    while (!stopping) {
      maint_cv.wait_for(lock, opts.probe_interval, [&] { return stopping.load(); });
      if (stopping) break;
      lock.unlock();
      maintain(self);
      lock.lock();
    }
  }

  void shutdown() {
    if (stopping.exchange(true)) return;
    {
      std::lock_guard lock(maint_mu);
      maint_cv.notify_all();
    }
    if (maintainer.joinable()) maintainer.join();
    // Wakes the acceptor's poll at once instead of at its next timeout.
    if (listen_fd >= 0) ::shutdown(listen_fd, SHUT_RDWR);
    if (acceptor.joinable()) acceptor.join();
    if (listen_fd >= 0) ::close(listen_fd);
    listen_fd = -1;
    {
      std::lock_guard lock(conn_mu);
      for (auto& c : conns) {
        if (c.fd >= 0) ::shutdown(c.fd, SHUT_RDWR);
      }
    }
    std::list<Conn> pending;
    {
      std::lock_guard lock(conn_mu);
      pending.swap(conns);
    }
    for (auto& c : pending) c.th.join();
    {
      std::lock_guard lock(notify_mu);
      notify_cv.notify_all();
    }
    for (auto& [addr, link] : links) {
      if (link->worker.joinable()) link->worker.join();
    }
  }
};

namespace {

int bind_listener(const std::string& listen, std::string& bound) {
  std::string host;
  std::uint16_t port = 0;
  try {
    std::tie(host, port) = split_address(listen);
  } catch (const std::invalid_argument& e) {
    throw BindError(e.what());
  }
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_s = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_s.c_str(), &hints, &res); rc != 0) {
    throw BindError("cannot resolve " + listen + ": " + ::gai_strerror(rc));
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw BindError(std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 128) != 0) {
    const int err = errno;
    ::freeaddrinfo(res);
    ::close(fd);
    throw BindError("cannot listen on " + listen + " (port " + port_s +
                    "): " + std::strerror(err));
  }
  ::freeaddrinfo(res);
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  bound = host + ":" + std::to_string(ntohs(sa.sin_port));
  return fd;
}

}  // namespace

Server::Server(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

Server::~Server() { stop(); }

std::unique_ptr<Server> Server::start(Ledger ledger, ServerOptions options) {
  auto impl = std::make_unique<Impl>(std::move(ledger), std::move(options));
  impl->listen_fd = bind_listener(impl->ledger.config().listen, impl->address);
  impl->peers.set_self(impl->address);
  for (const auto& p : impl->ledger.config().peers) {
    if (p != impl->ledger.config().listen) impl->peers.add_static(p);
  }
  std::unique_ptr<Server> server(new Server(std::move(impl)));
  Server& self = *server;
  server->impl_->acceptor = std::thread([&self] { self.impl_->accept_loop(self); });
  if (server->impl_->opts.run_maintenance) {
    server->impl_->maintainer = std::thread([&self] { self.impl_->maintain_loop(self); });
  }
  return server;
}

void Server::stop() {
  if (impl_) impl_->shutdown();
}

const std::string& Server::address() const { return impl_->address; }
Ledger& Server::ledger() { return impl_->ledger; }
PeerTable& Server::peers() { return impl_->peers; }

std::string Server::handle_line(std::string_view line) { return impl_->handle(line, *this); }

NotifyReport Server::notify_peers(const Record& record) { return impl_->notify(record); }

bool Server::flush_notifications(std::chrono::milliseconds timeout) {
  return impl_->flush(timeout);
}

NotifyStats Server::notify_stats() const {
  std::lock_guard lock(impl_->notify_mu);
  return impl_->stats;
}

SyncResult Server::sync_token(const Digest& token, const std::string& peer) {
  return impl_->sync(token, peer, *this);
}

void Server::maintain_once() { impl_->maintain(*this); }

std::uint64_t Server::divergence_count() const { return impl_->ledger.divergence_count(); }

}  // namespace hasq
