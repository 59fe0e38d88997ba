#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hasq/chain.hpp"
#include "hasq/peer_table.hpp"
#include "hasq/store.hpp"

namespace hasq {

class BindError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerOptions {
  std::chrono::milliseconds probe_interval{1000};
  /// Dead peers are probed once every this many rounds.
  unsigned dead_probe_every = 5;
  std::size_t peer_capacity = 64;
  /// Per-peer notification backlog; the oldest entry is dropped beyond it.
  std::size_t notify_queue_limit = 1024;
  std::chrono::milliseconds io_timeout{2000};
  /// Run the periodic probe/PEERS loop in the background.
  bool run_maintenance = true;
  /// Every this many rounds pull each local token from one alive peer. 0 = off.
  unsigned anti_entropy_every = 0;
  /// Every this many rounds compact the store (only with a history depth).
  unsigned compact_every = 60;
  /// Returns false to drop a notification before it is sent. Fault injection
  /// for tests; unset in production.
  std::function<bool(const std::string& peer, const Record&)> notify_filter;
};

struct NotifyReport {
  std::vector<std::string> targets;
  /// Queue entries evicted to make room.
  std::size_t dropped = 0;
};

struct NotifyStats {
  std::uint64_t attempts = 0;
  std::uint64_t added = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t rejected = 0;
  std::uint64_t failures = 0;
  std::uint64_t dropped = 0;
  std::uint64_t filtered = 0;
};

struct SyncResult {
  std::size_t pulled = 0;
  std::size_t rejected = 0;
  std::size_t conflicts = 0;
  bool reachable = true;
};

/// Record server: answers the line protocol, pushes accepted records to
/// peers and keeps the peer table current.
///
/// Every record enters the ledger through Ledger::append, whether it came
/// from a client ADD, a peer notification or a sync pull.
class Server {
 public:
  /// Binds ledger.config().listen (port 0 picks a free port) and seeds the
  /// peer table from ledger.config().peers. Throws BindError.
  static std::unique_ptr<Server> start(Ledger ledger, ServerOptions options = {});

  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Stops accepting, closes connections and joins all threads. Idempotent.
  void stop();

  /// host:port actually bound.
  const std::string& address() const;
  Ledger& ledger();
  PeerTable& peers();

  /// Response for one request line, every line '\n'-terminated.
  std::string handle_line(std::string_view line);

  NotifyReport notify_peers(const Record& record);
  /// Waits until every notification queue is drained.
  bool flush_notifications(std::chrono::milliseconds timeout);
  NotifyStats notify_stats() const;

  SyncResult sync_token(const Digest& token, const std::string& peer);
  /// One probe round plus PEERS exchange with the peers that answered.
  void maintain_once();

  std::uint64_t divergence_count() const;

 private:
  struct Impl;
  explicit Server(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace hasq
