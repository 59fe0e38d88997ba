#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hasq {

enum class PeerState { alive, suspect, dead };

std::string_view peer_state_name(PeerState s);

struct PeerInfo {
  using Clock = std::chrono::steady_clock;

  std::string address;
  PeerState state = PeerState::suspect;
  Clock::time_point last_seen{};
  /// Address it was learned from; nullopt for static seeds.
  std::optional<std::string> learned_from;
  unsigned missed = 0;

  bool is_static() const { return !learned_from; }
};

/// Known servers and their liveness.
///
/// One missed probe makes a peer suspect, kMissesUntilDead make it dead.
/// Dead peers stop receiving notifications and are probed only every few
/// rounds; any successful probe makes a peer alive again. Static entries are
/// never evicted; the table never contains its own address.
class PeerTable {
 public:
  static constexpr unsigned kMissesUntilDead = 3;

  explicit PeerTable(std::string self_address, std::size_t capacity = 64);

  void set_self(std::string self_address);
  const std::string& self() const { return self_; }

  /// Static seed, starts alive. Returns false for self or duplicates.
  bool add_static(const std::string& address);
  /// Address learned through a PEERS exchange; starts suspect. When the table
  /// is full a learned dead entry is evicted first, then a learned suspect
  /// one; if neither exists the address is ignored.
  bool learn(const std::string& address, const std::string& from);

  void record_success(const std::string& address,
                      PeerInfo::Clock::time_point now = PeerInfo::Clock::now());
  void record_failure(const std::string& address);
  /// Notification failure: an alive peer becomes suspect.
  void mark_suspect(const std::string& address);

  std::vector<std::string> notification_targets() const;
  /// What a PEERS request returns: every peer that is not dead.
  std::vector<std::string> advertised() const;
  /// Peers to probe in round `tick`: everyone not dead, plus dead peers when
  /// tick is a multiple of `dead_probe_every`.
  std::vector<std::string> probe_targets(std::uint64_t tick, unsigned dead_probe_every) const;

  std::optional<PeerInfo> get(const std::string& address) const;
  std::vector<PeerInfo> snapshot() const;
  std::size_t size() const;

 private:
  PeerInfo* find_locked(const std::string& address);

  mutable std::mutex mu_;
  std::string self_;
  std::size_t capacity_;
  std::vector<PeerInfo> peers_;
};

}  // namespace hasq
