#include "hasq/peer_table.hpp"

#include <algorithm>

namespace hasq {

std::string_view peer_state_name(PeerState s) {
  switch (s) {
    case PeerState::alive:
      return "alive";
    case PeerState::suspect:
      return "suspect";
    case PeerState::dead:
      return "dead";
  }
  return "?";
}

PeerTable::PeerTable(std::string self_address, std::size_t capacity)
    : self_(std::move(self_address)), capacity_(std::max<std::size_t>(capacity, 1)) {}

void PeerTable::set_self(std::string self_address) {
  std::lock_guard lock(mu_);
  self_ = std::move(self_address);
  std::erase_if(peers_, [&](const PeerInfo& p) { return p.address == self_; });
}

PeerInfo* PeerTable::find_locked(const std::string& address) {
  auto it = std::find_if(peers_.begin(), peers_.end(),
                         [&](const PeerInfo& p) { return p.address == address; });
  return it == peers_.end() ? nullptr : &*it;
}

bool PeerTable::add_static(const std::string& address) {
  std::lock_guard lock(mu_);
  if (address.empty() || address == self_) return false;
  if (PeerInfo* p = find_locked(address)) {
    p->learned_from.reset();
    return false;
  }
  PeerInfo info;
  info.address = address;
  info.state = PeerState::alive;
  info.last_seen = PeerInfo::Clock::now();
  peers_.push_back(std::move(info));
  return true;
}

bool PeerTable::learn(const std::string& address, const std::string& from) {
  std::lock_guard lock(mu_);
  if (address.empty() || address == self_ || find_locked(address)) return false;
  if (peers_.size() >= capacity_) {
    auto victim = std::find_if(peers_.begin(), peers_.end(), [](const PeerInfo& p) {
      return !p.is_static() && p.state == PeerState::dead;
    });
    if (victim == peers_.end()) {
      victim = std::find_if(peers_.begin(), peers_.end(), [](const PeerInfo& p) {
        return !p.is_static() && p.state == PeerState::suspect;
      });
    }
    if (victim == peers_.end()) return false;
    peers_.erase(victim);
  }
  PeerInfo info;
  info.address = address;
  info.state = PeerState::suspect;
  info.learned_from = from;
  peers_.push_back(std::move(info));
  return true;
}

void PeerTable::record_success(const std::string& address, PeerInfo::Clock::time_point now) {
  std::lock_guard lock(mu_);
  if (PeerInfo* p = find_locked(address)) {
    p->state = PeerState::alive;
    p->missed = 0;
    p->last_seen = now;
  }
}

void PeerTable::record_failure(const std::string& address) {
  std::lock_guard lock(mu_);
  if (PeerInfo* p = find_locked(address)) {
    ++p->missed;
    p->state = p->missed >= kMissesUntilDead ? PeerState::dead : PeerState::suspect;
  }
}

void PeerTable::mark_suspect(const std::string& address) {
  std::lock_guard lock(mu_);
  if (PeerInfo* p = find_locked(address); p && p->state == PeerState::alive) {
    p->state = PeerState::suspect;
    p->missed = std::max(p->missed, 1u);
  }
}

std::vector<std::string> PeerTable::notification_targets() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& p : peers_) {
    if (p.state == PeerState::alive) out.push_back(p.address);
  }
  return out;
}

std::vector<std::string> PeerTable::advertised() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& p : peers_) {
    if (p.state != PeerState::dead) out.push_back(p.address);
  }
  return out;
}

std::vector<std::string> PeerTable::probe_targets(std::uint64_t tick,
                                                  unsigned dead_probe_every) const {
  std::lock_guard lock(mu_);
  const bool slow_round = dead_probe_every == 0 || tick % dead_probe_every == 0;
  std::vector<std::string> out;
  for (const auto& p : peers_) {
    if (p.state != PeerState::dead || slow_round) out.push_back(p.address);
  }
  return out;
}

std::optional<PeerInfo> PeerTable::get(const std::string& address) const {
  std::lock_guard lock(mu_);
  for (const auto& p : peers_) {
    if (p.address == address) return p;
  }
  return std::nullopt;
}

std::vector<PeerInfo> PeerTable::snapshot() const {
  std::lock_guard lock(mu_);
  return peers_;
}

std::size_t PeerTable::size() const {
  std::lock_guard lock(mu_);
  return peers_.size();
}

}  // namespace hasq
