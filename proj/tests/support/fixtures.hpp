#pragma once

#include <stdlib.h>

#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "hasq/chain.hpp"
#include "hasq/config.hpp"
#include "hasq/hashing.hpp"
#include "hasq/store.hpp"
#include "hasq/wallet.hpp"

namespace fixtures {

using namespace hasq;

inline HashConfig config_m(std::size_t m) {
  HashConfig cfg;
  cfg.generator_count = m;
  return cfg;
}

inline Digest random_digest(std::mt19937_64& rng, HashAlgorithm alg = HashAlgorithm::sha256) {
  std::vector<unsigned char> raw(digest_bytes(alg));
  for (auto& b : raw) b = static_cast<unsigned char>(rng());
  return Digest::from_raw(raw);
}

inline std::string random_passphrase(std::mt19937_64& rng) {
  static constexpr char kChars[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.!";
  std::string s(8 + rng() % 16, 'a');
  for (auto& c : s) c = kChars[rng() % (sizeof kChars - 1)];
  return s;
}

/// Chain of `length` records built from fresh random keys, each record's
/// commitments produced by make_generator_cascade.
inline TokenChain random_chain(const HashConfig& cfg, std::size_t length, std::mt19937_64& rng) {
  const std::size_t m = cfg.generator_count;
  TokenChain chain;
  chain.token = random_digest(rng, cfg.algorithm);
  std::vector<Digest> keys;
  for (std::size_t i = 0; i < length + m + 1; ++i) keys.push_back(random_digest(rng, cfg.algorithm));
  for (std::size_t q = 0; q < length; ++q) {
    Record r;
    r.seq = q;
    r.token = chain.token;
    r.key = keys[q];
    Commitment c = make_generator_cascade(cfg, q + 1, chain.token,
                                          std::span<const Digest>(keys).subspan(q + 1, m + 1));
    r.generators = std::move(c.generators);
    r.owner = c.owner;
    chain.records.push_back(std::move(r));
  }
  return chain;
}

/// Same digest with one hex digit changed.
inline Digest flip_digit(const Digest& d, std::size_t pos, HashAlgorithm alg) {
  std::string hex = d.hex();
  hex[pos] = hex[pos] == '0' ? '1' : '0';
  return Digest::from_hex(hex, alg);
}

/// Runs the full handshake against `ledger`. Appends every record through
/// the gate. Returns the published records; empty on any failure.
inline std::vector<Record> transfer(const HashConfig& cfg, Ledger& ledger, const Digest& token,
                                    const KeyMaterial& sender, const KeyMaterial& recipient) {
  TokenChain chain = ledger.chain(token);
  Offer offer = recipient_offer(cfg, token, chain.head().seq, recipient);
  HalfRecord half = sender_publish_half(cfg, chain, sender, offer.message);
  if (!ledger.append(half.record).accepted()) return {};
  half.session.advance(TransferPhase::half_published);
  chain = ledger.chain(token);
  CounterMessage msg2 = recipient_counter(cfg, chain, recipient, offer.session);
  auto finals = sender_publish_final(cfg, chain, sender, half.session, msg2);
  for (const auto& r : finals) {
    if (!ledger.append(r).accepted()) return {};
  }
  std::vector<Record> out{half.record};
  out.insert(out.end(), finals.begin(), finals.end());
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "hasq-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename Pred>
bool wait_until(Pred pred, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return pred();
}

}  // namespace fixtures
