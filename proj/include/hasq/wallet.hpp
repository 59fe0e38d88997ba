#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hasq/chain.hpp"
#include "hasq/hashing.hpp"

namespace hasq {

/// K_i = Hash(i, S, passphrase).
Digest derive_key(const HashConfig& cfg, const Digest& token, std::string_view passphrase,
                  std::uint64_t index);

/// Passphrase-derived keys for one token. The passphrase is validated once
/// here so key derivation never fails later.
class KeyMaterial {
 public:
  KeyMaterial(HashConfig cfg, Digest token, std::string passphrase);

  KeyMaterial(const KeyMaterial& other);
  KeyMaterial& operator=(const KeyMaterial& other);

  const Digest& token() const { return token_; }
  const HashConfig& config() const { return cfg_; }

  Digest key(std::uint64_t index) const;
  /// K_first ... K_{first+count-1}.
  std::vector<Digest> keys(std::uint64_t first, std::size_t count) const;

 private:
  HashConfig cfg_;
  Digest token_;
  std::string passphrase_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::uint64_t, Digest> cache_;
};

/// True iff the given window of keys K_{n+1} .. K_{n+m+1} reproduces head's
/// G and O fields.
bool owns_with_keys(const HashConfig& cfg, const Record& head, std::span<const Digest> keys);

/// Ownership predicate against the last record of `chain`.
bool owns(const HashConfig& cfg, const TokenChain& chain, const KeyMaterial& km);

/// `OFFER <S> <O>`: the recipient's commitment for the sender's half record.
struct OfferMessage {
  Digest token;
  Digest owner;

  friend bool operator==(const OfferMessage&, const OfferMessage&) = default;
};

/// `COUNTER <S> <G_1> .. <G_m> <O>`: commitments of the transfer's last record.
struct CounterMessage {
  Digest token;
  std::vector<Digest> generators;
  Digest owner;

  friend bool operator==(const CounterMessage&, const CounterMessage&) = default;
};

std::string serialize_offer(const OfferMessage& msg);
std::string serialize_counter(const CounterMessage& msg);
/// Throw std::invalid_argument on malformed lines.
OfferMessage parse_offer(const HashConfig& cfg, std::string_view line);
CounterMessage parse_counter(const HashConfig& cfg, std::string_view line);

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the recipient when the chain does not show the expected half
/// record. The session is aborted before the exception leaves.
class TransferAborted : public ProtocolError {
 public:
  TransferAborted(const std::string& what, std::string evidence)
      : ProtocolError(what), evidence_(std::move(evidence)) {}
  const std::string& evidence() const { return evidence_; }

 private:
  std::string evidence_;
};

enum class TransferRole { sender, recipient };
enum class TransferPhase { offered, half_published, counter_sent, complete, aborted };

std::string_view phase_name(TransferPhase p);
std::optional<TransferPhase> parse_phase(std::string_view s);
std::string_view role_name(TransferRole r);
std::optional<TransferRole> parse_role(std::string_view s);

/// One side of the two-round handshake.
///
/// Holds no secrets: keys are re-derived from KeyMaterial on every step, so
/// a session can be written to disk as is.
class TransferSession {
 public:
  TransferSession(TransferRole role, Digest token, std::uint64_t base_seq, TransferPhase phase);

  TransferRole role() const { return role_; }
  const Digest& token() const { return token_; }
  /// Seq of the chain head when the handshake started.
  std::uint64_t base_seq() const { return base_seq_; }
  TransferPhase phase() const { return phase_; }

  const std::optional<OfferMessage>& offer() const { return offer_; }
  const std::optional<CounterMessage>& counter() const { return counter_; }
  void set_offer(OfferMessage m) { offer_ = std::move(m); }
  void set_counter(CounterMessage m) { counter_ = std::move(m); }

  /// Monotone along offered -> half-published -> counter-sent -> complete.
  /// Throws ProtocolError on any other transition.
  void advance(TransferPhase next);
  /// Terminal; allowed from every phase but complete.
  void abort();

 private:
  TransferRole role_;
  Digest token_;
  std::uint64_t base_seq_;
  TransferPhase phase_;
  std::optional<OfferMessage> offer_;
  std::optional<CounterMessage> counter_;
};

struct Offer {
  OfferMessage message;
  TransferSession session;
};

/// Recipient, round 1. `last_seq` is the seq of the chain head it has read.
Offer recipient_offer(const HashConfig& cfg, const Digest& token, std::uint64_t last_seq,
                      const KeyMaterial& recipient);

struct HalfRecord {
  Record record;
  /// Sender session in phase `offered`; advance to half_published once the
  /// store has accepted `record`.
  TransferSession session;
};

/// Sender, round 1: builds record n+1 revealing K_{n+1} with the recipient's O.
/// Refuses (ProtocolError) unless the sender owns the chain.
HalfRecord sender_publish_half(const HashConfig& cfg, const TokenChain& chain,
                               const KeyMaterial& sender, const OfferMessage& msg1,
                               std::optional<std::string> data = std::nullopt);

/// Recipient, round 2. Needs the half record on chain with the offered O;
/// otherwise aborts the session and throws TransferAborted.
CounterMessage recipient_counter(const HashConfig& cfg, const TokenChain& chain,
                                 const KeyMaterial& recipient, TransferSession& session);

/// Recipient, after the final record: advances the session to complete iff
/// the recipient now owns the chain. Returns whether it does.
bool recipient_confirm(const HashConfig& cfg, const TokenChain& chain,
                       const KeyMaterial& recipient, TransferSession& session);

/// Sender, round 2: records n+2 .. n+m+1, the last one carrying msg2's G/O
/// (and `data`, if any). Session must be half_published and is left
/// unchanged; advance to complete once the store has accepted them all.
std::vector<Record> sender_publish_final(const HashConfig& cfg, const TokenChain& chain,
                                         const KeyMaterial& sender,
                                         const TransferSession& session,
                                         const CounterMessage& msg2,
                                         std::optional<std::string> data = std::nullopt);

/// Genesis record for a new token: K_0 plus commitments to K_1 .. K_{m+1}.
Record make_genesis(const HashConfig& cfg, const KeyMaterial& owner,
                    std::optional<std::string> data = std::nullopt);

}  // namespace hasq
