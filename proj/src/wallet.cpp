#include "hasq/wallet.hpp"

#include <algorithm>
#include <sstream>

namespace hasq {

Digest derive_key(const HashConfig& cfg, const Digest& token, std::string_view passphrase,
                  std::uint64_t index) {
  const std::string i = std::to_string(index);
  return canonical_hash(cfg, {i, token.hex(), passphrase});
}

KeyMaterial::KeyMaterial(HashConfig cfg, Digest token, std::string passphrase)
    : cfg_(std::move(cfg)), token_(std::move(token)), passphrase_(std::move(passphrase)) {
  cfg_.validate();
  check_hash_argument(passphrase_, "passphrase");
  if (token_.empty()) throw std::invalid_argument("key material needs a token");
}

KeyMaterial::KeyMaterial(const KeyMaterial& other)
    : cfg_(other.cfg_), token_(other.token_), passphrase_(other.passphrase_) {}

KeyMaterial& KeyMaterial::operator=(const KeyMaterial& other) {
  if (this != &other) {
    cfg_ = other.cfg_;
    token_ = other.token_;
    passphrase_ = other.passphrase_;
    std::lock_guard lock(cache_mu_);
    cache_.clear();
  }
  return *this;
}

Digest KeyMaterial::key(std::uint64_t index) const {
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = cache_.find(index); it != cache_.end()) return it->second;
  }
  Digest k = derive_key(cfg_, token_, passphrase_, index);
  std::lock_guard lock(cache_mu_);
  if (cache_.size() > 256) cache_.clear();
  cache_.emplace(index, k);
  return k;
}

std::vector<Digest> KeyMaterial::keys(std::uint64_t first, std::size_t count) const {
  std::vector<Digest> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(key(first + i));
  return out;
}

bool owns_with_keys(const HashConfig& cfg, const Record& head, std::span<const Digest> keys) {
  if (keys.size() != cfg.generator_count + 1) return false;
  const Commitment c = make_generator_cascade(cfg, head.seq + 1, head.token, keys);
  return c.generators == head.generators && c.owner == head.owner;
}

bool owns(const HashConfig& cfg, const TokenChain& chain, const KeyMaterial& km) {
  if (chain.empty() || km.token() != chain.token) return false;
  const Record& head = chain.head();
  const auto keys = km.keys(head.seq + 1, cfg.generator_count + 1);
  return owns_with_keys(cfg, head, keys);
}

// --- message lines ---------------------------------------------------------

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t sp = line.find(' ', pos);
    out.push_back(line.substr(pos, sp == std::string_view::npos ? std::string_view::npos
                                                                 : sp - pos));
    if (sp == std::string_view::npos) break;
    pos = sp + 1;
  }
  return out;
}

Digest message_digest(std::string_view field, HashAlgorithm alg, const char* what) {
  auto d = Digest::parse(field, alg);
  if (!d) throw std::invalid_argument(std::string("malformed ") + what + " digest");
  return *d;
}

}  // namespace

std::string serialize_offer(const OfferMessage& msg) {
  return "OFFER " + msg.token.hex() + " " + msg.owner.hex();
}

std::string serialize_counter(const CounterMessage& msg) {
  std::string out = "COUNTER " + msg.token.hex();
  for (const auto& g : msg.generators) out += " " + g.hex();
  out += " " + msg.owner.hex();
  return out;
}

OfferMessage parse_offer(const HashConfig& cfg, std::string_view line) {
  const auto f = split_spaces(line);
  if (f.size() != 3 || f[0] != "OFFER") throw std::invalid_argument("not an OFFER line");
  return {message_digest(f[1], cfg.algorithm, "token"),
          message_digest(f[2], cfg.algorithm, "owner")};
}

CounterMessage parse_counter(const HashConfig& cfg, std::string_view line) {
  const auto f = split_spaces(line);
  const std::size_t m = cfg.generator_count;
  if (f.empty() || f[0] != "COUNTER") throw std::invalid_argument("not a COUNTER line");
  if (f.size() != m + 3) {
    throw std::invalid_argument("COUNTER line needs " + std::to_string(m) + " generators");
  }
  CounterMessage msg;
  msg.token = message_digest(f[1], cfg.algorithm, "token");
  for (std::size_t j = 0; j < m; ++j) {
    msg.generators.push_back(message_digest(f[2 + j], cfg.algorithm, "generator"));
  }
  msg.owner = message_digest(f[2 + m], cfg.algorithm, "owner");
  return msg;
}

// --- sessions --------------------------------------------------------------

std::string_view phase_name(TransferPhase p) {
  switch (p) {
    case TransferPhase::offered:
      return "offered";
    case TransferPhase::half_published:
      return "half-published";
    case TransferPhase::counter_sent:
      return "counter-sent";
    case TransferPhase::complete:
      return "complete";
    case TransferPhase::aborted:
      return "aborted";
  }
  return "?";
}

std::optional<TransferPhase> parse_phase(std::string_view s) {
  for (auto p : {TransferPhase::offered, TransferPhase::half_published,
                 TransferPhase::counter_sent, TransferPhase::complete, TransferPhase::aborted}) {
    if (phase_name(p) == s) return p;
  }
  return std::nullopt;
}

std::string_view role_name(TransferRole r) {
  return r == TransferRole::sender ? "sender" : "recipient";
}

std::optional<TransferRole> parse_role(std::string_view s) {
  if (s == "sender") return TransferRole::sender;
  if (s == "recipient") return TransferRole::recipient;
  return std::nullopt;
}

TransferSession::TransferSession(TransferRole role, Digest token, std::uint64_t base_seq,
                                 TransferPhase phase)
    : role_(role), token_(std::move(token)), base_seq_(base_seq), phase_(phase) {}

void TransferSession::advance(TransferPhase next) {
  if (phase_ == TransferPhase::aborted || phase_ == TransferPhase::complete ||
      next == TransferPhase::aborted || static_cast<int>(next) <= static_cast<int>(phase_)) {
    throw ProtocolError("illegal transfer phase change " + std::string(phase_name(phase_)) +
                        " -> " + std::string(phase_name(next)));
  }
  phase_ = next;
}

void TransferSession::abort() {
  if (phase_ == TransferPhase::complete) throw ProtocolError("cannot abort a complete transfer");
  phase_ = TransferPhase::aborted;
}

// --- handshake -------------------------------------------------------------

Offer recipient_offer(const HashConfig& cfg, const Digest& token, std::uint64_t last_seq,
                      const KeyMaterial& recipient) {
  if (recipient.token() != token) throw TokenMismatch("key material is for another token");
  const std::size_t m = cfg.generator_count;
  // O of record n+1 commits to K'_{n+m+2}.
  OfferMessage msg{token, nested_commitment(cfg, last_seq + 2, token, m + 1,
                                            recipient.key(last_seq + m + 2))};
  TransferSession session(TransferRole::recipient, token, last_seq, TransferPhase::offered);
  session.set_offer(msg);
  return {std::move(msg), std::move(session)};
}

HalfRecord sender_publish_half(const HashConfig& cfg, const TokenChain& chain,
                               const KeyMaterial& sender, const OfferMessage& msg1,
                               std::optional<std::string> data) {
  if (chain.empty()) throw ProtocolError("chain is empty");
  if (msg1.token != chain.token) throw TokenMismatch("offer is for another token");
  if (!owns(cfg, chain, sender)) throw ProtocolError("sender does not own the token");

  const Record& head = chain.head();
  const std::uint64_t n = head.seq;
  const std::size_t m = cfg.generator_count;

  Record r;
  r.seq = n + 1;
  r.token = chain.token;
  r.key = sender.key(n + 1);
  for (std::size_t j = 1; j <= m; ++j) {
    r.generators.push_back(nested_commitment(cfg, n + 2, chain.token, j, sender.key(n + 1 + j)));
  }
  r.owner = msg1.owner;
  r.data = std::move(data);

  if (auto v = verify_link(cfg, head, r); !v.ok()) {
    throw ProtocolError("half record does not link: " + v.field_name());
  }
  TransferSession session(TransferRole::sender, chain.token, n, TransferPhase::offered);
  session.set_offer(msg1);
  return {std::move(r), std::move(session)};
}

namespace {

const Record* find_seq(const TokenChain& chain, std::uint64_t seq) {
  auto it = std::find_if(chain.records.begin(), chain.records.end(),
                         [seq](const Record& r) { return r.seq == seq; });
  return it == chain.records.end() ? nullptr : &*it;
}

}  // namespace

CounterMessage recipient_counter(const HashConfig& cfg, const TokenChain& chain,
                                 const KeyMaterial& recipient, TransferSession& session) {
  if (session.role() != TransferRole::recipient) throw ProtocolError("not a recipient session");
  if (session.phase() != TransferPhase::offered) {
    throw ProtocolError("counter needs phase offered, have " +
                        std::string(phase_name(session.phase())));
  }
  if (chain.token != session.token()) throw TokenMismatch("chain is for another token");

  const std::uint64_t n = session.base_seq();
  const Record* half = find_seq(chain, n + 1);
  if (!half) {
    session.abort();
    throw TransferAborted("half record not found",
                          "no record at seq " + std::to_string(n + 1));
  }
  if (!session.offer() || half->owner != session.offer()->owner) {
    session.abort();
    throw TransferAborted("half record does not carry the offered owner commitment",
                          serialize_record(*half));
  }
  if (chain.head().seq != n + 1) {
    session.abort();
    throw TransferAborted("chain moved past the half record", serialize_record(chain.head()));
  }

  const std::size_t m = cfg.generator_count;
  const std::uint64_t last = n + m + 1;
  CounterMessage msg;
  msg.token = chain.token;
  for (std::size_t j = 1; j <= m; ++j) {
    msg.generators.push_back(
        nested_commitment(cfg, last + 1, chain.token, j, recipient.key(last + j)));
  }
  msg.owner = nested_commitment(cfg, last + 1, chain.token, m + 1, recipient.key(last + m + 1));
  session.set_counter(msg);
  session.advance(TransferPhase::counter_sent);
  return msg;
}

bool recipient_confirm(const HashConfig& cfg, const TokenChain& chain,
                       const KeyMaterial& recipient, TransferSession& session) {
  if (session.role() != TransferRole::recipient) throw ProtocolError("not a recipient session");
  if (!owns(cfg, chain, recipient)) return false;
  if (session.phase() == TransferPhase::offered) session.advance(TransferPhase::counter_sent);
  if (session.phase() == TransferPhase::counter_sent) session.advance(TransferPhase::complete);
  return session.phase() == TransferPhase::complete;
}

std::vector<Record> sender_publish_final(const HashConfig& cfg, const TokenChain& chain,
                                         const KeyMaterial& sender,
                                         const TransferSession& session,
                                         const CounterMessage& msg2,
                                         std::optional<std::string> data) {
  if (session.role() != TransferRole::sender) throw ProtocolError("not a sender session");
  if (session.phase() != TransferPhase::half_published) {
    throw ProtocolError("final needs phase half-published, have " +
                        std::string(phase_name(session.phase())));
  }
  if (msg2.token != session.token() || chain.token != session.token()) {
    throw TokenMismatch("counter message is for another token");
  }
  const std::size_t m = cfg.generator_count;
  if (msg2.generators.size() != m) throw ProtocolError("counter message has wrong generator count");
  const std::uint64_t n = session.base_seq();
  if (chain.empty() || chain.head().seq != n + 1) {
    throw ProtocolError("chain head is not the half record");
  }
  if (m == 0) return {};

  // Last record takes the recipient's commitments; earlier ones follow by
  // applying the linking rule backwards from it.
  const std::uint64_t last = n + m + 1;
  std::vector<Record> out(m);
  Record& tail = out.back();
  tail.seq = last;
  tail.token = chain.token;
  tail.key = sender.key(last);
  tail.generators = msg2.generators;
  tail.owner = msg2.owner;
  tail.data = std::move(data);
  for (std::size_t i = m - 1; i-- > 0;) {
    Record& r = out[i];
    const Record& next = out[i + 1];
    r.seq = next.seq - 1;
    r.token = chain.token;
    r.key = sender.key(r.seq);
    Commitment c = expected_fields(cfg, r, next.key, next.generators);
    r.generators = std::move(c.generators);
    r.owner = c.owner;
  }

  if (auto v = verify_link(cfg, chain.head(), out.front()); !v.ok()) {
    throw ProtocolError("counter message does not extend the half record: " + v.field_name());
  }
  return out;
}

Record make_genesis(const HashConfig& cfg, const KeyMaterial& owner,
                    std::optional<std::string> data) {
  Record r;
  r.seq = 0;
  r.token = owner.token();
  r.key = owner.key(0);
  const auto keys = owner.keys(1, cfg.generator_count + 1);
  Commitment c = make_generator_cascade(cfg, 1, owner.token(), keys);
  r.generators = std::move(c.generators);
  r.owner = c.owner;
  r.data = std::move(data);
  return r;
}

}  // namespace hasq
