#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hasq/hashing.hpp"

namespace hasq {

inline constexpr std::size_t kDefaultMaxDataBytes = 1024;

/// One ledger line: `N S K G_1 .. G_m O [D]`.
struct Record {
  std::uint64_t seq = 0;
  Digest token;
  Digest key;
  std::vector<Digest> generators;
  Digest owner;
  std::optional<std::string> data;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Records of one token in seq order. Not validated on construction, see
/// verify_chain().
struct TokenChain {
  Digest token;
  std::vector<Record> records;

  bool empty() const { return records.empty(); }
  const Record& head() const { return records.back(); }
};

/// The G list and O field a record carries; what it commits to about its
/// successors.
struct Commitment {
  std::vector<Digest> generators;
  Digest owner;

  friend bool operator==(const Commitment&, const Commitment&) = default;
};

/// H(first, S, H(first+1, S, ... H(first+depth-1, S, key))).
///
/// Field j of record q (O counting as field m+1) is
/// nested_commitment(q+1, j, K_{q+j}): every field commits to exactly one
/// future key, at a nesting depth equal to its position.
Digest nested_commitment(const HashConfig& cfg, std::uint64_t first_seq, const Digest& token,
                         std::size_t depth, const Digest& key);

/// Fields that record n_next-1 must carry so that the holder of
/// keys = {K_{n_next}, ..., K_{n_next+m}} owns it. keys.size() must be m+1.
Commitment make_generator_cascade(const HashConfig& cfg, std::uint64_t n_next,
                                  const Digest& token, std::span<const Digest> keys);

/// What prev's G and O must equal given the successor's K and G list:
/// G[1] = H(N+1, S, K'), G[j+1] = H(N+1, S, G'[j]), O = H(N+1, S, G'[m])
/// (O = H(N+1, S, K') when m = 0).
Commitment expected_fields(const HashConfig& cfg, const Record& prev, const Digest& next_key,
                           std::span<const Digest> next_generators);

enum class LinkFailure { none, token, seq, generator, owner, generator_count };

struct LinkVerdict {
  LinkFailure failure = LinkFailure::none;
  /// 1-based index of the failing generator when failure == generator.
  std::size_t generator_index = 0;

  bool ok() const { return failure == LinkFailure::none; }
  /// `seq`, `G[2]`, `O`, ... ; empty when ok.
  std::string field_name() const;

  friend bool operator==(const LinkVerdict&, const LinkVerdict&) = default;
};

class TokenMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Accepts iff next.N == prev.N + 1 and prev's G/O equal expected_fields()
/// byte for byte. Reports the first failing field in order seq, G[1..m], O.
/// Throws TokenMismatch if the records belong to different tokens.
LinkVerdict verify_link(const HashConfig& cfg, const Record& prev, const Record& next);

struct ChainReport {
  /// links[i] is the verdict for records[i] -> records[i+1].
  std::vector<LinkVerdict> links;
  bool passed = true;

  std::optional<std::size_t> first_failure() const;
};

ChainReport verify_chain(const HashConfig& cfg, const TokenChain& chain);

class ParseError : public std::runtime_error {
 public:
  enum class Kind { field_count, bad_number, bad_digest, bad_data };

  ParseError(Kind kind, std::size_t field, const std::string& what)
      : std::runtime_error("field " + std::to_string(field) + ": " + what),
        kind_(kind),
        field_(field) {}

  Kind kind() const { return kind_; }
  /// 1-based field position within the line.
  std::size_t field() const { return field_; }

 private:
  Kind kind_;
  std::size_t field_;
};

std::string serialize_record(const Record& r);

/// Exact inverse of serialize_record() for the given config.
Record parse_record(const HashConfig& cfg, std::string_view line,
                    std::size_t max_data_bytes = kDefaultMaxDataBytes);

/// Canonical decimal: digits only, no leading zeros, fits in 64 bits.
std::optional<std::uint64_t> parse_canonical_uint(std::string_view s);

/// D must be non-empty valid UTF-8 without control bytes and within the cap.
/// Returns the reason it is not, or nullopt.
std::optional<std::string> data_field_problem(std::string_view d, std::size_t max_data_bytes);

bool is_valid_utf8(std::string_view s);

}  // namespace hasq
