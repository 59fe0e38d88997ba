#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace hasq {

enum class HashAlgorithm { sha256, sha512, sha3_256 };

std::string_view algorithm_name(HashAlgorithm alg);
std::optional<HashAlgorithm> parse_algorithm(std::string_view name);

/// Number of raw bytes the algorithm produces. Hex digests are twice as long.
std::size_t digest_bytes(HashAlgorithm alg);
inline std::size_t digest_hex_length(HashAlgorithm alg) { return 2 * digest_bytes(alg); }

/// Thrown when a hash argument would make the space-joined encoding ambiguous.
/// Always a caller bug; arguments are never sanitized.
class EncodingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-database hashing parameters. Two databases interoperate iff their
/// configs compare equal.
struct HashConfig {
  HashAlgorithm algorithm = HashAlgorithm::sha256;
  std::optional<std::string> domain_tag;
  std::size_t generator_count = 1;

  /// Throws EncodingError if the domain tag is empty or holds a separator byte.
  void validate() const;

  friend bool operator==(const HashConfig&, const HashConfig&) = default;
};

/// Lowercase hex digest. Construction goes through parse() or the hash
/// functions, so a Digest value is always well formed for some algorithm.
class Digest {
 public:
  Digest() = default;

  /// Accepts exactly digest_hex_length(alg) characters from [0-9a-f].
  static std::optional<Digest> parse(std::string_view hex, HashAlgorithm alg);
  /// Like parse() but throws std::invalid_argument.
  static Digest from_hex(std::string_view hex, HashAlgorithm alg);
  /// Hex-encodes raw hash output.
  static Digest from_raw(std::span<const unsigned char> raw);

  const std::string& hex() const { return hex_; }
  bool empty() const { return hex_.empty(); }

  friend auto operator<=>(const Digest&, const Digest&) = default;

 private:
  explicit Digest(std::string hex) : hex_(std::move(hex)) {}

  std::string hex_;
};

bool is_lower_hex(std::string_view s);

/// Hash of the bytes `tag arg1 arg2 ... argN` joined by single spaces (the tag
/// and its space are omitted when unset).
/// Every argument must be non-empty and free of space, CR and LF.
Digest canonical_hash(const HashConfig& cfg, std::span<const std::string_view> args);
Digest canonical_hash(const HashConfig& cfg, std::initializer_list<std::string_view> args);

/// Hash(seq, S, value): the three-argument form every linking rule uses.
Digest link_hash(const HashConfig& cfg, std::uint64_t seq, const Digest& token,
                 const Digest& value);

/// Plain digest of raw bytes, without domain tag. Used to turn files into tokens.
Digest hash_bytes(HashAlgorithm alg, std::span<const unsigned char> bytes);

/// Throws EncodingError unless `arg` is usable as a hash argument.
void check_hash_argument(std::string_view arg, std::string_view what);

}  // namespace hasq
