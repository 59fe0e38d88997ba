#include "hasq/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace hasq {

namespace {

const EVP_MD* evp_for(HashAlgorithm alg) {
  switch (alg) {
    case HashAlgorithm::sha256:
      return EVP_sha256();
    case HashAlgorithm::sha512:
      return EVP_sha512();
    case HashAlgorithm::sha3_256:
      return EVP_sha3_256();
  }
  throw std::invalid_argument("unknown hash algorithm");
}

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

bool is_separator(char c) { return c == ' ' || c == '\n' || c == '\r'; }

}  // namespace

std::string_view algorithm_name(HashAlgorithm alg) {
  switch (alg) {
    case HashAlgorithm::sha256:
      return "sha256";
    case HashAlgorithm::sha512:
      return "sha512";
    case HashAlgorithm::sha3_256:
      return "sha3-256";
  }
  return "unknown";
}

std::optional<HashAlgorithm> parse_algorithm(std::string_view name) {
  if (name == "sha256") return HashAlgorithm::sha256;
  if (name == "sha512") return HashAlgorithm::sha512;
  if (name == "sha3-256") return HashAlgorithm::sha3_256;
  return std::nullopt;
}

std::size_t digest_bytes(HashAlgorithm alg) {
  switch (alg) {
    case HashAlgorithm::sha256:
    case HashAlgorithm::sha3_256:
      return 32;
    case HashAlgorithm::sha512:
      return 64;
  }
  return 0;
}

void check_hash_argument(std::string_view arg, std::string_view what) {
  if (arg.empty()) throw EncodingError(std::string(what) + " is empty");
  for (char c : arg) {
    if (is_separator(c)) {
      throw EncodingError(std::string(what) + " contains a separator byte");
    }
  }
}

void HashConfig::validate() const {
  if (domain_tag) check_hash_argument(*domain_tag, "domain tag");
}

bool is_lower_hex(std::string_view s) {
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

std::optional<Digest> Digest::parse(std::string_view hex, HashAlgorithm alg) {
  if (hex.size() != digest_hex_length(alg) || !is_lower_hex(hex)) return std::nullopt;
  return Digest(std::string(hex));
}

Digest Digest::from_hex(std::string_view hex, HashAlgorithm alg) {
  auto d = parse(hex, alg);
  if (!d) throw std::invalid_argument("not a " + std::string(algorithm_name(alg)) + " digest: " +
                                      std::string(hex));
  return *d;
}

Digest Digest::from_raw(std::span<const unsigned char> raw) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(raw.size() * 2);
  for (unsigned char b : raw) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0x0f]);
  }
  return Digest(std::move(out));
}

Digest hash_bytes(HashAlgorithm alg, std::span<const unsigned char> bytes) {
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx) throw std::bad_alloc();
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int len = 0;
  if (EVP_DigestInit_ex(ctx.get(), evp_for(alg), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1) {
    throw std::runtime_error("digest computation failed");
  }
  return Digest::from_raw(std::span(out.data(), len));
}

Digest canonical_hash(const HashConfig& cfg, std::span<const std::string_view> args) {
  if (args.empty()) throw EncodingError("canonical_hash needs at least one argument");
  std::string buf;
  std::size_t total = cfg.domain_tag ? cfg.domain_tag->size() + 1 : 0;
  for (auto a : args) total += a.size() + 1;
  buf.reserve(total);
  if (cfg.domain_tag) {
    check_hash_argument(*cfg.domain_tag, "domain tag");
    buf.append(*cfg.domain_tag);
    buf.push_back(' ');
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    check_hash_argument(args[i], "hash argument");
    if (i) buf.push_back(' ');
    buf.append(args[i]);
  }
  auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  return hash_bytes(cfg.algorithm, std::span(p, buf.size()));
}

Digest canonical_hash(const HashConfig& cfg, std::initializer_list<std::string_view> args) {
  return canonical_hash(cfg, std::span(args.begin(), args.size()));
}

Digest link_hash(const HashConfig& cfg, std::uint64_t seq, const Digest& token,
                 const Digest& value) {
  const std::string n = std::to_string(seq);
  return canonical_hash(cfg, {n, token.hex(), value.hex()});
}

}  // namespace hasq
