#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "hasq/hashing.hpp"
#include "sha256_oracle.hpp"

using namespace hasq;

namespace {

// Values below were computed once with Python's hashlib and frozen.
constexpr const char* kToken = "0be8e02f95e60b841c20aa1f1a87911475b80d1f69ebe64d1cc804d36fe89e7e";
constexpr const char* kAliceK1 = "80cb41600b3fd0c06bc25fc318fe236eafab90c2d88a699e7e8b8e431c681e75";
constexpr const char* kAliceK2 = "72022be350ce80fcd2462181562968520d35b002d1479d1a159fa239395fa95f";

std::string sha256_of(std::string_view s) {
  auto* p = reinterpret_cast<const unsigned char*>(s.data());
  return hash_bytes(HashAlgorithm::sha256, {p, s.size()}).hex();
}

}  // namespace

TEST_CASE("oracle reproduces the FIPS 180-4 vectors") {
  CHECK(oracle::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(oracle::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(oracle::sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(oracle::sha256_hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("hash_bytes agrees with the oracle on random messages") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    std::string msg(rng() % 300, '\0');
    for (auto& c : msg) c = static_cast<char>(rng());
    REQUIRE(sha256_of(msg) == oracle::sha256_hex(msg));
  }
}

TEST_CASE("canonical_hash joins with single spaces") {
  HashConfig cfg;
  const std::string want = oracle::sha256_hex(std::string("1 ") + kToken + " alice");
  CHECK(canonical_hash(cfg, {"1", kToken, "alice"}).hex() == want);
  CHECK(want == kAliceK1);
  CHECK(canonical_hash(cfg, {"2", kToken, "alice"}).hex() == kAliceK2);

  SUBCASE("domain tag is a leading argument") {
    cfg.domain_tag = "net1";
    CHECK(canonical_hash(cfg, {"1", kToken, "alice"}).hex() ==
          "5edac4fc411f0988fdd3271d1125aec5e120d4493620a816f1b83268338ec222");
  }
  SUBCASE("other algorithms") {
    cfg.algorithm = HashAlgorithm::sha512;
    CHECK(canonical_hash(cfg, {"1", kToken, "alice"}).hex() ==
          "26b7df586fd1ae8422ed8574b28c7a9ee424ce674fb09b4d34d693f44e8d0627"
          "ad2f26dfb0ea8f5f1fc50d321a6fb25549b5c5ee31d851c0216f8fc7c61aaefa");
    cfg.algorithm = HashAlgorithm::sha3_256;
    CHECK(canonical_hash(cfg, {"1", kToken, "alice"}).hex() ==
          "2e37b4c013e82447df9bfb6f45d6a0faf5313271584d07ec33e8a1a24b57f7bc");
  }
}

TEST_CASE("canonical_hash matches the oracle for random argument lists") {
  std::mt19937_64 rng(11);
  HashConfig cfg;
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> args(1 + rng() % 5);
    std::string joined;
    for (auto& a : args) {
      a = fixtures::random_passphrase(rng);
      if (!joined.empty()) joined.push_back(' ');
      joined += a;
    }
    std::vector<std::string_view> views(args.begin(), args.end());
    REQUIRE(canonical_hash(cfg, views).hex() == oracle::sha256_hex(joined));
  }
}

TEST_CASE("link_hash writes the seq in decimal") {
  HashConfig cfg;
  const Digest s = Digest::from_hex(kToken, cfg.algorithm);
  const Digest k = Digest::from_hex(kAliceK1, cfg.algorithm);
  CHECK(link_hash(cfg, 12, s, k).hex() ==
        oracle::sha256_hex(std::string("12 ") + kToken + " " + kAliceK1));
}

TEST_CASE("arguments that would make the encoding ambiguous are refused") {
  HashConfig cfg;
  CHECK_THROWS_AS(canonical_hash(cfg, {"a b"}), EncodingError);
  CHECK_THROWS_AS(canonical_hash(cfg, {"a\nb"}), EncodingError);
  CHECK_THROWS_AS(canonical_hash(cfg, {"a\r"}), EncodingError);
  CHECK_THROWS_AS(canonical_hash(cfg, {""}), EncodingError);
  std::vector<std::string_view> none;
  CHECK_THROWS_AS(canonical_hash(cfg, none), EncodingError);
  cfg.domain_tag = "two words";
  CHECK_THROWS_AS(cfg.validate(), EncodingError);
}

TEST_CASE("Digest parsing") {
  const auto alg = HashAlgorithm::sha256;
  CHECK(Digest::parse(kToken, alg).has_value());
  CHECK_FALSE(Digest::parse(std::string(kToken).substr(1), alg));
  std::string upper = kToken;
  upper[1] = 'B';
  CHECK_FALSE(Digest::parse(upper, alg));
  std::string junk = kToken;
  junk[5] = 'g';
  CHECK_FALSE(Digest::parse(junk, alg));
  CHECK_FALSE(Digest::parse(kToken, HashAlgorithm::sha512));
  CHECK_THROWS_AS(Digest::from_hex("00", alg), std::invalid_argument);
  CHECK(Digest::from_hex(kToken, alg).hex() == kToken);

  CHECK(digest_hex_length(HashAlgorithm::sha512) == 128);
  CHECK(parse_algorithm("sha3-256") == HashAlgorithm::sha3_256);
  CHECK_FALSE(parse_algorithm("md5"));
  CHECK(algorithm_name(HashAlgorithm::sha512) == "sha512");
}
