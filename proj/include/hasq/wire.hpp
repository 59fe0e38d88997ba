#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hasq/chain.hpp"
#include "hasq/hashing.hpp"

namespace hasq::wire {

inline constexpr std::size_t kMaxLineBytes = 64 * 1024;

enum class Verb { ping, gethead, get, getchain, add, peers };

struct Command {
  Verb verb = Verb::ping;
  Digest token;              // GETHEAD, GET, GETCHAIN
  std::uint64_t seq = 0;     // GET
  std::string record_line;   // ADD, unparsed
};

/// Single line, newline already stripped: at most kMaxLineBytes, valid UTF-8,
/// no control bytes.
bool line_is_clean(std::string_view line);

/// nullopt means the server answers `ERR bad-request`.
std::optional<Command> parse_command(const HashConfig& cfg, std::string_view line);

std::string format_command(const Command& cmd);
std::string ping();
std::string gethead(const Digest& token);
std::string get(const Digest& token, std::uint64_t seq);
std::string getchain(const Digest& token);
std::string add(const Record& r);
std::string peers();

inline constexpr std::string_view kPong = "OK pong";
inline constexpr std::string_view kAdded = "OK added";
inline constexpr std::string_view kDuplicate = "OK duplicate";
inline constexpr std::string_view kEnd = "END";
inline constexpr std::string_view kNotFound = "ERR not-found";
inline constexpr std::string_view kPruned = "ERR pruned";
inline constexpr std::string_view kBadRequest = "ERR bad-request";

std::string rec_line(const Record& r);
/// Strips a `REC ` prefix; nullopt if absent.
std::optional<std::string_view> rec_payload(std::string_view line);
std::string peer_line(std::string_view address);
std::optional<std::string_view> peer_payload(std::string_view line);

}  // namespace hasq::wire
