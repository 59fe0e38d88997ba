#include "hasq/wire.hpp"

namespace hasq::wire {

bool line_is_clean(std::string_view line) {
  if (line.size() > kMaxLineBytes) return false;
  for (char c : line) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x20 || u == 0x7f) return false;
  }
  return is_valid_utf8(line);
}

std::optional<Command> parse_command(const HashConfig& cfg, std::string_view line) {
  if (!line_is_clean(line)) return std::nullopt;
  const auto sp = line.find(' ');
  const std::string_view verb = line.substr(0, sp);
  const std::string_view rest = sp == std::string_view::npos ? std::string_view{}
                                                             : line.substr(sp + 1);
  const bool has_args = sp != std::string_view::npos;

  Command cmd;
  if (verb == "PING" || verb == "PEERS") {
    if (has_args) return std::nullopt;
    cmd.verb = verb == "PING" ? Verb::ping : Verb::peers;
    return cmd;
  }
  if (verb == "GETHEAD" || verb == "GETCHAIN") {
    auto d = Digest::parse(rest, cfg.algorithm);
    if (!d) return std::nullopt;
    cmd.verb = verb == "GETHEAD" ? Verb::gethead : Verb::getchain;
    cmd.token = *d;
    return cmd;
  }
  if (verb == "GET") {
    const auto sp2 = rest.find(' ');
    if (sp2 == std::string_view::npos) return std::nullopt;
    auto d = Digest::parse(rest.substr(0, sp2), cfg.algorithm);
    auto n = parse_canonical_uint(rest.substr(sp2 + 1));
    if (!d || !n) return std::nullopt;
    cmd.verb = Verb::get;
    cmd.token = *d;
    cmd.seq = *n;
    return cmd;
  }
  if (verb == "ADD") {
    if (rest.empty()) return std::nullopt;
    cmd.verb = Verb::add;
    cmd.record_line = std::string(rest);
    return cmd;
  }
  return std::nullopt;
}

std::string ping() { return "PING"; }
std::string gethead(const Digest& token) { return "GETHEAD " + token.hex(); }
std::string get(const Digest& token, std::uint64_t seq) {
  return "GET " + token.hex() + " " + std::to_string(seq);
}
std::string getchain(const Digest& token) { return "GETCHAIN " + token.hex(); }
std::string add(const Record& r) { return "ADD " + serialize_record(r); }
std::string peers() { return "PEERS"; }

std::string format_command(const Command& cmd) {
  switch (cmd.verb) {
    case Verb::ping:
      return ping();
    case Verb::gethead:
      return gethead(cmd.token);
    case Verb::get:
      return get(cmd.token, cmd.seq);
    case Verb::getchain:
      return getchain(cmd.token);
    case Verb::add:
      return "ADD " + cmd.record_line;
    case Verb::peers:
      return peers();
  }
  return {};
}

std::string rec_line(const Record& r) { return "REC " + serialize_record(r); }

std::optional<std::string_view> rec_payload(std::string_view line) {
  if (line.substr(0, 4) != "REC ") return std::nullopt;
  return line.substr(4);
}

std::string peer_line(std::string_view address) { return "PEER " + std::string(address); }

std::optional<std::string_view> peer_payload(std::string_view line) {
  if (line.substr(0, 5) != "PEER ") return std::nullopt;
  return line.substr(5);
}

}  // namespace hasq::wire
