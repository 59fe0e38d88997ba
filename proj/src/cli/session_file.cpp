#include "session_file.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "hasq/chain.hpp"

namespace hasq::cli {

namespace fs = std::filesystem;

fs::path resolve_state_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HASQ_STATE_DIR"); env && *env) return env;
  const char* home = std::getenv("HOME");
  return fs::path(home && *home ? home : ".") / ".hasq";
}

fs::path session_path(const fs::path& dir, TransferRole role, const Digest& token) {
  return dir / (std::string(role_name(role)) + "-" + token.hex() + ".session");
}

SessionClaim::SessionClaim(const fs::path& session) {
  fs::create_directories(session.parent_path());
  const fs::path lock = session.string() + ".lock";
  fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
  if (fd_ < 0) throw SessionBusy("cannot open " + lock.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw SessionBusy("session in use by another invocation: " + session.string());
  }
}

SessionClaim::~SessionClaim() {
  if (fd_ >= 0) ::close(fd_);
}

void save_session(const fs::path& path, const TransferSession& s) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << "role=" << role_name(s.role()) << '\n'
        << "token=" << s.token().hex() << '\n'
        << "base_seq=" << s.base_seq() << '\n'
        << "phase=" << phase_name(s.phase()) << '\n';
    if (s.offer()) out << "offer=" << serialize_offer(*s.offer()) << '\n';
    if (s.counter()) out << "counter=" << serialize_counter(*s.counter()) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<TransferSession> load_session(const HashConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto field = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(path.string() + ": missing " + key);
    return it->second;
  };
  auto role = parse_role(field("role"));
  auto phase = parse_phase(field("phase"));
  auto seq = parse_canonical_uint(field("base_seq"));
  auto token = Digest::parse(field("token"), cfg.algorithm);
  if (!role || !phase || !seq || !token) {
    throw std::runtime_error(path.string() + ": corrupt session file");
  }
  TransferSession s(*role, *token, *seq, *phase);
  if (auto it = kv.find("offer"); it != kv.end()) s.set_offer(parse_offer(cfg, it->second));
  if (auto it = kv.find("counter"); it != kv.end()) s.set_counter(parse_counter(cfg, it->second));
  return s;
}

}  // namespace hasq::cli
