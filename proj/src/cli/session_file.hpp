#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "hasq/hashing.hpp"
#include "hasq/wallet.hpp"

namespace hasq::cli {

class SessionBusy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// --state-dir, else $HASQ_STATE_DIR, else ~/.hasq.
std::filesystem::path resolve_state_dir(const std::string& flag);

std::filesystem::path session_path(const std::filesystem::path& dir, TransferRole role,
                                   const Digest& token);

/// Exclusive claim on one session file, held for the lifetime of the object.
/// A second claim from any process throws SessionBusy.
class SessionClaim {
 public:
  explicit SessionClaim(const std::filesystem::path& session);
  ~SessionClaim();
  SessionClaim(const SessionClaim&) = delete;
  SessionClaim& operator=(const SessionClaim&) = delete;

 private:
  int fd_ = -1;
};

/// The file holds role, token, base seq, phase and the exchanged message
/// lines. Nothing secret.
void save_session(const std::filesystem::path& path, const TransferSession& s);
std::optional<TransferSession> load_session(const HashConfig& cfg,
                                            const std::filesystem::path& path);

}  // namespace hasq::cli
