#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hasq/chain.hpp"
#include "hasq/hashing.hpp"

namespace hasq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoreConfig {
  HashConfig hash;
  /// Records retained per token; nullopt keeps everything. Must be >= 1.
  std::optional<std::size_t> history_depth;
  std::size_t max_data_bytes = kDefaultMaxDataBytes;
  bool read_only = false;
  /// fsync after every append. Only tests running without a disk turn it off.
  bool sync_writes = true;

  std::string listen = "127.0.0.1:7070";
  std::vector<std::string> peers;
  std::filesystem::path db_path;

  void validate() const;
};

/// Flat `key=value` text. Blank lines and lines starting with '#' are
/// ignored. Keys: algorithm, domain_tag, generators, history_depth, listen,
/// peers (comma separated), db, read_only, max_data_bytes.
StoreConfig parse_config_text(std::string_view text, StoreConfig base = {});
StoreConfig load_config_file(const std::filesystem::path& path, StoreConfig base = {});

/// Applies a single key=value pair; shared by the file parser and CLI flags.
void apply_config_value(StoreConfig& cfg, std::string_view key, std::string_view value);

/// One line per key in file syntax, stable order.
std::string describe_config(const StoreConfig& cfg);

}  // namespace hasq
