#include "hasq/config.hpp"

#include <fstream>
#include <sstream>

namespace hasq {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  auto v = parse_canonical_uint(value);
  if (!v) throw ConfigError(std::string(key) + ": expected a non-negative integer");
  return static_cast<std::size_t>(*v);
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false");
}

}  // namespace

void StoreConfig::validate() const {
  try {
    hash.validate();
  } catch (const EncodingError& e) {
    throw ConfigError(e.what());
  }
  if (history_depth && *history_depth < 1) throw ConfigError("history_depth must be >= 1");
  if (max_data_bytes == 0) throw ConfigError("max_data_bytes must be >= 1");
}

void apply_config_value(StoreConfig& cfg, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "algorithm") {
    auto alg = parse_algorithm(value);
    if (!alg) throw ConfigError("unknown algorithm: " + std::string(value));
    cfg.hash.algorithm = *alg;
  } else if (key == "domain_tag") {
    if (value.empty()) {
      cfg.hash.domain_tag.reset();
    } else {
      cfg.hash.domain_tag = std::string(value);
    }
  } else if (key == "generators") {
    cfg.hash.generator_count = parse_size(key, value);
  } else if (key == "history_depth") {
    if (value == "unlimited" || value.empty()) {
      cfg.history_depth.reset();
    } else {
      cfg.history_depth = parse_size(key, value);
    }
  } else if (key == "listen") {
    cfg.listen = std::string(value);
  } else if (key == "peers") {
    cfg.peers.clear();
    std::size_t pos = 0;
    while (pos <= value.size()) {
      const auto comma = value.find(',', pos);
      auto item = trim(value.substr(pos, comma == std::string_view::npos ? value.npos
                                                                          : comma - pos));
      if (!item.empty()) cfg.peers.emplace_back(item);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  } else if (key == "db") {
    cfg.db_path = std::string(value);
  } else if (key == "read_only") {
    cfg.read_only = parse_bool(key, value);
  } else if (key == "max_data_bytes") {
    cfg.max_data_bytes = parse_size(key, value);
  } else {
    throw ConfigError("unknown config key: " + std::string(key));
  }
}

StoreConfig parse_config_text(std::string_view text, StoreConfig base) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = trim(text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      apply_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

StoreConfig load_config_file(const std::filesystem::path& path, StoreConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

std::string describe_config(const StoreConfig& cfg) {
  std::ostringstream out;
  out << "algorithm=" << algorithm_name(cfg.hash.algorithm) << '\n';
  out << "domain_tag=" << cfg.hash.domain_tag.value_or("") << '\n';
  out << "generators=" << cfg.hash.generator_count << '\n';
  out << "history_depth="
      << (cfg.history_depth ? std::to_string(*cfg.history_depth) : std::string("unlimited"))
      << '\n';
  out << "listen=" << cfg.listen << '\n';
  out << "peers=";
  for (std::size_t i = 0; i < cfg.peers.size(); ++i) out << (i ? "," : "") << cfg.peers[i];
  out << '\n';
  out << "db=" << cfg.db_path.string() << '\n';
  out << "read_only=" << (cfg.read_only ? "true" : "false") << '\n';
  out << "max_data_bytes=" << cfg.max_data_bytes << '\n';
  return out.str();
}

}  // namespace hasq
