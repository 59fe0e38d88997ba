#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hasq/chain.hpp"
#include "hasq/config.hpp"

namespace hasq {

enum class AppendStatus {
  added,
  duplicate,
  seq_gap,
  seq_occupied,
  bad_generator,
  bad_owner,
  genesis_exists,
  wrong_generator_count,
  bad_record,
  read_only,
};

struct AppendResult {
  AppendStatus status = AppendStatus::added;
  /// 1-based, for bad_generator.
  std::size_t generator_index = 0;
  /// The record was a valid alternative for an occupied slot (a fork).
  bool conflict = false;

  bool accepted() const {
    return status == AppendStatus::added || status == AppendStatus::duplicate;
  }
  /// Wire spelling: added, duplicate, seq-gap, bad-G(1), bad-O, ...
  std::string reason() const;
};

struct Lookup {
  enum class Status { found, none, pruned };
  Status status = Status::none;
  std::optional<Record> record;
};

struct PruneReport {
  std::vector<std::pair<Digest, std::uint64_t>> discarded;
};

class LoadError : public std::runtime_error {
 public:
  LoadError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Thrown by the write path when a fault hook simulates a crash.
class SimulatedCrash : public std::runtime_error {
 public:
  SimulatedCrash() : std::runtime_error("simulated crash") {}
};

/// Given the byte length of the line about to be written, returns how many
/// bytes reach the file before a simulated crash, or nullopt for no crash.
using WriteFaultHook = std::function<std::optional<std::size_t>(std::size_t)>;

/// Append-only record database.
///
/// Every record enters through append(), including those replayed from disk
/// on load. The storage file holds one canonical record line per accepted
/// record; nothing else. Appends to one token are serialized, appends to
/// different tokens only share the file write.
class Ledger {
 public:
  /// Loads cfg.db_path if it exists, otherwise starts empty and creates it on
  /// first append. An empty db_path keeps everything in memory.
  static Ledger open(StoreConfig cfg);
  static Ledger load(const std::filesystem::path& path, StoreConfig cfg);

  Ledger(Ledger&&) noexcept;
  Ledger& operator=(Ledger&&) noexcept;
  ~Ledger();

  const StoreConfig& config() const;

  AppendResult append(const Record& record);

  std::optional<Record> get_head(const Digest& token) const;
  Lookup get_record(const Digest& token, std::uint64_t seq) const;
  /// Records inside the retention window, in seq order.
  std::vector<Record> get_chain(const Digest& token) const;
  TokenChain chain(const Digest& token) const;
  std::vector<Digest> tokens() const;

  /// Physically drops records outside the retention window and rewrites the
  /// storage file.
  PruneReport compact();

  /// Valid competing records seen for occupied slots.
  std::uint64_t divergence_count() const;
  /// Warnings from load (torn final line and similar).
  const std::vector<std::string>& load_warnings() const;

  void set_write_fault(WriteFaultHook hook);

 private:
  struct Impl;
  explicit Ledger(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace hasq
