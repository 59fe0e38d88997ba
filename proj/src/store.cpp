#include "hasq/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <system_error>

namespace hasq {

std::string AppendResult::reason() const {
  switch (status) {
    case AppendStatus::added:
      return "added";
    case AppendStatus::duplicate:
      return "duplicate";
    case AppendStatus::seq_gap:
      return "seq-gap";
    case AppendStatus::seq_occupied:
      return "seq-occupied";
    case AppendStatus::bad_generator:
      return "bad-G(" + std::to_string(generator_index) + ")";
    case AppendStatus::bad_owner:
      return "bad-O";
    case AppendStatus::genesis_exists:
      return "genesis-exists";
    case AppendStatus::wrong_generator_count:
      return "wrong-generator-count";
    case AppendStatus::bad_record:
      return "bad-record";
    case AppendStatus::read_only:
      return "read-only";
  }
  return "unknown";
}

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

class AppendFile {
 public:
  AppendFile() = default;
  AppendFile(const AppendFile&) = delete;
  AppendFile& operator=(const AppendFile&) = delete;
  ~AppendFile() { close(); }

  void open(const std::filesystem::path& path) {
    close();
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw_errno("open " + path.string());
  }
  bool is_open() const { return fd_ >= 0; }
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  void write_all(std::string_view bytes) {
    while (!bytes.empty()) {
      const ssize_t n = ::write(fd_, bytes.data(), bytes.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_errno("write");
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
  }
  void sync() {
    if (::fdatasync(fd_) != 0) throw_errno("fdatasync");
  }

 private:
  int fd_ = -1;
};

void fsync_path(const std::filesystem::path& p) {
  const int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

struct TokenState {
  mutable std::mutex mu;
  std::deque<Record> records;
  /// Lowest seq ever retained physically; slots below it were compacted away
  /// or never existed here.
  std::uint64_t first_seq = 0;
};

bool record_well_formed(const StoreConfig& cfg, const Record& r) {
  const auto len = digest_hex_length(cfg.hash.algorithm);
  auto ok = [&](const Digest& d) { return d.hex().size() == len; };
  if (!ok(r.token) || !ok(r.key) || !ok(r.owner)) return false;
  for (const auto& g : r.generators) {
    if (!ok(g)) return false;
  }
  if (r.data && data_field_problem(*r.data, cfg.max_data_bytes)) return false;
  return true;
}

}  // namespace

struct Ledger::Impl {
  StoreConfig cfg;
  mutable std::shared_mutex map_mu;
  std::map<Digest, std::unique_ptr<TokenState>> tokens;

  std::mutex file_mu;
  AppendFile file;
  WriteFaultHook fault;

  std::atomic<std::uint64_t> divergence{0};
  std::vector<std::string> warnings;

  TokenState* find(const Digest& token) const {
    std::shared_lock lock(map_mu);
    auto it = tokens.find(token);
    return it == tokens.end() ? nullptr : it->second.get();
  }

  TokenState& find_or_create(const Digest& token) {
    if (auto* t = find(token)) return *t;
    std::unique_lock lock(map_mu);
    auto& slot = tokens[token];
    if (!slot) slot = std::make_unique<TokenState>();
    return *slot;
  }

  void persist(const Record& r) {
    if (cfg.db_path.empty()) return;
    std::string line = serialize_record(r);
    line.push_back('\n');
    std::lock_guard lock(file_mu);
    if (!file.is_open()) file.open(cfg.db_path);
    if (fault) {
      if (auto cut = fault(line.size())) {
        file.write_all(std::string_view(line).substr(0, std::min(*cut, line.size())));
        throw SimulatedCrash();
      }
    }
    file.write_all(line);
    if (cfg.sync_writes) file.sync();
  }

  /// `anchor_ok` lets a load of a compacted file start a token at N > 0.
  AppendResult gate(const Record& r, bool write, bool anchor_ok) {
    if (cfg.read_only && write) return {AppendStatus::read_only};
    if (r.generators.size() != cfg.hash.generator_count) {
      return {AppendStatus::wrong_generator_count};
    }
    if (!record_well_formed(cfg, r)) return {AppendStatus::bad_record};

    TokenState& t = find_or_create(r.token);
    std::lock_guard lock(t.mu);

    if (t.records.empty()) {
      if (r.seq != 0 && !anchor_ok) return {AppendStatus::seq_gap};
      if (write) persist(r);
      t.first_seq = r.seq;
      t.records.push_back(r);
      return {AppendStatus::added};
    }

    const Record& head = t.records.back();
    if (r.seq <= head.seq) {
      if (r.seq < t.first_seq) return {AppendStatus::seq_occupied};
      const Record& existing = t.records[r.seq - t.first_seq];
      if (existing == r) return {AppendStatus::duplicate};
      AppendResult res{r.seq == 0 ? AppendStatus::genesis_exists : AppendStatus::seq_occupied};
      if (r.seq == 0 || r.seq == t.first_seq) {
        res.conflict = true;
      } else {
        const Record& prev = t.records[r.seq - 1 - t.first_seq];
        res.conflict = verify_link(cfg.hash, prev, r).ok();
      }
      if (res.conflict) ++divergence;
      return res;
    }
    if (r.seq != head.seq + 1) return {AppendStatus::seq_gap};

    const LinkVerdict v = verify_link(cfg.hash, head, r);
    switch (v.failure) {
      case LinkFailure::none:
        break;
      case LinkFailure::generator:
        return {AppendStatus::bad_generator, v.generator_index};
      case LinkFailure::owner:
        return {AppendStatus::bad_owner};
      case LinkFailure::seq:
        return {AppendStatus::seq_gap};
      case LinkFailure::generator_count:
        return {AppendStatus::wrong_generator_count};
      case LinkFailure::token:
        return {AppendStatus::bad_record};
    }
    if (write) persist(r);
    t.records.push_back(r);
    return {AppendStatus::added};
  }

  /// Retained window of a token, taken under its lock.
  template <typename F>
  auto with_window(const TokenState& t, F&& f) const {
    std::lock_guard lock(t.mu);
    std::size_t skip = 0;
    if (cfg.history_depth && t.records.size() > *cfg.history_depth) {
      skip = t.records.size() - *cfg.history_depth;
    }
    return f(t.records, skip);
  }
};

Ledger::Ledger(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Ledger::Ledger(Ledger&&) noexcept = default;
Ledger& Ledger::operator=(Ledger&&) noexcept = default;
Ledger::~Ledger() = default;

Ledger Ledger::open(StoreConfig cfg) {
  cfg.validate();
  if (!cfg.db_path.empty() && std::filesystem::exists(cfg.db_path)) {
    auto path = cfg.db_path;
    return load(path, std::move(cfg));
  }
  auto impl = std::make_unique<Impl>();
  impl->cfg = std::move(cfg);
  return Ledger(std::move(impl));
}

Ledger Ledger::load(const std::filesystem::path& path, StoreConfig cfg) {
  cfg.validate();
  cfg.db_path = path;
  auto impl = std::make_unique<Impl>();
  impl->cfg = cfg;

  std::string content;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(0, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    content = ss.str();
  }

  // A final line without newline is the remains of an interrupted append:
  // it was never acknowledged, so drop it.
  const auto last_nl = content.rfind('\n');
  const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (complete < content.size()) {
    std::size_t lines = static_cast<std::size_t>(
        std::count(content.begin(), content.begin() + static_cast<std::ptrdiff_t>(complete), '\n'));
    impl->warnings.push_back("line " + std::to_string(lines + 1) +
                             ": torn final line truncated (" +
                             std::to_string(content.size() - complete) + " bytes)");
    std::filesystem::resize_file(path, complete);
    content.resize(complete);
  }

  const bool anchors = cfg.history_depth.has_value();
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    Record r;
    try {
      r = parse_record(cfg.hash, line, cfg.max_data_bytes);
    } catch (const ParseError& e) {
      throw LoadError(lineno, e.what());
    }
    const AppendResult res = impl->gate(r, /*write=*/false, anchors);
    if (res.status != AppendStatus::added && res.status != AppendStatus::duplicate) {
      throw LoadError(lineno, "rejected by append gate: " + res.reason());
    }
  }
  impl->divergence = 0;
  return Ledger(std::move(impl));
}

const StoreConfig& Ledger::config() const { return impl_->cfg; }

AppendResult Ledger::append(const Record& record) {
  return impl_->gate(record, /*write=*/true, /*anchor_ok=*/false);
}

std::optional<Record> Ledger::get_head(const Digest& token) const {
  const TokenState* t = impl_->find(token);
  if (!t) return std::nullopt;
  std::lock_guard lock(t->mu);
  if (t->records.empty()) return std::nullopt;
  return t->records.back();
}

Lookup Ledger::get_record(const Digest& token, std::uint64_t seq) const {
  const TokenState* t = impl_->find(token);
  if (!t) return {};
  return impl_->with_window(*t, [&](const std::deque<Record>& recs, std::size_t skip) -> Lookup {
    if (recs.empty() || seq > recs.back().seq) return {};
    if (seq < t->first_seq + skip) return {Lookup::Status::pruned, std::nullopt};
    return {Lookup::Status::found, recs[seq - t->first_seq]};
  });
}

std::vector<Record> Ledger::get_chain(const Digest& token) const {
  const TokenState* t = impl_->find(token);
  if (!t) return {};
  return impl_->with_window(*t, [](const std::deque<Record>& recs, std::size_t skip) {
    return std::vector<Record>(recs.begin() + static_cast<std::ptrdiff_t>(skip), recs.end());
  });
}

TokenChain Ledger::chain(const Digest& token) const { return {token, get_chain(token)}; }

std::vector<Digest> Ledger::tokens() const {
  std::shared_lock lock(impl_->map_mu);
  std::vector<Digest> out;
  for (const auto& [token, state] : impl_->tokens) {
    std::lock_guard tl(state->mu);
    if (!state->records.empty()) out.push_back(token);
  }
  return out;
}

PruneReport Ledger::compact() {
  PruneReport report;
  if (!impl_->cfg.history_depth) return report;
  const std::size_t depth = *impl_->cfg.history_depth;

  std::shared_lock map_lock(impl_->map_mu);
  std::vector<std::unique_lock<std::mutex>> held;
  held.reserve(impl_->tokens.size());
  for (auto& [token, state] : impl_->tokens) held.emplace_back(state->mu);

  for (auto& [token, state] : impl_->tokens) {
    while (state->records.size() > depth) {
      report.discarded.emplace_back(token, state->records.front().seq);
      state->records.pop_front();
      ++state->first_seq;
    }
  }
  if (report.discarded.empty() || impl_->cfg.db_path.empty()) return report;

  std::lock_guard file_lock(impl_->file_mu);
  const auto& path = impl_->cfg.db_path;
  auto tmp = path;
  tmp += ".compact";
  {
    AppendFile out;
    std::filesystem::remove(tmp);
    out.open(tmp);
    std::string buf;
    for (auto& [token, state] : impl_->tokens) {
      for (const auto& r : state->records) {
        buf += serialize_record(r);
        buf.push_back('\n');
      }
    }
    out.write_all(buf);
    out.sync();
  }
  impl_->file.close();
  std::filesystem::rename(tmp, path);
  fsync_path(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  impl_->file.open(path);
  return report;
}

std::uint64_t Ledger::divergence_count() const { return impl_->divergence.load(); }

const std::vector<std::string>& Ledger::load_warnings() const { return impl_->warnings; }

void Ledger::set_write_fault(WriteFaultHook hook) {
  std::lock_guard lock(impl_->file_mu);
  impl_->fault = std::move(hook);
}

}  // namespace hasq
