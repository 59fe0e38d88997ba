#include "commands.hpp"

#include <signal.h>
#include <termios.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>

#include "hasq/client.hpp"
#include "hasq/config.hpp"
#include "hasq/server.hpp"
#include "hasq/store.hpp"
#include "hasq/wallet.hpp"
#include "hasq/wire.hpp"
#include "session_file.hpp"

namespace hasq::cli {

namespace {

/// Thrown from inside a command to leave with a specific exit code.
struct Exit {
  int code;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_file;
  std::string algorithm;
  std::string domain_tag;
  std::string generators;
  std::string history_depth;
  std::string listen;
  std::string peers;
  std::string db;
  std::string host;
  std::string state_dir;
  bool verbose = false;
};

void add_hash_options(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "config file (key=value lines)");
  sub->add_option("--algorithm", c.algorithm, "sha256 | sha512 | sha3-256");
  sub->add_option("--domain-tag", c.domain_tag, "domain tag mixed into every hash");
  sub->add_option("--generators", c.generators, "generator count m");
}

void add_client_options(CLI::App* sub, Common& c) {
  add_hash_options(sub, c);
  sub->add_option("--host", c.host, "server host:port (default: listen address from config)");
}

StoreConfig effective_config(const Common& c) {
  StoreConfig cfg;
  if (!c.config_file.empty()) cfg = load_config_file(c.config_file, cfg);
  const std::pair<const char*, const std::string*> overrides[] = {
      {"algorithm", &c.algorithm}, {"domain_tag", &c.domain_tag},
      {"generators", &c.generators}, {"history_depth", &c.history_depth},
      {"listen", &c.listen},       {"peers", &c.peers},
      {"db", &c.db},
  };
  for (const auto& [key, value] : overrides) {
    if (!value->empty()) apply_config_value(cfg, key, *value);
  }
  cfg.validate();
  return cfg;
}

std::string host_of(const Common& c, const StoreConfig& cfg) {
  return c.host.empty() ? cfg.listen : c.host;
}

Digest parse_token(const HashConfig& cfg, const std::string& hex) {
  auto d = Digest::parse(hex, cfg.algorithm);
  if (!d) throw UsageError("not a " + std::string(algorithm_name(cfg.algorithm)) + " digest: " + hex);
  return *d;
}

std::string read_passphrase() {
  if (const char* env = std::getenv("HASQ_PASSPHRASE"); env && *env) return env;
  const bool tty = ::isatty(STDIN_FILENO);
  termios saved{};
  if (tty) {
    std::cerr << "passphrase: " << std::flush;
    ::tcgetattr(STDIN_FILENO, &saved);
    termios quiet = saved;
    quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    ::tcsetattr(STDIN_FILENO, TCSANOW, &quiet);
  }
  std::string line;
  std::getline(std::cin, line);
  if (tty) {
    ::tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    std::cerr << '\n';
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.empty()) throw UsageError("no passphrase (set HASQ_PASSPHRASE or type it on stdin)");
  return line;
}

/// Submits one record; prints the refusal and exits 1 unless accepted.
void submit(Client& client, const Record& r) {
  const std::string resp = client.add(r);
  if (resp == wire::kAdded || resp == wire::kDuplicate) return;
  std::cerr << "rejected: " << (resp.rfind("ERR ", 0) == 0 ? resp.substr(4) : resp) << '\n';
  throw Exit{kFailure};
}

TokenChain fetch_chain(Client& client, const HashConfig& cfg, const Digest& token) {
  return {token, client.get_chain(cfg, token)};
}

void refuse_live_session(const std::optional<TransferSession>& existing, bool force) {
  if (!existing || force) return;
  const auto p = existing->phase();
  if (p == TransferPhase::complete || p == TransferPhase::aborted) return;
  std::cerr << "a session for this token is already in phase " << phase_name(p)
            << " (use --force to discard it)\n";
  throw Exit{kFailure};
}

// --- serve -----------------------------------------------------------------

int cmd_serve(const Common& c, bool read_only, unsigned probe_ms) {
  StoreConfig cfg = effective_config(c);
  if (read_only) cfg.read_only = true;
  if (c.verbose) std::cout << describe_config(cfg) << std::flush;

  // Handle termination synchronously; worker threads inherit the mask.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGTERM);
  sigaddset(&stop_signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  Ledger ledger = Ledger::open(cfg);
  for (const auto& w : ledger.load_warnings()) std::cerr << "warning: " << w << '\n';
  ServerOptions options;
  if (probe_ms) options.probe_interval = std::chrono::milliseconds(probe_ms);
  std::unique_ptr<Server> server;
  try {
    server = Server::start(std::move(ledger), options);
  } catch (const BindError& e) {
    std::cerr << "cannot listen: " << e.what() << '\n';
    return kConnectivity;
  }
  std::cout << "listening on " << server->address() << std::endl;

  int sig = 0;
  sigwait(&stop_signals, &sig);
  server->stop();
  if (c.verbose) std::cout << "stopped" << std::endl;
  return kOk;
}

// --- verify ----------------------------------------------------------------

struct Failure {
  std::string token;
  std::string seq;
  std::string field;
};

/// Verifies each chain and reports one line per failing link.
int report_chains(const HashConfig& cfg, const std::vector<TokenChain>& chains,
                  std::vector<Failure> failures) {
  for (const auto& chain : chains) {
    const ChainReport rep = verify_chain(cfg, chain);
    for (std::size_t i = 0; i < rep.links.size(); ++i) {
      if (rep.links[i].ok()) continue;
      failures.push_back({chain.token.hex(), std::to_string(chain.records[i + 1].seq),
                          rep.links[i].field_name()});
    }
  }
  for (const auto& chain : chains) {
    std::cout << "token " << chain.token.hex() << " records " << chain.records.size() << '\n';
  }
  for (const auto& f : failures) {
    std::cout << "FAIL " << f.token << ' ' << f.seq << ' ' << f.field << '\n';
  }
  std::cout << chains.size() << " tokens, " << failures.size() << " failures" << std::endl;
  return failures.empty() ? kOk : kFailure;
}

/// Reads the storage file directly, without the append gate, so that a
/// damaged file can be audited instead of refusing to load.
int verify_file(const StoreConfig& cfg) {
  std::ifstream in(cfg.db_path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(cfg.db_path)) {
      std::cout << "0 tokens, 0 failures" << std::endl;
      return kOk;
    }
    std::cerr << "cannot read " << cfg.db_path << '\n';
    return kFailure;
  }
  std::vector<TokenChain> chains;
  std::map<Digest, std::size_t> index;
  std::vector<Failure> failures;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      Record r = parse_record(cfg.hash, line, cfg.max_data_bytes);
      auto [it, fresh] = index.try_emplace(r.token, chains.size());
      if (fresh) chains.push_back({r.token, {}});
      chains[it->second].records.push_back(std::move(r));
    } catch (const ParseError& e) {
      failures.push_back({"line", std::to_string(lineno), e.what()});
    }
  }
  return report_chains(cfg.hash, chains, std::move(failures));
}

int verify_host(const Common& c, const StoreConfig& cfg, const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw UsageError("--host needs at least one --token");
  Client client = Client::connect(host_of(c, cfg));
  std::vector<TokenChain> chains;
  std::vector<Failure> failures;
  for (const auto& hex : tokens) {
    const Digest token = parse_token(cfg.hash, hex);
    TokenChain chain = fetch_chain(client, cfg.hash, token);
    if (chain.empty()) {
      failures.push_back({hex, "-", "not-found"});
      continue;
    }
    chains.push_back(std::move(chain));
  }
  return report_chains(cfg.hash, chains, std::move(failures));
}

// --- tokens ----------------------------------------------------------------

Digest token_from_file(const HashConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hash_bytes(cfg.algorithm,
                    {reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

Digest random_token(const HashConfig& cfg) {
  std::random_device rd;
  std::vector<unsigned char> seed(32);
  for (auto& b : seed) b = static_cast<unsigned char>(rd());
  return hash_bytes(cfg.algorithm, seed);
}

std::optional<std::string> checked_data(const StoreConfig& cfg, const std::string& text,
                                        bool given) {
  if (!given) return std::nullopt;
  if (auto problem = data_field_problem(text, cfg.max_data_bytes)) {
    throw UsageError("data field rejected: " + *problem);
  }
  return text;
}

int cmd_token_create(const Common& c, const std::string& file, bool random,
                     const std::string& data, bool has_data) {
  const StoreConfig cfg = effective_config(c);
  if (file.empty() == !random) throw UsageError("give exactly one of --file or --random");
  const Digest token = random ? random_token(cfg.hash) : token_from_file(cfg.hash, file);
  const auto d = checked_data(cfg, data, has_data);
  const KeyMaterial km(cfg.hash, token, read_passphrase());
  const Record genesis = make_genesis(cfg.hash, km, d);
  Client client = Client::connect(host_of(c, cfg));
  submit(client, genesis);
  std::cout << token.hex() << '\n' << serialize_record(genesis) << std::endl;
  return kOk;
}

int cmd_show(const Common& c, const std::string& token_hex, bool check_owner) {
  const StoreConfig cfg = effective_config(c);
  const Digest token = parse_token(cfg.hash, token_hex);
  Client client = Client::connect(host_of(c, cfg));
  const TokenChain chain = fetch_chain(client, cfg.hash, token);
  if (chain.empty()) {
    std::cerr << "token not found\n";
    return kFailure;
  }
  for (const auto& r : chain.records) std::cout << serialize_record(r) << '\n';
  if (check_owner) {
    const KeyMaterial km(cfg.hash, token, read_passphrase());
    std::cout << (owns(cfg.hash, chain, km) ? "owned" : "not-owned") << '\n';
  }
  std::cout << std::flush;
  return kOk;
}

// --- transfer --------------------------------------------------------------

int cmd_offer(const Common& c, const std::string& token_hex, bool force) {
  const StoreConfig cfg = effective_config(c);
  const Digest token = parse_token(cfg.hash, token_hex);
  const auto path = session_path(resolve_state_dir(c.state_dir), TransferRole::recipient, token);
  SessionClaim claim(path);
  refuse_live_session(load_session(cfg.hash, path), force);

  Client client = Client::connect(host_of(c, cfg));
  const auto head = client.get_head(cfg.hash, token);
  if (!head) {
    std::cerr << "token not found\n";
    return kFailure;
  }
  const KeyMaterial km(cfg.hash, token, read_passphrase());
  Offer offer = recipient_offer(cfg.hash, token, head->seq, km);
  save_session(path, offer.session);
  std::cout << serialize_offer(offer.message) << std::endl;
  return kOk;
}

int cmd_finish_half(const Common& c, const StoreConfig& cfg, const std::string& msg1_line,
                    bool force) {
  const OfferMessage msg1 = parse_offer(cfg.hash, msg1_line);
  const auto path =
      session_path(resolve_state_dir(c.state_dir), TransferRole::sender, msg1.token);
  SessionClaim claim(path);
  refuse_live_session(load_session(cfg.hash, path), force);

  Client client = Client::connect(host_of(c, cfg));
  const TokenChain chain = fetch_chain(client, cfg.hash, msg1.token);
  if (chain.empty()) {
    std::cerr << "token not found\n";
    return kFailure;
  }
  const KeyMaterial km(cfg.hash, msg1.token, read_passphrase());
  // Ownership is checked inside before any key leaves this process.
  HalfRecord half = sender_publish_half(cfg.hash, chain, km, msg1);
  submit(client, half.record);
  half.session.advance(TransferPhase::half_published);
  save_session(path, half.session);
  std::cout << serialize_record(half.record) << std::endl;
  return kOk;
}

int cmd_finish_final(const Common& c, const StoreConfig& cfg, const std::string& msg2_line,
                     const std::optional<std::string>& data) {
  const CounterMessage msg2 = parse_counter(cfg.hash, msg2_line);
  const auto path =
      session_path(resolve_state_dir(c.state_dir), TransferRole::sender, msg2.token);
  SessionClaim claim(path);
  auto session = load_session(cfg.hash, path);
  if (!session) {
    std::cerr << "no sender session for this token (run finish --msg1 first)\n";
    return kFailure;
  }
  Client client = Client::connect(host_of(c, cfg));
  const TokenChain chain = fetch_chain(client, cfg.hash, msg2.token);
  const KeyMaterial km(cfg.hash, msg2.token, read_passphrase());
  std::vector<Record> finals;
  try {
    finals = sender_publish_final(cfg.hash, chain, km, *session, msg2, data);
  } catch (const ProtocolError& e) {
    std::cerr << "rejected: " << e.what() << " (session stays "
              << phase_name(session->phase()) << ")\n";
    return kFailure;
  }
  for (const auto& r : finals) submit(client, r);
  session->set_counter(msg2);
  session->advance(TransferPhase::complete);
  save_session(path, *session);
  for (const auto& r : finals) std::cout << serialize_record(r) << '\n';
  std::cout << std::flush;
  return kOk;
}

int cmd_counter(const Common& c, const std::string& token_hex, bool after_half) {
  if (!after_half) throw UsageError("counter needs --after-half");
  const StoreConfig cfg = effective_config(c);
  const Digest token = parse_token(cfg.hash, token_hex);
  const auto path = session_path(resolve_state_dir(c.state_dir), TransferRole::recipient, token);
  SessionClaim claim(path);
  auto session = load_session(cfg.hash, path);
  if (!session) {
    std::cerr << "no recipient session for this token (run offer first)\n";
    return kFailure;
  }
  Client client = Client::connect(host_of(c, cfg));
  const TokenChain chain = fetch_chain(client, cfg.hash, token);
  // Not there yet is worth retrying later, so leave the session as it is.
  if (chain.empty() || chain.head().seq <= session->base_seq()) {
    std::cerr << "half record not found\n";
    return kFailure;
  }
  const KeyMaterial km(cfg.hash, token, read_passphrase());
  try {
    const CounterMessage msg2 = recipient_counter(cfg.hash, chain, km, *session);
    save_session(path, *session);
    std::cout << serialize_counter(msg2) << std::endl;
    return kOk;
  } catch (const TransferAborted& e) {
    save_session(path, *session);
    std::cerr << e.what() << ": " << e.evidence() << '\n';
    return kFailure;
  }
}

int cmd_confirm(const Common& c, const std::string& token_hex) {
  const StoreConfig cfg = effective_config(c);
  const Digest token = parse_token(cfg.hash, token_hex);
  const auto path = session_path(resolve_state_dir(c.state_dir), TransferRole::recipient, token);
  SessionClaim claim(path);
  auto session = load_session(cfg.hash, path);
  Client client = Client::connect(host_of(c, cfg));
  const TokenChain chain = fetch_chain(client, cfg.hash, token);
  const KeyMaterial km(cfg.hash, token, read_passphrase());
  const bool owned = session ? recipient_confirm(cfg.hash, chain, km, *session)
                             : owns(cfg.hash, chain, km);
  if (session) save_session(path, *session);
  std::cout << (owned ? "owned" : "not-owned") << std::endl;
  return owned ? kOk : kFailure;
}

int cmd_status(const Common& c, const std::string& token_hex, const std::string& role_s) {
  const StoreConfig cfg = effective_config(c);
  const Digest token = parse_token(cfg.hash, token_hex);
  const auto role = parse_role(role_s);
  if (!role) throw UsageError("--role must be sender or recipient");
  const auto session =
      load_session(cfg.hash, session_path(resolve_state_dir(c.state_dir), *role, token));
  if (!session) {
    std::cout << "none" << std::endl;
    return kFailure;
  }
  std::cout << "phase " << phase_name(session->phase()) << '\n'
            << "base_seq " << session->base_seq() << std::endl;
  return kOk;
}

// --- data ------------------------------------------------------------------

int cmd_data_publish(const Common& c, const std::string& token_hex, const std::string& text) {
  const StoreConfig cfg = effective_config(c);
  const Digest token = parse_token(cfg.hash, token_hex);
  const auto data = checked_data(cfg, text, true);
  Client client = Client::connect(host_of(c, cfg));
  TokenChain chain = fetch_chain(client, cfg.hash, token);
  if (chain.empty()) {
    std::cerr << "token not found\n";
    return kFailure;
  }
  const KeyMaterial km(cfg.hash, token, read_passphrase());
  if (!owns(cfg.hash, chain, km)) {
    std::cerr << "refused: passphrase does not own this token\n";
    return kFailure;
  }

  // Self-transfer: the owner plays both roles with the same key material.
  const bool half_is_last = cfg.hash.generator_count == 0;
  Offer offer = recipient_offer(cfg.hash, token, chain.head().seq, km);
  HalfRecord half = sender_publish_half(cfg.hash, chain, km, offer.message,
                                        half_is_last ? data : std::nullopt);
  submit(client, half.record);
  chain.records.push_back(half.record);
  half.session.advance(TransferPhase::half_published);
  const CounterMessage msg2 = recipient_counter(cfg.hash, chain, km, offer.session);
  const auto finals = sender_publish_final(cfg.hash, chain, km, half.session, msg2, data);
  for (const auto& r : finals) submit(client, r);
  std::cout << serialize_record(finals.empty() ? half.record : finals.back()) << std::endl;
  return kOk;
}

// --- maintenance -----------------------------------------------------------

int cmd_compact(const Common& c) {
  const StoreConfig cfg = effective_config(c);
  if (cfg.db_path.empty()) throw UsageError("compact needs --db or db= in the config");
  Ledger ledger = Ledger::open(cfg);
  const PruneReport rep = ledger.compact();
  std::cout << "discarded " << rep.discarded.size() << std::endl;
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"hasq: hash-chain token ledger"};
  app.require_subcommand(1);
  Common c;
  std::function<int()> action;

  auto* serve = app.add_subcommand("serve", "run a record server");
  add_hash_options(serve, c);
  serve->add_option("--listen", c.listen, "host:port to bind");
  serve->add_option("--peers", c.peers, "comma-separated peer addresses");
  serve->add_option("--db", c.db, "storage file");
  serve->add_option("--history-depth", c.history_depth, "records kept per token, or unlimited");
  serve->add_flag("-v,--verbose", c.verbose, "print the effective config");
  bool read_only = false;
  unsigned probe_ms = 0;
  serve->add_flag("--read-only", read_only, "refuse ADD");
  serve->add_option("--probe-ms", probe_ms, "peer probe interval in milliseconds");
  serve->callback([&] { action = [&] { return cmd_serve(c, read_only, probe_ms); }; });

  auto* verify = app.add_subcommand("verify", "audit every chain of a database or server");
  add_client_options(verify, c);
  verify->add_option("--db", c.db, "storage file to audit");
  std::vector<std::string> verify_tokens;
  verify->add_option("--token", verify_tokens, "token to fetch in --host mode (repeatable)");
  verify->callback([&] {
    action = [&] {
      if (!c.host.empty() && !c.db.empty()) throw UsageError("give --db or --host, not both");
      const StoreConfig cfg = effective_config(c);
      if (!c.host.empty()) return verify_host(c, cfg, verify_tokens);
      if (cfg.db_path.empty()) throw UsageError("no database path");
      return verify_file(cfg);
    };
  });

  auto* token = app.add_subcommand("token", "token commands");
  token->require_subcommand(1);
  auto* create = token->add_subcommand("create", "publish a genesis record");
  add_client_options(create, c);
  std::string create_file;
  std::string create_data;
  bool create_random = false;
  auto* create_data_opt = create->add_option("--data", create_data, "data field of the genesis");
  create->add_option("--file", create_file, "token is the hash of this file");
  create->add_flag("--random", create_random, "token is the hash of a random seed");
  create->callback([&] {
    action = [&] {
      return cmd_token_create(c, create_file, create_random, create_data,
                              create_data_opt->count() > 0);
    };
  });

  auto* show = app.add_subcommand("show", "print a token's chain");
  add_client_options(show, c);
  std::string show_token;
  bool check_owner = false;
  show->add_option("--token", show_token, "token digest")->required();
  show->add_flag("--check-owner", check_owner, "read a passphrase and report ownership");
  show->callback([&] { action = [&] { return cmd_show(c, show_token, check_owner); }; });

  auto* transfer = app.add_subcommand("transfer", "two-round ownership transfer");
  transfer->require_subcommand(1);
  std::string t_token;
  bool t_force = false;

  auto* offer = transfer->add_subcommand("offer", "recipient: print the first message");
  add_client_options(offer, c);
  offer->add_option("--state-dir", c.state_dir, "session directory");
  offer->add_option("--token", t_token, "token digest")->required();
  offer->add_flag("--force", t_force, "discard an unfinished session");
  offer->callback([&] { action = [&] { return cmd_offer(c, t_token, t_force); }; });

  auto* finish = transfer->add_subcommand("finish", "sender: publish half or final records");
  add_client_options(finish, c);
  finish->add_option("--state-dir", c.state_dir, "session directory");
  std::string msg1;
  std::string msg2;
  std::string finish_data;
  auto* m1 = finish->add_option("--msg1", msg1, "OFFER line from the recipient");
  auto* m2 = finish->add_option("--msg2", msg2, "COUNTER line from the recipient");
  m1->excludes(m2);
  auto* finish_data_opt = finish->add_option("--data", finish_data, "data field of the final record");
  finish->add_flag("--force", t_force, "discard an unfinished session");
  finish->callback([&] {
    action = [&] {
      const StoreConfig cfg = effective_config(c);
      if (m1->count()) return cmd_finish_half(c, cfg, msg1, t_force);
      if (m2->count()) {
        return cmd_finish_final(c, cfg, msg2,
                                checked_data(cfg, finish_data, finish_data_opt->count() > 0));
      }
      throw UsageError("finish needs --msg1 or --msg2");
    };
  });

  auto* counter = transfer->add_subcommand("counter", "recipient: print the second message");
  add_client_options(counter, c);
  counter->add_option("--state-dir", c.state_dir, "session directory");
  counter->add_option("--token", t_token, "token digest")->required();
  bool after_half = false;
  counter->add_flag("--after-half", after_half, "check the half record is on chain first");
  counter->callback([&] { action = [&] { return cmd_counter(c, t_token, after_half); }; });

  auto* confirm = transfer->add_subcommand("confirm", "recipient: check ownership after the final record");
  add_client_options(confirm, c);
  confirm->add_option("--state-dir", c.state_dir, "session directory");
  confirm->add_option("--token", t_token, "token digest")->required();
  confirm->callback([&] { action = [&] { return cmd_confirm(c, t_token); }; });

  auto* status = transfer->add_subcommand("status", "print a stored session's phase");
  add_hash_options(status, c);
  status->add_option("--state-dir", c.state_dir, "session directory");
  status->add_option("--token", t_token, "token digest")->required();
  std::string status_role;
  status->add_option("--role", status_role, "sender or recipient")->required();
  status->callback([&] { action = [&] { return cmd_status(c, t_token, status_role); }; });

  auto* data = app.add_subcommand("data", "data field commands");
  data->require_subcommand(1);
  auto* publish = data->add_subcommand("publish", "attach text to the token via a self-transfer");
  add_client_options(publish, c);
  std::string text;
  publish->add_option("--token", t_token, "token digest")->required();
  publish->add_option("--text", text, "data field text")->required();
  publish->callback([&] { action = [&] { return cmd_data_publish(c, t_token, text); }; });

  auto* compact = app.add_subcommand("compact", "drop records outside the retention window");
  add_hash_options(compact, c);
  compact->add_option("--db", c.db, "storage file");
  compact->add_option("--history-depth", c.history_depth, "records kept per token");
  compact->callback([&] { action = [&] { return cmd_compact(c); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const Exit& e) {
    return e.code;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config: " << e.what() << '\n';
    return kUsage;
  } catch (const ConnectError& e) {
    std::cerr << "cannot reach server: " << e.what() << '\n';
    return kConnectivity;
  } catch (const WireError& e) {
    std::cerr << "server: " << e.what() << '\n';
    return kConnectivity;
  } catch (const SessionBusy& e) {
    std::cerr << e.what() << '\n';
    return kFailure;
  } catch (const TokenMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol: " << e.what() << '\n';
    return kFailure;
  } catch (const LoadError& e) {
    std::cerr << "database: " << e.what() << '\n';
    return kFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace hasq::cli
