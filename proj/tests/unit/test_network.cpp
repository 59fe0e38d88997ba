#include <doctest.h>

#include <random>

#include "cluster.hpp"
#include "fixtures.hpp"
#include "hasq/client.hpp"
#include "hasq/peer_table.hpp"
#include "hasq/server.hpp"
#include "hasq/wire.hpp"

using namespace hasq;
using namespace std::chrono_literals;

TEST_CASE("command parsing") {
  HashConfig cfg;
  const std::string d(64, 'c');
  CHECK(wire::parse_command(cfg, "PING")->verb == wire::Verb::ping);
  CHECK(wire::parse_command(cfg, "GETHEAD " + d)->token.hex() == d);
  auto get = wire::parse_command(cfg, "GET " + d + " 17");
  REQUIRE(get);
  CHECK(get->seq == 17);
  CHECK(wire::parse_command(cfg, "GETCHAIN " + d)->verb == wire::Verb::getchain);
  CHECK(wire::parse_command(cfg, "ADD 0 " + d + " x y")->record_line == "0 " + d + " x y");
  CHECK(wire::parse_command(cfg, "PEERS")->verb == wire::Verb::peers);

  for (const std::string& bad : std::vector<std::string>{"", "ping", "PING extra", "GET " + d, "GET " + d + " 01",
                                "GETHEAD " + d.substr(1), "ADD", "FOO", "PING\r",
                                "GETHEAD  " + d}) {
    CAPTURE(bad);
    CHECK_FALSE(wire::parse_command(cfg, bad));
  }
  const wire::Command c{wire::Verb::get, Digest::from_hex(d, cfg.algorithm), 5, {}};
  CHECK(wire::parse_command(cfg, wire::format_command(c))->seq == 5);
}

TEST_CASE("peer table liveness") {
  PeerTable t("me:1", 3);
  CHECK(t.add_static("a:1"));
  CHECK_FALSE(t.add_static("a:1"));
  CHECK_FALSE(t.add_static("me:1"));
  CHECK(t.get("a:1")->state == PeerState::alive);

  t.record_failure("a:1");
  CHECK(t.get("a:1")->state == PeerState::suspect);
  t.record_failure("a:1");
  CHECK(t.get("a:1")->state == PeerState::suspect);
  t.record_failure("a:1");
  CHECK(t.get("a:1")->state == PeerState::dead);
  CHECK(t.notification_targets().empty());
  CHECK(t.advertised().empty());
  CHECK(t.probe_targets(1, 5).empty());
  CHECK(t.probe_targets(5, 5) == std::vector<std::string>{"a:1"});
  t.record_success("a:1");
  CHECK(t.get("a:1")->state == PeerState::alive);
  CHECK(t.get("a:1")->missed == 0);

  CHECK(t.learn("b:1", "a:1"));
  CHECK(t.get("b:1")->state == PeerState::suspect);
  CHECK(t.advertised().size() == 2);
  CHECK(t.notification_targets() == std::vector<std::string>{"a:1"});
  CHECK_FALSE(t.learn("me:1", "a:1"));
  CHECK(t.learn("c:1", "a:1"));
  // Full: a learned suspect makes room, a static peer never does.
  CHECK(t.learn("d:1", "a:1"));
  CHECK(t.size() == 3);
  CHECK(t.get("a:1"));
  CHECK_FALSE(t.get("b:1"));

  t.mark_suspect("a:1");
  CHECK(t.get("a:1")->state == PeerState::suspect);
}

TEST_CASE("server answers the line protocol") {
  std::mt19937_64 rng(1);
  auto server = fixtures::start_quiet(fixtures::server_config(1));
  Client c = Client::connect(server->address());
  CHECK(c.ping());
  const HashConfig h = server->ledger().config().hash;
  const auto chain = fixtures::random_chain(h, 3, rng);

  CHECK(c.request("GETHEAD " + chain.token.hex()) == "ERR not-found");
  CHECK(c.add(chain.records[0]) == "OK added");
  CHECK(c.add(chain.records[0]) == "OK duplicate");
  Record bad = chain.records[1];
  bad.generators[0] = fixtures::flip_digit(bad.generators[0], 0, h.algorithm);
  CHECK(c.add(bad) == "ERR bad-O");
  CHECK(c.add(chain.records[2]) == "ERR seq-gap");
  CHECK(c.add(chain.records[1]) == "OK added");
  CHECK(c.get_head(h, chain.token) == chain.records[1]);
  CHECK(c.get(h, chain.token, 0).record == chain.records[0]);
  CHECK(c.get(h, chain.token, 9).status == Lookup::Status::none);
  CHECK(c.get_chain(h, chain.token) ==
        std::vector<Record>{chain.records[0], chain.records[1]});

  // Malformed lines get an error and the connection stays usable.
  CHECK(c.request("HELLO") == "ERR bad-request");
  CHECK(c.request("ADD 1 2 3") == "ERR bad-request");
  const std::string d = chain.token.hex();
  CHECK(c.request("ADD 2 " + d + " " + d + " " + d) == "ERR wrong-generator-count");
  CHECK(c.request("ADD 2 " + d + " " + d + " " + d + " " + d + " " + std::string(2000, 'x')) ==
        "ERR bad-record");
  CHECK(c.request("ADD 2 " + d + " " + d + " " + d + " " + d + " bad\x01") == "ERR bad-request");
  CHECK(c.request(std::string(wire::kMaxLineBytes + 10, 'x')) == "ERR bad-request");
  CHECK(c.ping());
  CHECK(c.peers().empty());
}

TEST_CASE("read-only server") {
  std::mt19937_64 rng(2);
  auto cfg = fixtures::server_config(1);
  cfg.read_only = true;
  auto server = fixtures::start_quiet(cfg);
  Client c = Client::connect(server->address());
  CHECK(c.add(fixtures::random_chain(cfg.hash, 1, rng).records[0]) == "ERR read-only");
}

TEST_CASE("bind failure names the port") {
  auto a = fixtures::start_quiet(fixtures::server_config(1));
  try {
    fixtures::start_quiet(fixtures::server_config(1, {}, a->address()));
    FAIL("second bind succeeded");
  } catch (const BindError& e) {
    const std::string port = a->address().substr(a->address().rfind(':') + 1);
    CHECK(std::string(e.what()).find(port) != std::string::npos);
  }
}

TEST_CASE("added records fan out to peers") {
  std::mt19937_64 rng(3);
  auto b = fixtures::start_quiet(fixtures::server_config(1));
  auto c = fixtures::start_quiet(fixtures::server_config(1));
  auto a = fixtures::start_quiet(fixtures::server_config(1, {b->address(), c->address()}));
  CHECK(a->peers().notification_targets().size() == 2);

  const auto chain = fixtures::random_chain(a->ledger().config().hash, 5, rng);
  Client client = Client::connect(a->address());
  for (const auto& r : chain.records) REQUIRE(client.add(r) == "OK added");
  REQUIRE(a->flush_notifications(5s));
  CHECK(b->ledger().get_chain(chain.token) == chain.records);
  CHECK(c->ledger().get_chain(chain.token) == chain.records);
  CHECK(a->notify_stats().added == 10);

  // B has no peers, so nothing comes back to A; A's ledger is unchanged.
  CHECK(a->ledger().get_chain(chain.token) == chain.records);
}

TEST_CASE("a dead peer does not block notifications to the others") {
  std::mt19937_64 rng(4);
  auto b = fixtures::start_quiet(fixtures::server_config(1));
  std::string gone;
  {
    auto tmp = fixtures::start_quiet(fixtures::server_config(1));
    gone = tmp->address();
  }
  auto a = fixtures::start_quiet(fixtures::server_config(1, {b->address(), gone}));
  const auto chain = fixtures::random_chain(a->ledger().config().hash, 3, rng);
  Client client = Client::connect(a->address());
  for (const auto& r : chain.records) client.add(r);
  REQUIRE(a->flush_notifications(5s));
  CHECK(b->ledger().get_chain(chain.token) == chain.records);
  CHECK(a->peers().get(gone)->state != PeerState::alive);

  for (int i = 0; i < 3; ++i) a->maintain_once();
  CHECK(a->peers().get(gone)->state == PeerState::dead);
  CHECK(a->peers().get(b->address())->state == PeerState::alive);
  CHECK(client.peers() == std::vector<std::string>{b->address()});
}

TEST_CASE("sync pulls a chain through the local gate") {
  std::mt19937_64 rng(5);
  auto a = fixtures::start_quiet(fixtures::server_config(1));
  auto b = fixtures::start_quiet(fixtures::server_config(1));
  const auto chain = fixtures::random_chain(a->ledger().config().hash, 10, rng);
  for (const auto& r : chain.records) a->ledger().append(r);

  const SyncResult res = b->sync_token(chain.token, a->address());
  CHECK(res.reachable);
  CHECK(res.pulled == 10);
  CHECK(b->ledger().get_chain(chain.token) == chain.records);
  CHECK(b->sync_token(chain.token, a->address()).pulled == 0);

  const SyncResult down = b->sync_token(chain.token, "127.0.0.1:1");
  CHECK_FALSE(down.reachable);
}

TEST_CASE("conflicting genesis records are detected, not merged") {
  const HashConfig h = fixtures::config_m(1);
  auto a = fixtures::start_quiet(fixtures::server_config(1));
  auto b = fixtures::start_quiet(fixtures::server_config(1));
  const Digest s = Digest::from_hex(
      "0be8e02f95e60b841c20aa1f1a87911475b80d1f69ebe64d1cc804d36fe89e7e", h.algorithm);
  const Record ga = make_genesis(h, KeyMaterial(h, s, "alice"));
  const Record gb = make_genesis(h, KeyMaterial(h, s, "bob"));
  Client::connect(a->address()).add(ga);
  Client::connect(b->address()).add(gb);

  const SyncResult res = b->sync_token(s, a->address());
  CHECK(res.conflicts == 1);
  CHECK(b->divergence_count() == 1);
  CHECK(a->ledger().get_chain(s) == std::vector<Record>{ga});
  CHECK(b->ledger().get_chain(s) == std::vector<Record>{gb});
}

TEST_CASE("PEERS gossip spreads addresses") {
  auto c = fixtures::start_quiet(fixtures::server_config(1));
  auto b = fixtures::start_quiet(fixtures::server_config(1, {c->address()}));
  auto a = fixtures::start_quiet(fixtures::server_config(1, {b->address()}));
  a->maintain_once();
  auto learned = a->peers().get(c->address());
  REQUIRE(learned);
  CHECK(learned->learned_from == b->address());
  a->maintain_once();
  CHECK(a->peers().get(c->address())->state == PeerState::alive);
  // A never lists itself even when a peer advertises it.
  b->peers().learn(a->address(), "x");
  a->maintain_once();
  CHECK_FALSE(a->peers().get(a->address()));
}

TEST_CASE("notification queue drops the oldest entries") {
  std::mt19937_64 rng(6);
  auto b = fixtures::start_quiet(fixtures::server_config(1));
  ServerOptions opts;
  opts.notify_queue_limit = 2;
  std::atomic<bool> gate{false};
  opts.notify_filter = [&](const std::string&, const Record&) {
    while (!gate) std::this_thread::sleep_for(1ms);
    return true;
  };
  auto a = fixtures::start_quiet(fixtures::server_config(1, {b->address()}), opts);
  const auto chain = fixtures::random_chain(a->ledger().config().hash, 6, rng);
  std::size_t dropped = 0;
  for (const auto& r : chain.records) {
    a->ledger().append(r);
    dropped += a->notify_peers(r).dropped;
  }
  CHECK(dropped >= 3);
  gate = true;
  REQUIRE(a->flush_notifications(5s));
  // What got through is a prefix plus the newest records; sync fills the gap.
  b->sync_token(chain.token, a->address());
  CHECK(b->ledger().get_chain(chain.token) == chain.records);
}
