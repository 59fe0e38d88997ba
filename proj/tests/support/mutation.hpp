#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "fixtures.hpp"
#include "hasq/chain.hpp"

namespace fixtures {

struct MutationReport {
  std::size_t total = 0;
  std::size_t killed = 0;
  /// Surviving mutations grouped by "record <i> <field>".
  std::map<std::string, std::size_t> survivors;

  bool all_killed() const { return killed == total; }
};

/// Every single-hex-digit change of every K, G and O, and every N +-1
/// (N - 1 only when N > 0), each applied alone to a copy of `chain`.
inline MutationReport mutate_all(const HashConfig& cfg, const TokenChain& chain) {
  MutationReport rep;
  const std::size_t digits = digest_hex_length(cfg.algorithm);
  auto run = [&](const TokenChain& mutant, const std::string& label) {
    ++rep.total;
    if (verify_chain(cfg, mutant).passed) {
      ++rep.survivors[label];
    } else {
      ++rep.killed;
    }
  };
  for (std::size_t i = 0; i < chain.records.size(); ++i) {
    const std::string prefix = "record " + std::to_string(i) + " ";
    auto digit_mutants = [&](auto field_of, const std::string& name) {
      for (std::size_t pos = 0; pos < digits; ++pos) {
        TokenChain mutant = chain;
        Digest& d = field_of(mutant.records[i]);
        d = flip_digit(d, pos, cfg.algorithm);
        run(mutant, prefix + name);
      }
    };
    digit_mutants([](Record& r) -> Digest& { return r.key; }, "K");
    for (std::size_t j = 0; j < cfg.generator_count; ++j) {
      digit_mutants([j](Record& r) -> Digest& { return r.generators[j]; },
                    "G[" + std::to_string(j + 1) + "]");
    }
    digit_mutants([](Record& r) -> Digest& { return r.owner; }, "O");

    for (int delta : {+1, -1}) {
      if (delta < 0 && chain.records[i].seq == 0) continue;
      TokenChain mutant = chain;
      mutant.records[i].seq += static_cast<std::uint64_t>(delta);
      run(mutant, prefix + "N");
    }
  }
  return rep;
}

}  // namespace fixtures
