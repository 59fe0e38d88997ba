#include "hasq/chain.hpp"

#include <charconv>

namespace hasq {

Digest nested_commitment(const HashConfig& cfg, std::uint64_t first_seq, const Digest& token,
                         std::size_t depth, const Digest& key) {
  if (depth == 0) throw std::invalid_argument("nested_commitment depth must be >= 1");
  // Innermost level uses the highest seq.
  Digest acc = key;
  for (std::size_t level = depth; level-- > 0;) {
    acc = link_hash(cfg, first_seq + level, token, acc);
  }
  return acc;
}

Commitment make_generator_cascade(const HashConfig& cfg, std::uint64_t n_next,
                                  const Digest& token, std::span<const Digest> keys) {
  const std::size_t m = cfg.generator_count;
  if (n_next < 1) throw std::invalid_argument("n_next must be >= 1");
  if (keys.size() != m + 1) {
    throw std::invalid_argument("cascade needs " + std::to_string(m + 1) + " keys");
  }
  Commitment c;
  c.generators.reserve(m);
  for (std::size_t j = 1; j <= m; ++j) {
    c.generators.push_back(nested_commitment(cfg, n_next, token, j, keys[j - 1]));
  }
  c.owner = nested_commitment(cfg, n_next, token, m + 1, keys[m]);
  return c;
}

Commitment expected_fields(const HashConfig& cfg, const Record& prev, const Digest& next_key,
                           std::span<const Digest> next_generators) {
  const std::size_t m = cfg.generator_count;
  if (next_generators.size() != m) throw std::invalid_argument("generator count mismatch");
  const std::uint64_t n = prev.seq + 1;
  Commitment c;
  c.generators.reserve(m);
  if (m == 0) {
    c.owner = link_hash(cfg, n, prev.token, next_key);
    return c;
  }
  c.generators.push_back(link_hash(cfg, n, prev.token, next_key));
  for (std::size_t j = 1; j < m; ++j) {
    c.generators.push_back(link_hash(cfg, n, prev.token, next_generators[j - 1]));
  }
  c.owner = link_hash(cfg, n, prev.token, next_generators[m - 1]);
  return c;
}

std::string LinkVerdict::field_name() const {
  switch (failure) {
    case LinkFailure::none:
      return {};
    case LinkFailure::token:
      return "S";
    case LinkFailure::seq:
      return "seq";
    case LinkFailure::generator:
      return "G[" + std::to_string(generator_index) + "]";
    case LinkFailure::owner:
      return "O";
    case LinkFailure::generator_count:
      return "generator-count";
  }
  return "?";
}

LinkVerdict verify_link(const HashConfig& cfg, const Record& prev, const Record& next) {
  if (prev.token != next.token) throw TokenMismatch("records belong to different tokens");
  const std::size_t m = cfg.generator_count;
  if (prev.generators.size() != m || next.generators.size() != m) {
    return {LinkFailure::generator_count, 0};
  }
  if (prev.seq == UINT64_MAX || next.seq != prev.seq + 1) return {LinkFailure::seq, 0};

  const Commitment want = expected_fields(cfg, prev, next.key, next.generators);
  for (std::size_t j = 0; j < m; ++j) {
    if (prev.generators[j] != want.generators[j]) return {LinkFailure::generator, j + 1};
  }
  if (prev.owner != want.owner) return {LinkFailure::owner, 0};
  return {};
}

std::optional<std::size_t> ChainReport::first_failure() const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (!links[i].ok()) return i;
  }
  return std::nullopt;
}

ChainReport verify_chain(const HashConfig& cfg, const TokenChain& chain) {
  ChainReport report;
  const auto& recs = chain.records;
  if (!recs.empty() && recs.front().token != chain.token) report.passed = false;
  for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
    LinkVerdict v;
    if (recs[i].token != recs[i + 1].token || recs[i + 1].token != chain.token) {
      v.failure = LinkFailure::token;
    } else {
      v = verify_link(cfg, recs[i], recs[i + 1]);
    }
    if (!v.ok()) report.passed = false;
    report.links.push_back(v);
  }
  return report;
}

std::string serialize_record(const Record& r) {
  std::string line = std::to_string(r.seq);
  line.reserve(line.size() + 65 * (r.generators.size() + 3) + (r.data ? r.data->size() + 1 : 0));
  line.push_back(' ');
  line.append(r.token.hex());
  line.push_back(' ');
  line.append(r.key.hex());
  for (const auto& g : r.generators) {
    line.push_back(' ');
    line.append(g.hex());
  }
  line.push_back(' ');
  line.append(r.owner.hex());
  if (r.data) {
    line.push_back(' ');
    line.append(*r.data);
  }
  return line;
}

std::optional<std::uint64_t> parse_canonical_uint(std::string_view s) {
  if (s.empty() || (s.size() > 1 && s[0] == '0')) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::optional<std::string> data_field_problem(std::string_view d, std::size_t max_data_bytes) {
  if (d.empty()) return "data field is empty";
  if (d.size() > max_data_bytes) {
    return "data field exceeds " + std::to_string(max_data_bytes) + " bytes";
  }
  for (char c : d) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x20 || u == 0x7f) return "data field contains a control byte";
  }
  if (!is_valid_utf8(d)) return "data field is not valid UTF-8";
  return std::nullopt;
}

Record parse_record(const HashConfig& cfg, std::string_view line, std::size_t max_data_bytes) {
  using Kind = ParseError::Kind;
  const std::size_t m = cfg.generator_count;
  const std::size_t fixed = m + 4;

  std::vector<std::string_view> fields;
  fields.reserve(fixed);
  std::size_t pos = 0;
  bool has_data = false;
  while (fields.size() < fixed) {
    const std::size_t sp = line.find(' ', pos);
    if (sp == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      pos = line.size();
      break;
    }
    fields.push_back(line.substr(pos, sp - pos));
    pos = sp + 1;
    has_data = fields.size() == fixed;
  }
  if (fields.size() < fixed) {
    throw ParseError(Kind::field_count, fields.size() + 1,
                     "expected " + std::to_string(fixed) + " fields, found " +
                         std::to_string(fields.size()));
  }

  Record r;
  auto seq = parse_canonical_uint(fields[0]);
  if (!seq) throw ParseError(Kind::bad_number, 1, "non-canonical sequence number");
  r.seq = *seq;

  auto digest_at = [&](std::size_t i) {
    auto d = Digest::parse(fields[i], cfg.algorithm);
    if (!d) throw ParseError(Kind::bad_digest, i + 1, "malformed digest");
    return *d;
  };
  r.token = digest_at(1);
  r.key = digest_at(2);
  r.generators.reserve(m);
  for (std::size_t j = 0; j < m; ++j) r.generators.push_back(digest_at(3 + j));
  r.owner = digest_at(3 + m);

  if (has_data) {
    std::string_view d = line.substr(pos);
    if (auto problem = data_field_problem(d, max_data_bytes)) {
      throw ParseError(Kind::bad_data, fixed + 1, *problem);
    }
    r.data = std::string(d);
  }
  return r;
}

}  // namespace hasq
