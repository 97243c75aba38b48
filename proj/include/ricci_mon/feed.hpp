#pragma once

#include <charconv>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <spdlog/spdlog.h>

#include "ricci_mon/graph.hpp"

namespace ricci_mon {

struct Ipv4Prefix {
  std::uint32_t network = 0;  // host bits cleared
  std::uint8_t length = 0;

  std::uint64_t addresses() const { return std::uint64_t{1} << (32 - length); }

  std::string to_string() const {
    return std::to_string(network >> 24) + "." + std::to_string((network >> 16) & 0xff) + "." +
           std::to_string((network >> 8) & 0xff) + "." + std::to_string(network & 0xff) + "/" +
           std::to_string(length);
  }

  static Ipv4Prefix make(std::uint32_t addr, std::uint8_t len) {
    std::uint32_t mask = len == 0 ? 0 : ~std::uint32_t{0} << (32 - len);
    return {addr & mask, len};
  }

  friend auto operator<=>(const Ipv4Prefix&, const Ipv4Prefix&) = default;
};

enum class RecordKind { Announce, Withdraw };

struct FeedRecord {
  Timestamp t = 0;
  Asn peer = 0;
  RecordKind kind = RecordKind::Announce;
  Ipv4Prefix prefix;
  std::vector<Asn> as_path;  // empty for withdrawals

  friend bool operator==(const FeedRecord&, const FeedRecord&) = default;
};

// Field is 1-based; column is the 1-based character offset where the
// offending field starts.
class FeedParseError : public Error {
public:
  FeedParseError(int field, std::size_t column, const std::string& what)
      : Error("field " + std::to_string(field) + " (column " + std::to_string(column) + "): " + what),
        field_(field),
        column_(column) {}
  int field() const { return field_; }
  std::size_t column() const { return column_; }

private:
  int field_;
  std::size_t column_;
};

namespace detail {

template <typename T>
std::optional<T> parse_uint(std::string_view s) {
  T v{};
  if (s.empty()) return std::nullopt;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<Ipv4Prefix> parse_cidr(std::string_view s) {
  auto slash = s.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto len = parse_uint<unsigned>(s.substr(slash + 1));
  if (!len || *len > 32) return std::nullopt;
  std::uint32_t addr = 0;
  auto ip = s.substr(0, slash);
  for (int octet = 0; octet < 4; ++octet) {
    auto dot = ip.find('.');
    if ((octet < 3) == (dot == std::string_view::npos)) return std::nullopt;
    auto part = parse_uint<unsigned>(ip.substr(0, dot));
    if (!part || *part > 255) return std::nullopt;
    addr = (addr << 8) | *part;
    ip = octet < 3 ? ip.substr(dot + 1) : std::string_view{};
  }
  return Ipv4Prefix::make(addr, static_cast<std::uint8_t>(*len));
}

}  // namespace detail

// `<ts>|<peer>|A|<cidr>|<as path>` or `<ts>|<peer>|W|<cidr>`.
inline FeedRecord parse_feed_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::vector<std::size_t> columns;
  std::size_t start = 0;
  while (true) {
    auto bar = line.find('|', start);
    fields.push_back(line.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start));
    columns.push_back(start + 1);
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  FeedRecord rec;
  auto ts = detail::parse_uint<std::uint64_t>(fields[0]);
  if (!ts) throw FeedParseError(1, columns[0], "timestamp is not a non-negative integer");
  rec.t = static_cast<Timestamp>(*ts);
  if (fields.size() < 4) throw FeedParseError(static_cast<int>(fields.size()) + 1, line.size() + 1, "too few fields");
  auto peer = detail::parse_uint<Asn>(fields[1]);
  if (!peer || *peer == 0) throw FeedParseError(2, columns[1], "peer is not a valid AS number");
  rec.peer = *peer;
  if (fields[2] == "A") rec.kind = RecordKind::Announce;
  else if (fields[2] == "W") rec.kind = RecordKind::Withdraw;
  else throw FeedParseError(3, columns[2], "record kind must be A or W");
  auto prefix = detail::parse_cidr(fields[3]);
  if (!prefix) throw FeedParseError(4, columns[3], "malformed IPv4 prefix");
  rec.prefix = *prefix;
  if (rec.kind == RecordKind::Withdraw) {
    if (fields.size() != 4) throw FeedParseError(5, columns[4], "withdrawal carries no AS path");
    return rec;
  }
  if (fields.size() < 5) throw FeedParseError(5, line.size() + 1, "announcement without AS path");
  if (fields.size() > 5) throw FeedParseError(6, columns[5], "unexpected extra field");
  auto path = fields[4];
  std::size_t pos = 0;
  while (pos < path.size()) {
    if (path[pos] == ' ') { ++pos; continue; }
    auto end = path.find(' ', pos);
    auto tok = path.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    if (tok.find_first_of("{}(),") != std::string_view::npos)
      throw FeedParseError(5, columns[4] + pos, "AS_SET or confederation segment in path");
    auto asn = detail::parse_uint<Asn>(tok);
    if (!asn || *asn == 0) throw FeedParseError(5, columns[4] + pos, "invalid AS number '" + std::string(tok) + "'");
    rec.as_path.push_back(*asn);
    pos = end == std::string_view::npos ? path.size() : end;
  }
  if (rec.as_path.empty()) throw FeedParseError(5, columns[4], "announcement with empty AS path");
  return rec;
}

inline std::string format_feed_line(const FeedRecord& rec) {
  std::string out = std::to_string(rec.t) + "|" + std::to_string(rec.peer) + "|" +
                    (rec.kind == RecordKind::Announce ? "A" : "W") + "|" + rec.prefix.to_string();
  if (rec.kind == RecordKind::Announce) {
    out += "|";
    for (std::size_t i = 0; i < rec.as_path.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(rec.as_path[i]);
    }
  }
  return out;
}

using RouteKey = std::pair<Asn, Ipv4Prefix>;  // (peer, prefix)

struct RouteTable {
  std::map<RouteKey, std::vector<Asn>> routes;  // de-duplicated active paths
  // (origin, prefix) -> number of active routes; drives vertex prefix_count.
  std::map<std::pair<Asn, Ipv4Prefix>, std::uint32_t> origin_refs;

  std::size_t size() const { return routes.size(); }
};

namespace detail {

inline void add_route(RouteTable& rt, AsGraph& graph, const Ipv4Prefix& prefix,
                      const std::vector<Asn>& path, int sign) {
  const auto addr = static_cast<std::int64_t>(prefix.addresses());
  for (std::size_t i = 1; i < path.size(); ++i) graph.add_edge_count(path[i - 1], path[i], sign * addr);
  auto origin = path.back();
  auto& refs = rt.origin_refs[{origin, prefix}];
  if (sign > 0) {
    if (refs++ == 0) graph.adjust_prefix_count(origin, +1);
  } else {
    if (--refs == 0) {
      rt.origin_refs.erase({origin, prefix});
      graph.adjust_prefix_count(origin, -1);
    }
  }
}

}  // namespace detail

// Applies one record. An announcement replaces the peer's prior route for the
// prefix; counts along the old path are released before the new path is
// charged 2^(32-len). Returns the ASes on the old and new paths, ascending.
inline std::vector<Asn> apply_record(RouteTable& rt, AsGraph& graph, const FeedRecord& rec) {
  RouteKey key{rec.peer, rec.prefix};
  auto it = rt.routes.find(key);
  std::set<Asn> touched;
  if (rec.kind == RecordKind::Withdraw) {
    if (it == rt.routes.end()) {
      spdlog::debug("withdraw for unknown route {} via peer {} ignored", rec.prefix.to_string(), rec.peer);
      return {};
    }
    touched.insert(it->second.begin(), it->second.end());
    detail::add_route(rt, graph, rec.prefix, it->second, -1);
    rt.routes.erase(it);
  } else {
    auto path = dedup_path(rec.as_path);
    if (path.empty()) throw Error("announcement with empty AS path");
    for (Asn a : path)
      if (a == 0) throw Error("AS path contains AS number 0");
    for (Asn a : path) graph.touch(a, rec.t);
    if (it != rt.routes.end()) {
      touched.insert(it->second.begin(), it->second.end());
      detail::add_route(rt, graph, rec.prefix, it->second, -1);
      it->second = path;
    } else {
      it = rt.routes.emplace(key, path).first;
    }
    touched.insert(path.begin(), path.end());
    detail::add_route(rt, graph, rec.prefix, it->second, +1);
  }
  for (Asn a : touched) graph.touch(a, rec.t);
  return {touched.begin(), touched.end()};
}

struct IngestOptions {
  Timestamp interval = 60;
  Timestamp regression_tolerance = 5;
};

struct IngestStats {
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t parse_errors = 0;
  std::size_t regressions = 0;
  std::size_t snapshots = 0;
};

// Snapshot windows are aligned to multiples of the interval; a snapshot is
// emitted at each window end (also for windows without records) and once
// more at end of feed for the last partially filled window.
class SnapshotClock {
public:
  using Sink = std::function<void(SnapshotPtr)>;

  SnapshotClock(IngestOptions opts, Sink sink) : opts_(opts), sink_(std::move(sink)) {
    if (opts_.interval <= 0) throw Error("snapshot interval must be positive");
  }

  void feed(const FeedRecord& rec) {
    if (!window_end_) {
      window_end_ = (floor_div(rec.t, opts_.interval) + 1) * opts_.interval;
    } else if (rec.t + opts_.regression_tolerance < last_t_) {
      ++stats_.regressions;
      spdlog::warn("feed time regressed from {} to {}; record applied anyway", last_t_, rec.t);
    }
    while (rec.t >= *window_end_) {
      emit(*window_end_);
      *window_end_ += opts_.interval;
    }
    last_t_ = std::max(last_t_, rec.t);
    apply_record(routes_, graph_, rec);
    ++stats_.records;
    pending_ = true;
  }

  void finish() {
    if (window_end_ && pending_) emit(*window_end_);
  }

  const AsGraph& graph() const { return graph_; }
  const RouteTable& routes() const { return routes_; }
  IngestStats& stats() { return stats_; }

private:
  static Timestamp floor_div(Timestamp a, Timestamp b) {
    auto q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
  }

  void emit(Timestamp t) {
    sink_(std::make_shared<const AsGraphSnapshot>(graph_.snapshot(t, seq_++)));
    ++stats_.snapshots;
    pending_ = false;
  }

  IngestOptions opts_;
  Sink sink_;
  AsGraph graph_;
  RouteTable routes_;
  std::optional<Timestamp> window_end_;
  Timestamp last_t_ = std::numeric_limits<Timestamp>::min();
  std::uint64_t seq_ = 0;
  bool pending_ = false;
  IngestStats stats_;
};

// Reads a feed stream and hands each snapshot to `sink` in seq order.
// Malformed lines are logged and skipped.
inline IngestStats run_ingest(std::istream& in, const IngestOptions& opts, SnapshotClock::Sink sink) {
  SnapshotClock clock(opts, std::move(sink));
  std::string line;
  while (std::getline(in, line)) {
    ++clock.stats().lines;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    FeedRecord rec;
    try {
      rec = parse_feed_line(line);
    } catch (const FeedParseError& e) {
      ++clock.stats().parse_errors;
      spdlog::warn("feed line {}: {}", clock.stats().lines, e.what());
      continue;
    }
    clock.feed(rec);
  }
  clock.finish();
  return clock.stats();
}

}  // namespace ricci_mon
