#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ricci_mon/detector.hpp"
#include "ricci_mon/feed.hpp"
#include "toml.hpp"

namespace ricci_mon {

enum class TopologyKind { ScaleFree, Barbell, StarPair, Line, Clique };

inline std::string_view to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::ScaleFree: return "scale_free";
    case TopologyKind::Barbell: return "barbell";
    case TopologyKind::StarPair: return "star_pair";
    case TopologyKind::Line: return "line";
    case TopologyKind::Clique: return "clique";
  }
  return "scale_free";
}

inline TopologyKind topology_kind_from_string(std::string_view s) {
  for (auto k : {TopologyKind::ScaleFree, TopologyKind::Barbell, TopologyKind::StarPair, TopologyKind::Line,
                 TopologyKind::Clique})
    if (to_string(k) == s) return k;
  throw Error("unknown topology kind '" + std::string(s) + "'");
}

// size: vertex count (scale_free, line, clique), first clique (barbell),
// vertices per star including its centre (star_pair).
struct TopologySpec {
  TopologyKind kind = TopologyKind::ScaleFree;
  std::size_t size = 100;
  std::size_t size2 = 0;       // barbell second clique; 0 means same as size
  std::size_t bridges = 1;     // barbell
  std::size_t attach = 2;      // scale_free edges per arrival
  std::uint64_t seed = 0;
  Asn first_asn = 1;
  std::uint8_t edge_prefix_len = 20;
};

struct SyntheticRoute {
  Asn peer = 0;
  Ipv4Prefix prefix;
  std::vector<Asn> path;
};

struct SyntheticTopology {
  std::vector<Asn> asns;
  std::vector<std::pair<Asn, Asn>> edges;  // a < b, ascending
  std::vector<SyntheticRoute> routes;      // one per edge
};

// Hands out aligned, non-overlapping IPv4 blocks from 1.0.0.0 upwards.
class PrefixAllocator {
public:
  Ipv4Prefix next(std::uint8_t len) {
    if (len < 8 || len > 32) throw Error("synthetic prefix length must be in [8, 32]");
    std::uint64_t size = std::uint64_t{1} << (32 - len);
    cursor_ = (cursor_ + size - 1) / size * size;
    if (cursor_ + size > (std::uint64_t{224} << 24)) throw Error("synthetic address space exhausted");
    auto p = Ipv4Prefix::make(static_cast<std::uint32_t>(cursor_), len);
    cursor_ += size;
    return p;
  }

private:
  std::uint64_t cursor_ = std::uint64_t{1} << 24;
};

inline SyntheticTopology gen_topology(const TopologySpec& spec, PrefixAllocator& prefixes) {
  std::set<std::pair<std::size_t, std::size_t>> e;
  auto link = [&](std::size_t a, std::size_t b) {
    if (a == b) throw Error("self loop in generated topology");
    e.emplace(std::min(a, b), std::max(a, b));
  };
  std::size_t n = spec.size;
  switch (spec.kind) {
    case TopologyKind::Clique:
      if (n < 2) throw Error("clique needs at least 2 vertices");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) link(i, j);
      break;
    case TopologyKind::Line:
      if (n < 2) throw Error("line needs at least 2 vertices");
      for (std::size_t i = 0; i + 1 < n; ++i) link(i, i + 1);
      break;
    case TopologyKind::StarPair:
      // centres 0 and 1; each star has size - 1 leaves
      if (n < 2) throw Error("star_pair needs stars of at least 2 vertices");
      link(0, 1);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        link(0, 2 + 2 * i);
        link(1, 3 + 2 * i);
      }
      n = 2 * n;
      break;
    case TopologyKind::Barbell: {
      std::size_t n2 = spec.size2 ? spec.size2 : n;
      if (n < 2 || n2 < 2) throw Error("barbell cliques need at least 2 vertices");
      if (spec.bridges < 1 || spec.bridges > std::min(n, n2)) throw Error("barbell bridge count out of range");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) link(i, j);
      for (std::size_t i = 0; i < n2; ++i)
        for (std::size_t j = i + 1; j < n2; ++j) link(n + i, n + j);
      for (std::size_t k = 0; k < spec.bridges; ++k) link(k, n + k);
      n += n2;
      break;
    }
    case TopologyKind::ScaleFree: {
      // Preferential attachment grown from an (attach + 1)-clique.
      const std::size_t m = spec.attach;
      if (m < 1 || n < m + 1) throw Error("scale_free needs size > attach >= 1");
      std::mt19937_64 rng(spec.seed);
      std::vector<std::size_t> ends;  // each vertex repeated once per incident edge
      for (std::size_t i = 0; i <= m; ++i)
        for (std::size_t j = i + 1; j <= m; ++j) {
          link(i, j);
          ends.push_back(i);
          ends.push_back(j);
        }
      for (std::size_t v = m + 1; v < n; ++v) {
        std::vector<std::size_t> targets;
        while (targets.size() < m) {
          auto t = ends[std::uniform_int_distribution<std::size_t>(0, ends.size() - 1)(rng)];
          if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
        }
        for (auto t : targets) {
          link(v, t);
          ends.push_back(v);
          ends.push_back(t);
        }
      }
      break;
    }
  }
  SyntheticTopology topo;
  for (std::size_t i = 0; i < n; ++i) topo.asns.push_back(spec.first_asn + static_cast<Asn>(i));
  for (auto [a, b] : e) {
    Asn x = topo.asns[a], y = topo.asns[b];
    topo.edges.emplace_back(x, y);
    topo.routes.push_back({x, prefixes.next(spec.edge_prefix_len), {x, y}});
  }
  return topo;
}

inline SyntheticTopology gen_topology(const TopologySpec& spec) {
  PrefixAllocator p;
  return gen_topology(spec, p);
}

enum class ScenarioEventKind { Leak, Cut };

struct ScenarioEvent {
  Timestamp t = 0;
  ScenarioEventKind kind = ScenarioEventKind::Leak;
  // leak
  std::optional<Asn> origin;  // default: highest-degree vertex
  std::size_t breadth = 50;
  std::uint8_t prefix_len = 12;
  std::optional<Timestamp> duration;  // leak withdrawn after this many seconds
  // cut
  Asn a = 0;
  Asn b = 0;
  std::string expect;  // expected class; default GLOBAL for leaks, LOCAL for cuts
};

struct DriftSpec {
  double rate = 0.0;        // churn announcements per minute
  std::uint8_t prefix_len = 24;
  Timestamp hold = 180;     // seconds before a churn prefix is withdrawn
  std::size_t stub_degree = 0;  // stubs: degree <= this; 0 picks the median degree
};

struct Scenario {
  std::string name = "scenario";
  TopologySpec topology;
  std::vector<ScenarioEvent> events;  // time-ordered
  DriftSpec drift;
  Timestamp start = 0;
  Timestamp duration = 0;  // 0: last event + 5 minutes
  std::uint64_t seed = 0;  // events and drift
};

struct ScenarioLabel {
  Timestamp t = 0;
  std::string kind;
  std::string expected;
};

inline void validate(const Scenario& sc) {
  Timestamp prev = std::numeric_limits<Timestamp>::min();
  for (const auto& ev : sc.events) {
    if (ev.t < prev) throw Error("scenario events must be time-ordered");
    if (ev.t < sc.start) throw Error("scenario event scheduled before start");
    prev = ev.t;
    if (ev.kind == ScenarioEventKind::Cut && (ev.a == 0 || ev.b == 0)) throw Error("cut event needs a and b");
    if (!ev.expect.empty()) event_class_from_string(ev.expect);
  }
  if (sc.drift.rate < 0) throw Error("drift rate must be non-negative");
  if (sc.duration < 0) throw Error("scenario duration must be non-negative");
}

namespace detail {

template <typename T>
T toml_get(const toml::table& t, std::string_view key, T fallback) {
  if (auto v = t[key].value<T>()) return *v;
  if (t.contains(key)) throw Error("scenario key '" + std::string(key) + "' has the wrong type");
  return fallback;
}

}  // namespace detail

inline Scenario scenario_from_toml(const toml::table& root) {
  Scenario sc;
  sc.name = detail::toml_get<std::string>(root, "name", sc.name);
  sc.seed = static_cast<std::uint64_t>(detail::toml_get<std::int64_t>(root, "seed", 0));
  sc.start = detail::toml_get<std::int64_t>(root, "start", 0);
  sc.duration = detail::toml_get<std::int64_t>(root, "duration", 0);
  if (auto* t = root["topology"].as_table()) {
    auto& ts = sc.topology;
    ts.kind = topology_kind_from_string(detail::toml_get<std::string>(*t, "kind", "scale_free"));
    ts.size = static_cast<std::size_t>(detail::toml_get<std::int64_t>(*t, "size", 100));
    ts.size2 = static_cast<std::size_t>(detail::toml_get<std::int64_t>(*t, "size2", 0));
    ts.bridges = static_cast<std::size_t>(detail::toml_get<std::int64_t>(*t, "bridges", 1));
    ts.attach = static_cast<std::size_t>(detail::toml_get<std::int64_t>(*t, "attach", 2));
    ts.seed = static_cast<std::uint64_t>(detail::toml_get<std::int64_t>(*t, "seed", 0));
    ts.first_asn = static_cast<Asn>(detail::toml_get<std::int64_t>(*t, "first_asn", 1));
    ts.edge_prefix_len = static_cast<std::uint8_t>(detail::toml_get<std::int64_t>(*t, "prefix_len", 20));
  } else {
    throw Error("scenario needs a [topology] table");
  }
  if (auto* d = root["drift"].as_table()) {
    sc.drift.rate = detail::toml_get<double>(*d, "rate", 0.0);
    sc.drift.prefix_len = static_cast<std::uint8_t>(detail::toml_get<std::int64_t>(*d, "prefix_len", 24));
    sc.drift.hold = detail::toml_get<std::int64_t>(*d, "hold", 180);
    sc.drift.stub_degree = static_cast<std::size_t>(detail::toml_get<std::int64_t>(*d, "stub_degree", 0));
  }
  if (auto* evs = root["events"].as_array()) {
    for (auto& node : *evs) {
      auto* e = node.as_table();
      if (!e) throw Error("[[events]] entries must be tables");
      ScenarioEvent ev;
      ev.t = detail::toml_get<std::int64_t>(*e, "t", 0);
      auto kind = detail::toml_get<std::string>(*e, "kind", "");
      if (kind == "leak") {
        ev.kind = ScenarioEventKind::Leak;
        if (auto o = (*e)["origin"].value<std::int64_t>()) ev.origin = static_cast<Asn>(*o);
        ev.breadth = static_cast<std::size_t>(detail::toml_get<std::int64_t>(*e, "breadth", 50));
        ev.prefix_len = static_cast<std::uint8_t>(detail::toml_get<std::int64_t>(*e, "prefix_len", 12));
        if (auto d = (*e)["duration"].value<std::int64_t>()) ev.duration = *d;
      } else if (kind == "cut") {
        ev.kind = ScenarioEventKind::Cut;
        ev.a = static_cast<Asn>(detail::toml_get<std::int64_t>(*e, "a", 0));
        ev.b = static_cast<Asn>(detail::toml_get<std::int64_t>(*e, "b", 0));
      } else {
        throw Error("unknown event kind '" + kind + "'");
      }
      ev.expect = detail::toml_get<std::string>(*e, "expect", "");
      sc.events.push_back(ev);
    }
  }
  validate(sc);
  return sc;
}

inline Scenario parse_scenario(std::string_view text) {
  try {
    return scenario_from_toml(toml::parse(text));
  } catch (const toml::parse_error& e) {
    throw Error(std::string("scenario TOML: ") + std::string(e.description()));
  }
}

inline Scenario load_scenario(const std::string& path) {
  try {
    return scenario_from_toml(toml::parse_file(path));
  } catch (const toml::parse_error& e) {
    throw Error("scenario TOML " + path + ": " + std::string(e.description()));
  }
}

struct SyntheticFeed {
  std::vector<FeedRecord> records;  // time-ordered
  std::vector<ScenarioLabel> labels;
  SyntheticTopology topology;
  AsGraph final_graph;  // state after the last record
};

namespace detail {

// Replays generated records against a live route table so later choices
// (cut targets, leak candidates) see the current graph.
class FeedWriter {
public:
  void emit(FeedRecord rec) {
    apply_record(routes_, graph_, rec);
    out_.push_back(std::move(rec));
  }

  void announce(Timestamp t, Asn peer, Ipv4Prefix p, std::vector<Asn> path) {
    emit({t, peer, RecordKind::Announce, p, std::move(path)});
  }
  void withdraw(Timestamp t, Asn peer, Ipv4Prefix p) {
    if (routes_.routes.contains({peer, p})) emit({t, peer, RecordKind::Withdraw, p, {}});
  }

  const AsGraph& graph() const { return graph_; }
  const RouteTable& routes() const { return routes_; }
  std::vector<FeedRecord>& records() { return out_; }

private:
  RouteTable routes_;
  AsGraph graph_;
  std::vector<FeedRecord> out_;
};

inline std::vector<Asn> neighbors_of(const AsGraph& g, Asn v) {
  std::vector<Asn> out;
  for (const auto& [key, count] : g.edges()) {
    if (key.first == v) out.push_back(key.second);
    else if (key.second == v) out.push_back(key.first);
  }
  return out;
}

// BFS tree over the live graph; neighbours are visited in ascending ASN.
inline std::map<Asn, Asn> bfs_parents(const AsGraph& g, Asn root) {
  std::map<Asn, std::vector<Asn>> adj;
  for (const auto& [key, count] : g.edges()) {
    adj[key.first].push_back(key.second);
    adj[key.second].push_back(key.first);
  }
  std::map<Asn, Asn> parent{{root, root}};
  std::vector<Asn> queue{root};
  for (std::size_t h = 0; h < queue.size(); ++h)
    for (Asn w : adj[queue[h]])
      if (parent.emplace(w, queue[h]).second) queue.push_back(w);
  return parent;
}

}  // namespace detail

// Builds the wire-format record stream for a scenario: the base topology
// announced at `start`, then drift churn and events in time order.
inline SyntheticFeed emit_feed(const Scenario& sc) {
  validate(sc);
  PrefixAllocator prefixes;
  SyntheticFeed out;
  out.topology = gen_topology(sc.topology, prefixes);
  detail::FeedWriter w;
  for (const auto& r : out.topology.routes) w.announce(sc.start, r.peer, r.prefix, r.path);

  Timestamp end = sc.duration > 0 ? sc.start + sc.duration
                                  : (sc.events.empty() ? sc.start : sc.events.back().t) + 300;

  // Static adjacency of the base topology for drift and leak choices.
  std::map<Asn, std::vector<Asn>> adj;
  for (auto [a, b] : out.topology.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<Asn> stubs;
  {
    std::size_t limit = sc.drift.stub_degree;
    if (limit == 0) {
      std::vector<std::size_t> deg;
      for (auto& [v, nb] : adj) deg.push_back(nb.size());
      std::nth_element(deg.begin(), deg.begin() + static_cast<std::ptrdiff_t>(deg.size() / 2), deg.end());
      limit = deg[deg.size() / 2];
    }
    for (auto& [v, nb] : adj)
      if (nb.size() <= limit) stubs.push_back(v);
  }

  struct Action {
    Timestamp t;
    std::size_t order;
    int type;  // 0 drift announce, 1 drift withdraw, 2 event, 3 leak withdraw
    std::size_t index;
  };
  std::vector<Action> actions;
  std::size_t order = 0;
  std::mt19937_64 rng(sc.seed);

  struct Churn {
    Asn provider = 0, stub = 0;
    Ipv4Prefix prefix;
  };
  std::vector<Churn> churn;
  if (sc.drift.rate > 0 && !stubs.empty()) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Timestamp minute = sc.start + 60; minute < end; minute += 60) {
      // rate may be fractional; the remainder fires with matching probability
      auto n = static_cast<std::size_t>(sc.drift.rate);
      if (unit(rng) < sc.drift.rate - static_cast<double>(n)) ++n;
      for (std::size_t k = 0; k < n; ++k) {
        Churn c;
        c.stub = stubs[std::uniform_int_distribution<std::size_t>(0, stubs.size() - 1)(rng)];
        auto& nb = adj[c.stub];
        c.provider = nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)];
        c.prefix = prefixes.next(sc.drift.prefix_len);
        auto at = minute + static_cast<Timestamp>(unit(rng) * 60.0);
        if (at >= end) at = end - 1;
        churn.push_back(c);
        actions.push_back({at, order++, 0, churn.size() - 1});
        if (at + sc.drift.hold < end) actions.push_back({at + sc.drift.hold, order++, 1, churn.size() - 1});
      }
    }
  }
  for (std::size_t i = 0; i < sc.events.size(); ++i) {
    actions.push_back({sc.events[i].t, order++, 2, i});
    if (sc.events[i].kind == ScenarioEventKind::Leak && sc.events[i].duration)
      actions.push_back({sc.events[i].t + *sc.events[i].duration, order++, 3, i});
  }
  std::sort(actions.begin(), actions.end(),
            [](const Action& l, const Action& r) { return l.t != r.t ? l.t < r.t : l.order < r.order; });

  std::map<std::size_t, std::vector<SyntheticRoute>> leak_routes;
  for (const auto& act : actions) {
    switch (act.type) {
      case 0: {
        const auto& c = churn[act.index];
        // a cut may have removed the link; churn never recreates it
        if (w.graph().has_edge(c.provider, c.stub)) w.announce(act.t, c.provider, c.prefix, {c.provider, c.stub});
        break;
      }
      case 1: {
        const auto& c = churn[act.index];
        w.withdraw(act.t, c.provider, c.prefix);
        break;
      }
      case 2: {
        const auto& ev = sc.events[act.index];
        ScenarioLabel label{ev.t, ev.kind == ScenarioEventKind::Leak ? "leak" : "cut", ev.expect};
        if (ev.kind == ScenarioEventKind::Leak) {
          if (label.expected.empty()) label.expected = "GLOBAL";
          Asn origin = 0;
          if (ev.origin) {
            origin = *ev.origin;
          } else {
            std::size_t best = 0;
            for (auto& [v, nb] : adj)
              if (nb.size() > best) best = nb.size(), origin = v;
          }
          if (!w.graph().has_vertex(origin)) throw Error("leak origin " + std::to_string(origin) + " not in graph");
          auto nb = detail::neighbors_of(w.graph(), origin);
          if (nb.empty()) throw Error("leak origin has no neighbour to route through");
          std::set<Asn> excluded(nb.begin(), nb.end());
          excluded.insert(origin);
          std::vector<Asn> remote;
          for (const auto& [asn, state] : w.graph().vertices())
            if (!excluded.contains(asn)) remote.push_back(asn);
          if (remote.size() < ev.breadth)
            throw Error("leak breadth " + std::to_string(ev.breadth) + " exceeds available remote ASes");
          for (std::size_t i = 0; i < ev.breadth; ++i)
            std::swap(remote[i], remote[i + std::uniform_int_distribution<std::size_t>(0, remote.size() - i - 1)(rng)]);
          remote.resize(ev.breadth);
          std::sort(remote.begin(), remote.end());
          // The leaked routes carry the origin's own shortest path to a random
          // destination, so the new traffic also loads existing transit links.
          auto parent = detail::bfs_parents(w.graph(), origin);
          std::vector<Asn> reachable;
          for (auto& [v, p] : parent)
            if (v != origin) reachable.push_back(v);
          for (Asn r : remote) {
            std::vector<Asn> path;
            for (int attempt = 0; attempt < 16 && path.empty(); ++attempt) {
              Asn dest = reachable[std::uniform_int_distribution<std::size_t>(0, reachable.size() - 1)(rng)];
              std::vector<Asn> tail;
              for (Asn v = dest; v != origin; v = parent.at(v)) tail.push_back(v);
              if (std::find(tail.begin(), tail.end(), r) != tail.end()) continue;
              path = {r, origin};
              path.insert(path.end(), tail.rbegin(), tail.rend());
            }
            if (path.empty()) path = {r, origin, nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]};
            SyntheticRoute route{r, prefixes.next(ev.prefix_len), path};
            w.announce(ev.t, route.peer, route.prefix, route.path);
            leak_routes[act.index].push_back(route);
          }
        } else {
          if (label.expected.empty()) label.expected = "LOCAL";
          if (!w.graph().has_edge(ev.a, ev.b))
            throw Error("cut target " + std::to_string(ev.a) + "-" + std::to_string(ev.b) + " is not an edge");
          std::vector<RouteKey> victims;
          for (const auto& [key, path] : w.routes().routes)
            for (std::size_t i = 1; i < path.size(); ++i)
              if (edge_key(path[i - 1], path[i]) == edge_key(ev.a, ev.b)) {
                victims.push_back(key);
                break;
              }
          for (const auto& [peer, prefix] : victims) w.withdraw(ev.t, peer, prefix);
        }
        out.labels.push_back(label);
        break;
      }
      case 3:
        for (const auto& r : leak_routes[act.index]) w.withdraw(act.t, r.peer, r.prefix);
        break;
    }
  }
  out.records = std::move(w.records());
  out.final_graph = w.graph();
  return out;
}

inline void write_feed(std::ostream& out, const SyntheticFeed& feed) {
  for (const auto& r : feed.records) out << format_feed_line(r) << '\n';
}

inline nlohmann::ordered_json labels_to_json(const Scenario& sc, const SyntheticFeed& feed) {
  nlohmann::ordered_json j;
  j["scenario"] = sc.name;
  j["labels"] = nlohmann::ordered_json::array();
  for (const auto& l : feed.labels) j["labels"].push_back({{"t", l.t}, {"kind", l.kind}, {"expected", l.expected}});
  return j;
}

}  // namespace ricci_mon
