#pragma once

#include <unistd.h>

#include <filesystem>
#include <numeric>
#include <set>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "ricci_mon/ricci_mon.hpp"

namespace fixtures {

using namespace ricci_mon;

struct E {
  Asn a, b;
  std::uint64_t count = 1;
};

inline SnapshotPtr snap(std::vector<E> edges, std::vector<Asn> extra = {}, Timestamp t = 0, std::uint64_t seq = 0,
                        Timestamp ctime = 0) {
  std::set<Asn> vs(extra.begin(), extra.end());
  std::vector<AsEdge> es;
  for (auto& e : edges) {
    vs.insert(e.a);
    vs.insert(e.b);
    es.push_back({e.a, e.b, e.count});
  }
  std::vector<AsVertex> vv;
  for (Asn a : vs) vv.push_back({a, ctime, 0});
  return std::make_shared<const AsGraphSnapshot>(t, seq, std::move(vv), std::move(es));
}

inline std::vector<E> clique(Asn first, Asn n) {
  std::vector<E> out;
  for (Asn i = 0; i < n; ++i)
    for (Asn j = i + 1; j < n; ++j) out.push_back({first + i, first + j});
  return out;
}

inline std::vector<E> line(Asn n) {
  std::vector<E> out;
  for (Asn i = 1; i < n; ++i) out.push_back({i, i + 1});
  return out;
}

// Two stars of n vertices each (centre plus n-1 leaves), centres 1 and 2 joined.
inline std::vector<E> star_pair(Asn n) {
  std::vector<E> out{{1, 2}};
  Asn next = 3;
  for (Asn c : {1u, 2u})
    for (Asn k = 1; k < n; ++k) out.push_back({c, next++});
  return out;
}

// Same graph for the oracle, vertex asn -> index asn - 1.
inline oracle::Graph to_oracle(const AsGraphSnapshot& s) {
  oracle::Graph g;
  Asn maxa = 0;
  for (auto& v : s.vertices()) maxa = std::max(maxa, v.asn);
  g.n = static_cast<int>(maxa);
  for (auto& e : s.edges()) g.add(static_cast<int>(e.a) - 1, static_cast<int>(e.b) - 1, static_cast<double>(e.count));
  return g;
}

// Connected random graph on 1..n: a random spanning tree plus extra edges.
inline std::vector<E> random_connected(std::mt19937_64& rng, Asn n, double extra_p, bool random_counts = true) {
  std::vector<E> out;
  std::set<std::pair<Asn, Asn>> seen;
  std::uniform_int_distribution<std::uint64_t> cnt(1, 5000);
  for (Asn v = 2; v <= n; ++v) {
    Asn u = std::uniform_int_distribution<Asn>(1, v - 1)(rng);
    seen.insert({u, v});
    out.push_back({u, v, random_counts ? cnt(rng) : 1});
  }
  std::uniform_real_distribution<double> unit(0, 1);
  for (Asn u = 1; u <= n; ++u)
    for (Asn v = u + 1; v <= n; ++v)
      if (!seen.contains({u, v}) && unit(rng) < extra_p) {
        seen.insert({u, v});
        out.push_back({u, v, random_counts ? cnt(rng) : 1});
      }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ricci_mon_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Eight-AS reroute: AS 1 moves its /16 from transit 2 to transit 3 and adds
// a /20 behind 3. Landmark 8 is reached via 2-5-8, 4-6-8 and 3-7-8.
inline std::pair<SnapshotPtr, SnapshotPtr> reroute_fixture() {
  std::vector<FeedRecord> before{
      {0, 1, RecordKind::Announce, *detail::parse_cidr("10.0.0.0/16"), {1, 2, 5, 8}},
      {0, 1, RecordKind::Announce, *detail::parse_cidr("10.9.0.0/24"), {1, 2}},
      {0, 1, RecordKind::Announce, *detail::parse_cidr("10.1.0.0/20"), {1, 4, 6, 8}},
      {0, 2, RecordKind::Announce, *detail::parse_cidr("10.2.0.0/22"), {2, 5, 8}},
      {0, 3, RecordKind::Announce, *detail::parse_cidr("10.3.0.0/22"), {3, 7, 8}},
  };
  std::vector<FeedRecord> after{
      {60, 1, RecordKind::Announce, *detail::parse_cidr("10.0.0.0/16"), {1, 3, 7, 8}},
      {60, 1, RecordKind::Announce, *detail::parse_cidr("10.4.0.0/20"), {1, 3, 7}},
  };
  RouteTable rt;
  AsGraph g;
  for (auto& r : before) apply_record(rt, g, r);
  auto s0 = std::make_shared<const AsGraphSnapshot>(g.snapshot(60, 0));
  for (auto& r : after) apply_record(rt, g, r);
  auto s1 = std::make_shared<const AsGraphSnapshot>(g.snapshot(120, 1));
  return {s0, s1};
}

}  // namespace fixtures
