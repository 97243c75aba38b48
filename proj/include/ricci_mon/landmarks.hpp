#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ricci_mon/graph.hpp"

namespace ricci_mon {

enum class LandmarkMethod {
  Random,
  TopDegree,
  TopCentrality,
  TopTriangles,
  TierMix,
  RandomWalk,
  RandomWalkFromCollector,
  LazyWalk,
};

inline std::string_view to_string(LandmarkMethod m) {
  switch (m) {
    case LandmarkMethod::Random: return "random";
    case LandmarkMethod::TopDegree: return "top-degree";
    case LandmarkMethod::TopCentrality: return "top-centrality";
    case LandmarkMethod::TopTriangles: return "top-triangles";
    case LandmarkMethod::TierMix: return "tier-mix";
    case LandmarkMethod::RandomWalk: return "random-walk";
    case LandmarkMethod::RandomWalkFromCollector: return "random-walk-collector";
    case LandmarkMethod::LazyWalk: return "lazy-walk";
  }
  return "random";
}

inline LandmarkMethod landmark_method_from_string(std::string_view s) {
  for (auto m : {LandmarkMethod::Random, LandmarkMethod::TopDegree, LandmarkMethod::TopCentrality,
                 LandmarkMethod::TopTriangles, LandmarkMethod::TierMix, LandmarkMethod::RandomWalk,
                 LandmarkMethod::RandomWalkFromCollector, LandmarkMethod::LazyWalk})
    if (to_string(m) == s) return m;
  throw Error("unknown landmark method '" + std::string(s) + "'");
}

struct LandmarkSet {
  std::vector<Asn> members;  // ascending
  LandmarkMethod method = LandmarkMethod::Random;
  std::uint64_t seed = 0;
  double s1 = 0.0;
  double s2 = 0.0;
};

inline nlohmann::ordered_json to_json(const LandmarkSet& ls) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(ls.method));
  j["seed"] = ls.seed;
  j["members"] = ls.members;
  j["s1"] = ls.s1;
  j["s2"] = ls.s2;
  return j;
}

inline LandmarkSet landmarks_from_json(const nlohmann::json& j) {
  LandmarkSet ls;
  try {
    ls.members = j.at("members").get<std::vector<Asn>>();
    if (j.contains("method")) ls.method = landmark_method_from_string(j.at("method").get<std::string>());
    if (j.contains("seed")) ls.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("s1")) ls.s1 = j.at("s1").get<double>();
    if (j.contains("s2")) ls.s2 = j.at("s2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("landmark JSON: ") + e.what());
  }
  if (ls.members.size() < 2) throw Error("landmark set needs at least 2 members");
  return ls;
}

namespace detail {

inline std::vector<std::uint32_t> indices_of(const AsGraphSnapshot& snap, std::span<const Asn> set) {
  std::vector<std::uint32_t> out;
  out.reserve(set.size());
  for (Asn a : set) out.push_back(snap.require_index(a));
  return out;
}

inline std::vector<Asn> asns_sorted(const AsGraphSnapshot& snap, std::span<const std::uint32_t> idx) {
  std::vector<Asn> out;
  for (auto i : idx) out.push_back(snap.asn_at(i));
  std::sort(out.begin(), out.end());
  return out;
}

// Vertex indices ordered by descending score, ascending ASN on ties.
template <typename Score>
std::vector<std::uint32_t> rank_vertices(const AsGraphSnapshot& snap, const std::vector<Score>& score) {
  std::vector<std::uint32_t> order(snap.vertex_count());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return score[l] > score[r]; });
  return order;
}

inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

}  // namespace detail

// |union of neighborhoods| / sum of neighborhood sizes.
inline double score_s1(const AsGraphSnapshot& snap, std::span<const Asn> set) {
  if (set.empty()) throw Error("S1 of an empty set");
  std::vector<std::uint32_t> all;
  std::size_t total = 0;
  for (auto i : detail::indices_of(snap, set)) {
    auto n = snap.neighbors(i);
    total += n.size();
    all.insert(all.end(), n.begin(), n.end());
  }
  if (total == 0) throw Error("S1 undefined: every member is isolated");
  std::sort(all.begin(), all.end());
  auto distinct = static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
  return static_cast<double>(distinct) / static_cast<double>(total);
}

struct SpreadScore {
  double value = 0.0;
  std::size_t disconnected_pairs = 0;  // ordered pairs left out of the sum
};

// Sum of hop distances over ordered member pairs, divided by 2|R|.
inline SpreadScore score_s2(const AsGraphSnapshot& snap, std::span<const Asn> set) {
  if (set.empty()) throw Error("S2 of an empty set");
  SpreadScore s;
  double sum = 0.0;
  for (Asn v : set) {
    auto d = hop_distances(snap, v, set);
    for (Asn w : set) {
      auto it = d.find(w);
      if (it == d.end()) ++s.disconnected_pairs;
      else sum += it->second;
    }
  }
  s.value = sum / (2.0 * static_cast<double>(set.size()));
  return s;
}

// Default stand-in for the Tier-1/Tier-2 list: the ceil(sqrt(L) * 5)
// highest-degree vertices.
inline std::vector<Asn> default_tier_set(const AsGraphSnapshot& snap, std::size_t landmark_count) {
  std::vector<std::size_t> degree(snap.vertex_count());
  for (std::uint32_t i = 0; i < degree.size(); ++i) degree[i] = snap.degree(i);
  auto order = detail::rank_vertices(snap, degree);
  auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(landmark_count)) * 5.0));
  order.resize(std::min(k, order.size()));
  return detail::asns_sorted(snap, order);
}

// Greedy count of internally vertex-disjoint paths from landmarks to the
// tier set. Landmarks are taken by ascending ASN; each runs a BFS to its
// nearest tier vertex that avoids interiors of paths already accepted. A
// landmark inside the tier set is a zero-length success.
class DisjointPathScorer {
public:
  DisjointPathScorer(const AsGraphSnapshot& snap, std::span<const Asn> tier_set)
      : snap_(snap), tier_(snap.vertex_count(), 0), seen_(snap.vertex_count(), 0),
        consumed_(snap.vertex_count(), 0), parent_(snap.vertex_count()) {
    if (tier_set.empty()) throw Error("tier set is empty");
    for (Asn a : tier_set) {
      auto i = snap.index_of(a);
      if (i != AsGraphSnapshot::npos) tier_[i] = 1;
    }
  }

  std::size_t score(std::span<const Asn> set) {
    std::vector<std::uint32_t> members = detail::indices_of(snap_, set);
    std::sort(members.begin(), members.end());  // index order == ASN order
    return score_indices(members);
  }

  // `members` must be sorted ascending.
  std::size_t score_indices(std::span<const std::uint32_t> members) {
    ++consume_stamp_;
    std::size_t found = 0;
    for (auto l : members) {
      if (tier_[l]) {
        ++found;
        continue;
      }
      if (consumed_[l] == consume_stamp_) continue;
      if (auto end = nearest_tier(l)) {
        ++found;
        for (auto v = parent_[*end]; v != l; v = parent_[v]) consumed_[v] = consume_stamp_;
      }
    }
    return found;
  }

private:
  std::optional<std::uint32_t> nearest_tier(std::uint32_t src) {
    ++seen_stamp_;
    queue_.clear();
    queue_.push_back(src);
    seen_[src] = seen_stamp_;
    for (std::size_t h = 0; h < queue_.size(); ++h) {
      auto u = queue_[h];
      for (auto w : snap_.neighbors(u)) {
        if (seen_[w] == seen_stamp_) continue;
        seen_[w] = seen_stamp_;
        parent_[w] = u;
        if (tier_[w]) return w;
        if (consumed_[w] == consume_stamp_) continue;
        queue_.push_back(w);
      }
    }
    return std::nullopt;
  }

  const AsGraphSnapshot& snap_;
  std::vector<char> tier_;
  std::vector<std::uint32_t> seen_, consumed_, parent_, queue_;
  std::uint32_t seen_stamp_ = 0, consume_stamp_ = 0;
};

inline std::size_t score_p(const AsGraphSnapshot& snap, std::span<const Asn> set, std::span<const Asn> tier_set) {
  DisjointPathScorer scorer(snap, tier_set);
  return scorer.score(set);
}

// One proposal of the landmark swap chain.
struct McmcStep {
  Asn v = 0;
  Asn w = 0;
  std::size_t c_size = 0;
  std::size_t c_prime_size = 0;
  std::size_t p_current = 0;
  std::size_t p_proposed = 0;
  double acceptance = 0.0;  // A before clamping to 1
  bool accepted = false;
};

// Metropolis-Hastings ratio (P(S')/P(S)) * (|C|/|C'|). A zero-score state
// accepts any move to a positive score and otherwise compares on the
// proposal ratio alone.
inline double acceptance_ratio(std::size_t p_current, std::size_t p_proposed, std::size_t c_size,
                               std::size_t c_prime_size) {
  double q = static_cast<double>(c_size) / static_cast<double>(c_prime_size);
  if (p_current == 0) return p_proposed > 0 ? std::numeric_limits<double>::infinity() : q;
  return static_cast<double>(p_proposed) / static_cast<double>(p_current) * q;
}

struct McmcResult {
  std::vector<Asn> best;  // R, ascending
  std::size_t best_score = 0;
  std::vector<Asn> final_state;
  std::size_t accepted_moves = 0;
};

// Lazy random walk over landmark sets. Each step picks v in S, proposes w
// from C = (N(v) - S) + {v}, and accepts S' = S - {v} + {w} with probability
// min(1, A). The best-scoring state seen is returned.
inline McmcResult mcmc_lazy_walk(const AsGraphSnapshot& snap, std::span<const Asn> initial, std::size_t iters,
                                 std::uint64_t seed, std::span<const Asn> tier_set,
                                 const std::function<void(const McmcStep&)>& observer = {}) {
  if (initial.size() < 2) throw Error("landmark set needs at least 2 members");
  std::vector<std::uint32_t> state = detail::indices_of(snap, initial);
  std::sort(state.begin(), state.end());
  if (std::adjacent_find(state.begin(), state.end()) != state.end()) throw Error("duplicate landmark in initial set");
  std::vector<char> in_set(snap.vertex_count(), 0);
  for (auto i : state) in_set[i] = 1;

  DisjointPathScorer scorer(snap, tier_set);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t p_state = scorer.score_indices(state);
  McmcResult res;
  auto best = state;
  res.best_score = p_state;
  std::vector<std::uint32_t> cand, proposed;

  auto outside_neighbors = [&](std::uint32_t u) {
    std::size_t n = 0;
    for (auto w : snap.neighbors(u)) n += !in_set[w];
    return n;
  };

  for (std::size_t it = 0; it < iters; ++it) {
    auto v = state[detail::uniform_index(rng, state.size())];
    cand.clear();
    for (auto w : snap.neighbors(v))
      if (!in_set[w]) cand.push_back(w);
    cand.push_back(v);
    auto w = cand[detail::uniform_index(rng, cand.size())];
    std::size_t c_prime = w == v ? cand.size() : outside_neighbors(w) + 1;
    double alpha = unit(rng);

    McmcStep step{snap.asn_at(v), snap.asn_at(w), cand.size(), c_prime, p_state, p_state, 1.0, false};
    if (w != v) {
      proposed = state;
      *std::find(proposed.begin(), proposed.end(), v) = w;
      std::sort(proposed.begin(), proposed.end());
      step.p_proposed = scorer.score_indices(proposed);
      step.acceptance = acceptance_ratio(p_state, step.p_proposed, cand.size(), c_prime);
    }
    step.accepted = alpha < step.acceptance;
    if (step.accepted && w != v) {
      in_set[v] = 0;
      in_set[w] = 1;
      state.swap(proposed);
      p_state = step.p_proposed;
      ++res.accepted_moves;
      if (p_state > res.best_score) {
        res.best_score = p_state;
        best = state;
      }
    }
    if (observer) observer(step);
  }
  res.best = detail::asns_sorted(snap, best);
  res.final_state = detail::asns_sorted(snap, state);
  return res;
}

// Per-vertex triangle counts.
inline std::vector<std::uint64_t> triangle_counts(const AsGraphSnapshot& snap) {
  std::vector<std::uint64_t> tri(snap.vertex_count(), 0);
  for (std::uint32_t u = 0; u < snap.vertex_count(); ++u) {
    auto nu = snap.neighbors(u);
    for (auto v : nu) {
      if (v <= u) continue;
      auto nv = snap.neighbors(v);
      for (std::size_t a = 0, b = 0; a < nu.size() && b < nv.size();) {
        if (nu[a] < nv[b]) ++a;
        else if (nu[a] > nv[b]) ++b;
        else {
          if (nu[a] > v) {  // count each triangle u < v < w once
            ++tri[u];
            ++tri[v];
            ++tri[nu[a]];
          }
          ++a;
          ++b;
        }
      }
    }
  }
  return tri;
}

// Brandes betweenness accumulated from a seeded sample of BFS sources
// (every vertex when there are no more than `samples`).
inline std::vector<double> approx_betweenness(const AsGraphSnapshot& snap, std::size_t samples, std::uint64_t seed) {
  const auto n = snap.vertex_count();
  std::vector<std::uint32_t> sources(n);
  for (std::uint32_t i = 0; i < n; ++i) sources[i] = i;
  if (n > samples) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < samples; ++i) std::swap(sources[i], sources[i + detail::uniform_index(rng, n - i)]);
    sources.resize(samples);
  }
  std::vector<double> bc(n, 0.0), delta(n), sigma(n);
  std::vector<std::int64_t> dist(n);
  std::vector<std::uint32_t> order;
  for (auto s : sources) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    order.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    order.push_back(s);
    for (std::size_t h = 0; h < order.size(); ++h) {
      auto u = order[h];
      for (auto w : snap.neighbors(u)) {
        if (dist[w] < 0) {
          dist[w] = dist[u] + 1;
          order.push_back(w);
        }
        if (dist[w] == dist[u] + 1) sigma[w] += sigma[u];
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      auto w = *it;
      for (auto u : snap.neighbors(w))
        if (dist[u] == dist[w] - 1) delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
      if (w != s) bc[w] += delta[w];
    }
  }
  return bc;
}

struct SelectOptions {
  std::size_t count = 20;
  std::uint64_t seed = 0;
  std::size_t iters = 35000;
  std::vector<Asn> tier_set;        // empty: default_tier_set
  std::optional<Asn> collector;     // start of random-walk-collector; default: highest degree
  std::size_t betweenness_samples = 256;
};

namespace detail {

inline std::vector<std::uint32_t> random_members(const AsGraphSnapshot& snap, std::size_t count, std::mt19937_64& rng) {
  const auto n = snap.vertex_count();
  std::vector<std::uint32_t> all(n);
  for (std::uint32_t i = 0; i < n; ++i) all[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + uniform_index(rng, n - i)]);
  all.resize(count);
  return all;
}

// Distinct vertices in order of first visit by a simple random walk. A walk
// stuck in a small component restarts from an unvisited vertex.
inline std::vector<std::uint32_t> walk_members(const AsGraphSnapshot& snap, std::size_t count, std::uint32_t start,
                                               std::mt19937_64& rng) {
  std::vector<char> seen(snap.vertex_count(), 0);
  std::vector<std::uint32_t> out{start};
  seen[start] = 1;
  auto cur = start;
  std::size_t idle = 0;
  const std::size_t idle_limit = 50 * snap.vertex_count() + 1000;
  while (out.size() < count) {
    auto nb = snap.neighbors(cur);
    if (nb.empty() || idle > idle_limit) {
      std::vector<std::uint32_t> fresh;
      for (std::uint32_t i = 0; i < snap.vertex_count(); ++i)
        if (!seen[i]) fresh.push_back(i);
      cur = fresh[uniform_index(rng, fresh.size())];
      idle = 0;
    } else {
      cur = nb[uniform_index(rng, nb.size())];
      ++idle;
    }
    if (!seen[cur]) {
      seen[cur] = 1;
      out.push_back(cur);
      idle = 0;
    }
  }
  return out;
}

}  // namespace detail

inline LandmarkSet select_landmarks(const AsGraphSnapshot& snap, LandmarkMethod method, const SelectOptions& opts) {
  if (opts.count < 2) throw Error("need at least 2 landmarks");
  if (opts.count > snap.vertex_count())
    throw Error("cannot pick " + std::to_string(opts.count) + " landmarks from " +
                std::to_string(snap.vertex_count()) + " vertices");
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> degree(snap.vertex_count());
  for (std::uint32_t i = 0; i < degree.size(); ++i) degree[i] = snap.degree(i);
  auto top = [&](auto order) {
    order.resize(opts.count);
    return detail::asns_sorted(snap, order);
  };
  auto tiers = opts.tier_set.empty() ? default_tier_set(snap, opts.count) : opts.tier_set;

  LandmarkSet ls;
  ls.method = method;
  ls.seed = opts.seed;
  switch (method) {
    case LandmarkMethod::Random:
      ls.members = detail::asns_sorted(snap, detail::random_members(snap, opts.count, rng));
      break;
    case LandmarkMethod::TopDegree:
      ls.members = top(detail::rank_vertices(snap, degree));
      break;
    case LandmarkMethod::TopCentrality:
      ls.members = top(detail::rank_vertices(snap, approx_betweenness(snap, opts.betweenness_samples, opts.seed)));
      break;
    case LandmarkMethod::TopTriangles:
      ls.members = top(detail::rank_vertices(snap, triangle_counts(snap)));
      break;
    case LandmarkMethod::TierMix: {
      // Tier set ranked by degree; first half stands for tier 1, the rest
      // for tier 2, interleaved. Top-degree vertices pad a short list.
      std::vector<std::uint32_t> ranked;
      for (Asn a : tiers)
        if (auto i = snap.index_of(a); i != AsGraphSnapshot::npos) ranked.push_back(i);
      std::stable_sort(ranked.begin(), ranked.end(), [&](auto l, auto r) { return degree[l] > degree[r]; });
      const std::size_t half = (ranked.size() + 1) / 2;
      std::vector<std::uint32_t> mixed;
      for (std::size_t k = 0; k < half; ++k) {
        mixed.push_back(ranked[k]);
        if (half + k < ranked.size()) mixed.push_back(ranked[half + k]);
      }
      std::vector<char> used(snap.vertex_count(), 0);
      for (auto i : mixed) used[i] = 1;
      for (auto i : detail::rank_vertices(snap, degree))
        if (mixed.size() < opts.count && !used[i]) mixed.push_back(i);
      ls.members = top(mixed);
      break;
    }
    case LandmarkMethod::RandomWalk: {
      auto start = static_cast<std::uint32_t>(detail::uniform_index(rng, snap.vertex_count()));
      ls.members = detail::asns_sorted(snap, detail::walk_members(snap, opts.count, start, rng));
      break;
    }
    case LandmarkMethod::RandomWalkFromCollector: {
      auto start = opts.collector ? snap.require_index(*opts.collector) : detail::rank_vertices(snap, degree).front();
      ls.members = detail::asns_sorted(snap, detail::walk_members(snap, opts.count, start, rng));
      break;
    }
    case LandmarkMethod::LazyWalk: {
      auto initial = detail::asns_sorted(snap, detail::random_members(snap, opts.count, rng));
      ls.members = mcmc_lazy_walk(snap, initial, opts.iters, rng(), tiers).best;
      break;
    }
  }
  bool any_edge = false;
  for (Asn a : ls.members) any_edge |= snap.degree(snap.index_of(a)) > 0;
  ls.s1 = any_edge ? score_s1(snap, ls.members) : 0.0;
  ls.s2 = score_s2(snap, ls.members).value;
  return ls;
}

}  // namespace ricci_mon
