#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ricci_mon {

using Asn = std::uint32_t;
using Timestamp = std::int64_t;

// Base of every error this library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AsVertex {
  Asn asn = 0;
  Timestamp ctime = 0;
  std::uint64_t prefix_count = 0;

  friend bool operator==(const AsVertex&, const AsVertex&) = default;
};

// Undirected link, stored with a < b.
struct AsEdge {
  Asn a = 0;
  Asn b = 0;
  std::uint64_t count = 0;

  friend bool operator==(const AsEdge&, const AsEdge&) = default;
};

inline std::pair<Asn, Asn> edge_key(Asn a, Asn b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

class AsGraphSnapshot;

// Mutable AS-level graph. Single writer; readers take snapshots.
class AsGraph {
public:
  struct VertexState {
    Timestamp ctime = 0;
    std::uint64_t prefix_count = 0;
  };

  bool has_vertex(Asn asn) const { return vertices_.contains(asn); }
  bool has_edge(Asn a, Asn b) const { return edges_.contains(edge_key(a, b)); }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const VertexState* vertex(Asn asn) const {
    auto it = vertices_.find(asn);
    return it == vertices_.end() ? nullptr : &it->second;
  }

  std::optional<std::uint64_t> edge_count(Asn a, Asn b) const {
    auto it = edges_.find(edge_key(a, b));
    if (it == edges_.end()) return std::nullopt;
    return it->second;
  }

  // Creates the vertex if needed; ctime never moves backwards.
  VertexState& touch(Asn asn, Timestamp t) {
    if (asn == 0) throw Error("AS number 0 is reserved");
    auto& v = vertices_[asn];
    v.ctime = std::max(v.ctime, t);
    return v;
  }

  void ensure_edge(Asn a, Asn b) {
    check_pair(a, b);
    edges_.try_emplace(edge_key(a, b), 0);
  }

  // Adds a signed delta to the edge count. The edge is created on demand and
  // dropped once its count reaches zero through a decrement.
  void add_edge_count(Asn a, Asn b, std::int64_t delta) {
    check_pair(a, b);
    auto key = edge_key(a, b);
    auto it = edges_.find(key);
    if (delta >= 0) {
      if (it == edges_.end()) it = edges_.emplace(key, 0).first;
      it->second += static_cast<std::uint64_t>(delta);
      return;
    }
    const auto dec = static_cast<std::uint64_t>(-delta);
    if (it == edges_.end() || it->second < dec)
      throw Error("edge count underflow on " + std::to_string(key.first) + "-" +
                  std::to_string(key.second));
    it->second -= dec;
    if (it->second == 0) edges_.erase(it);
  }

  void adjust_prefix_count(Asn asn, std::int64_t delta) {
    auto it = vertices_.find(asn);
    if (it == vertices_.end()) throw Error("unknown AS " + std::to_string(asn));
    if (delta < 0 && it->second.prefix_count < static_cast<std::uint64_t>(-delta))
      throw Error("prefix count underflow on AS " + std::to_string(asn));
    it->second.prefix_count = static_cast<std::uint64_t>(
        static_cast<std::int64_t>(it->second.prefix_count) + delta);
  }

  const std::map<Asn, VertexState>& vertices() const { return vertices_; }
  const std::map<std::pair<Asn, Asn>, std::uint64_t>& edges() const { return edges_; }

  AsGraphSnapshot snapshot(Timestamp t, std::uint64_t seq) const;

private:
  static void check_pair(Asn a, Asn b) {
    if (a == 0 || b == 0) throw Error("AS number 0 is reserved");
    if (a == b) throw Error("self-loop on AS " + std::to_string(a));
  }

  std::map<Asn, VertexState> vertices_;
  std::map<std::pair<Asn, Asn>, std::uint64_t> edges_;
};

// Immutable timestamped copy of the graph with a CSR adjacency for traversal.
// Vertex indices follow ascending ASN order.
class AsGraphSnapshot {
public:
  static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

  AsGraphSnapshot() = default;

  // Validates and sorts; throws Error on a dangling endpoint, a self-loop or a
  // duplicate vertex/edge.
  AsGraphSnapshot(Timestamp t, std::uint64_t seq, std::vector<AsVertex> vertices,
                  std::vector<AsEdge> edges)
      : t_(t), seq_(seq), vertices_(std::move(vertices)), edges_(std::move(edges)) {
    std::sort(vertices_.begin(), vertices_.end(),
              [](const AsVertex& l, const AsVertex& r) { return l.asn < r.asn; });
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      if (vertices_[i].asn == 0) throw Error("vertex with AS number 0");
      if (i > 0 && vertices_[i - 1].asn == vertices_[i].asn)
        throw Error("duplicate vertex " + std::to_string(vertices_[i].asn));
    }
    for (auto& e : edges_) {
      if (e.a == e.b) throw Error("self-loop on AS " + std::to_string(e.a));
      if (e.a > e.b) std::swap(e.a, e.b);
    }
    std::sort(edges_.begin(), edges_.end(), [](const AsEdge& l, const AsEdge& r) {
      return std::pair{l.a, l.b} < std::pair{r.a, r.b};
    });
    for (std::size_t i = 1; i < edges_.size(); ++i)
      if (edges_[i - 1].a == edges_[i].a && edges_[i - 1].b == edges_[i].b)
        throw Error("duplicate edge " + std::to_string(edges_[i].a) + "-" +
                    std::to_string(edges_[i].b));
    build_adjacency();
  }

  Timestamp t() const { return t_; }
  std::uint64_t seq() const { return seq_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const AsVertex> vertices() const { return vertices_; }
  std::span<const AsEdge> edges() const { return edges_; }

  std::uint32_t index_of(Asn asn) const {
    auto it = std::lower_bound(vertices_.begin(), vertices_.end(), asn,
                               [](const AsVertex& v, Asn a) { return v.asn < a; });
    if (it == vertices_.end() || it->asn != asn) return npos;
    return static_cast<std::uint32_t>(it - vertices_.begin());
  }
  bool contains(Asn asn) const { return index_of(asn) != npos; }

  std::uint32_t require_index(Asn asn) const {
    auto idx = index_of(asn);
    if (idx == npos) throw Error("AS " + std::to_string(asn) + " not in snapshot " +
                                 std::to_string(seq_));
    return idx;
  }

  const AsVertex& vertex_at(std::uint32_t idx) const { return vertices_[idx]; }
  Asn asn_at(std::uint32_t idx) const { return vertices_[idx].asn; }

  // Neighbor indices in ascending ASN order, with parallel link counts.
  std::span<const std::uint32_t> neighbors(std::uint32_t idx) const {
    return {adj_.data() + offsets_[idx], adj_.data() + offsets_[idx + 1]};
  }
  std::span<const std::uint64_t> neighbor_counts(std::uint32_t idx) const {
    return {adj_count_.data() + offsets_[idx], adj_count_.data() + offsets_[idx + 1]};
  }
  std::size_t degree(std::uint32_t idx) const { return offsets_[idx + 1] - offsets_[idx]; }

  // Equal vertex and edge content; t and seq are ignored.
  bool same_structure(const AsGraphSnapshot& o) const {
    return vertices_ == o.vertices_ && edges_ == o.edges_;
  }

  friend bool operator==(const AsGraphSnapshot& l, const AsGraphSnapshot& r) {
    return l.t_ == r.t_ && l.seq_ == r.seq_ && l.same_structure(r);
  }

private:
  void build_adjacency() {
    const auto n = vertices_.size();
    offsets_.assign(n + 1, 0);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ends(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      auto ia = index_of(edges_[i].a), ib = index_of(edges_[i].b);
      if (ia == npos || ib == npos)
        throw Error("edge " + std::to_string(edges_[i].a) + "-" + std::to_string(edges_[i].b) +
                    " references a missing vertex");
      ends[i] = {ia, ib};
      ++offsets_[ia + 1];
      ++offsets_[ib + 1];
    }
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
    adj_.resize(offsets_[n]);
    adj_count_.resize(offsets_[n]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      auto [ia, ib] = ends[i];
      adj_[fill[ia]] = ib;
      adj_count_[fill[ia]++] = edges_[i].count;
      adj_[fill[ib]] = ia;
      adj_count_[fill[ib]++] = edges_[i].count;
    }
    // Edges are sorted by (a,b), so a vertex's higher neighbors arrive sorted
    // but its lower neighbors are interleaved; sort each row once.
    std::vector<std::pair<std::uint32_t, std::uint64_t>> row;
    for (std::size_t v = 0; v < n; ++v) {
      row.clear();
      for (auto k = offsets_[v]; k < offsets_[v + 1]; ++k) row.emplace_back(adj_[k], adj_count_[k]);
      std::sort(row.begin(), row.end());
      for (std::size_t k = 0; k < row.size(); ++k) {
        adj_[offsets_[v] + k] = row[k].first;
        adj_count_[offsets_[v] + k] = row[k].second;
      }
    }
  }

  Timestamp t_ = 0;
  std::uint64_t seq_ = 0;
  std::vector<AsVertex> vertices_;
  std::vector<AsEdge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> adj_;
  std::vector<std::uint64_t> adj_count_;
};

using SnapshotPtr = std::shared_ptr<const AsGraphSnapshot>;

inline AsGraphSnapshot AsGraph::snapshot(Timestamp t, std::uint64_t seq) const {
  std::vector<AsVertex> vs;
  vs.reserve(vertices_.size());
  for (const auto& [asn, st] : vertices_) vs.push_back({asn, st.ctime, st.prefix_count});
  std::vector<AsEdge> es;
  es.reserve(edges_.size());
  for (const auto& [key, count] : edges_) es.push_back({key.first, key.second, count});
  return AsGraphSnapshot(t, seq, std::move(vs), std::move(es));
}

inline std::vector<Asn> dedup_path(std::span<const Asn> path) {
  std::vector<Asn> out;
  out.reserve(path.size());
  for (Asn a : path)
    if (out.empty() || out.back() != a) out.push_back(a);
  return out;
}

// Records an observed AS path: vertices and consecutive-pair links are created
// and every AS on the path gets ctime = t. Prepending is collapsed first.
// Returns the touched ASNs in path order.
inline std::vector<Asn> upsert_path(AsGraph& graph, std::span<const Asn> as_path, Timestamp t) {
  auto path = dedup_path(as_path);
  if (path.empty()) throw Error("empty AS path");
  for (Asn a : path)
    if (a == 0) throw Error("AS path contains AS number 0");
  for (Asn a : path) graph.touch(a, t);
  for (std::size_t i = 1; i < path.size(); ++i) graph.ensure_edge(path[i - 1], path[i]);
  return path;
}

// ASes touched at or after t0, ascending.
inline std::vector<Asn> changed_since(const AsGraphSnapshot& snap, Timestamp t0) {
  std::vector<Asn> out;
  for (const auto& v : snap.vertices())
    if (v.ctime >= t0) out.push_back(v.asn);
  return out;
}

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

// Full unweighted BFS from a vertex index; kUnreachable marks other components.
inline std::vector<std::uint32_t> bfs_all(const AsGraphSnapshot& snap, std::uint32_t src) {
  std::vector<std::uint32_t> dist(snap.vertex_count(), kUnreachable);
  std::vector<std::uint32_t> queue;
  queue.reserve(snap.vertex_count());
  dist[src] = 0;
  queue.push_back(src);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    auto u = queue[head];
    for (auto w : snap.neighbors(u)) {
      if (dist[w] != kUnreachable) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }
  return dist;
}

// Hop distances from src to the requested targets. Unreachable targets (and
// targets missing from the snapshot) are absent from the result. Stops as
// soon as every target is resolved.
inline std::map<Asn, std::uint32_t> hop_distances(const AsGraphSnapshot& snap, Asn src,
                                                  std::span<const Asn> targets) {
  auto s = snap.require_index(src);
  std::vector<char> wanted(snap.vertex_count(), 0);
  std::size_t remaining = 0;
  for (Asn a : targets) {
    auto idx = snap.index_of(a);
    if (idx != AsGraphSnapshot::npos && !wanted[idx]) {
      wanted[idx] = 1;
      ++remaining;
    }
  }
  std::map<Asn, std::uint32_t> out;
  if (remaining == 0) return out;
  std::vector<std::uint32_t> dist(snap.vertex_count(), kUnreachable);
  std::vector<std::uint32_t> queue{s};
  dist[s] = 0;
  for (std::size_t head = 0; head < queue.size() && remaining > 0; ++head) {
    auto u = queue[head];
    if (wanted[u]) {
      out.emplace(snap.asn_at(u), dist[u]);
      --remaining;
    }
    for (auto w : snap.neighbors(u)) {
      if (dist[w] != kUnreachable) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }
  return out;
}

}  // namespace ricci_mon
