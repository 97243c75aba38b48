#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "ricci_mon/graph.hpp"
#include "ricci_mon/ot.hpp"
#include "ricci_mon/parallel.hpp"

namespace ricci_mon {

enum class OtSolver { Exact, Approx };

// Time spent in transport solves, summed over worker threads.
struct OtTimer {
  std::atomic<std::int64_t> nanos{0};
  std::atomic<std::int64_t> solves{0};
  double seconds() const { return static_cast<double>(nanos.load()) * 1e-9; }
};

struct CurvatureOptions {
  double alpha = 0.5;  // mass kept on the center vertex
  OtSolver solver = OtSolver::Exact;
  SinkhornOptions sinkhorn{};
  unsigned threads = 1;
  OtTimer* timer = nullptr;
};

// Mass alpha on x, the rest split across neighbors in proportion to link
// counts (uniformly when every count is zero). Isolated x keeps all mass.
// Support order: x (when alpha > 0), then neighbors by ascending ASN.
inline MassDistribution mass_distribution(const AsGraphSnapshot& snap, Asn x, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must lie in [0, 1]");
  auto ix = snap.require_index(x);
  MassDistribution mu;
  auto nbrs = snap.neighbors(ix);
  auto counts = snap.neighbor_counts(ix);
  if (nbrs.empty()) {
    mu.support = {x};
    mu.mass = {1.0};
    return mu;
  }
  if (alpha > 0.0) {
    mu.support.push_back(x);
    mu.mass.push_back(alpha);
  }
  if (alpha == 1.0) return mu;
  long double total = 0;
  for (auto c : counts) total += static_cast<long double>(c);
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    double share = total > 0 ? static_cast<double>(static_cast<long double>(counts[k]) / total)
                             : 1.0 / static_cast<double>(nbrs.size());
    if (share == 0.0) continue;
    mu.support.push_back(snap.asn_at(nbrs[k]));
    mu.mass.push_back((1.0 - alpha) * share);
  }
  return mu;
}

// LRU cache of full BFS distance vectors for one snapshot. Thread-safe.
class DistanceCache {
public:
  using Distances = std::shared_ptr<const std::vector<std::uint32_t>>;

  explicit DistanceCache(SnapshotPtr snap, std::size_t capacity = 100000)
      : snap_(std::move(snap)), capacity_(std::max<std::size_t>(capacity, 1)) {}

  const AsGraphSnapshot& snapshot() const { return *snap_; }
  const SnapshotPtr& snapshot_ptr() const { return snap_; }

  Distances from(std::uint32_t idx) {
    {
      std::lock_guard lock(mu_);
      auto it = index_.find(idx);
      if (it != index_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second);
        ++hits_;
        return it->second->second;
      }
    }
    auto t0 = std::chrono::steady_clock::now();
    auto dist = std::make_shared<const std::vector<std::uint32_t>>(bfs_all(*snap_, idx));
    auto spent = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0);
    std::lock_guard lock(mu_);
    ++misses_;
    bfs_nanos_ += spent.count();
    if (auto it = index_.find(idx); it != index_.end()) return it->second->second;
    lru_.emplace_front(idx, dist);
    index_[idx] = lru_.begin();
    if (lru_.size() > capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    return dist;
  }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  double bfs_seconds() const { return static_cast<double>(bfs_nanos_) * 1e-9; }

private:
  SnapshotPtr snap_;
  std::size_t capacity_;
  std::mutex mu_;
  std::list<std::pair<std::uint32_t, Distances>> lru_;
  std::unordered_map<std::uint32_t, std::list<std::pair<std::uint32_t, Distances>>::iterator> index_;
  std::size_t hits_ = 0, misses_ = 0;
  std::int64_t bfs_nanos_ = 0;
};

namespace detail {

// Support-to-support hop distances, filled column by column from BFS runs
// rooted at the target support. nullopt when the supports are disconnected.
inline std::optional<Matrix> support_distances(DistanceCache& cache, const MassDistribution& mu,
                                               const MassDistribution& nu) {
  const auto& snap = cache.snapshot();
  std::vector<std::uint32_t> rows(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) rows[i] = snap.require_index(mu.support[i]);
  Matrix d(static_cast<Eigen::Index>(mu.size()), static_cast<Eigen::Index>(nu.size()));
  for (std::size_t j = 0; j < nu.size(); ++j) {
    auto dist = cache.from(snap.require_index(nu.support[j]));
    for (std::size_t i = 0; i < mu.size(); ++i) {
      auto h = (*dist)[rows[i]];
      if (h == kUnreachable) return std::nullopt;
      d(i, j) = h;
    }
  }
  return d;
}

inline TransportPlan solve_transport(const MassDistribution& mu, const MassDistribution& nu, const Matrix& d,
                                     const CurvatureOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  auto plan = opts.solver == OtSolver::Exact ? exact_ot(mu, nu, d) : sinkhorn_ot(mu, nu, d, opts.sinkhorn).transport;
  if (opts.timer) {
    opts.timer->nanos += std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    ++opts.timer->solves;
  }
  return plan;
}

}  // namespace detail

// Ollivier-Ricci curvature 1 - W(mu_x, mu_y) / d(x, y) under the hop metric.
// nullopt when x and y lie in different components.
inline std::optional<double> ricci_curvature(DistanceCache& cache, Asn x, Asn y, const CurvatureOptions& opts) {
  if (x == y) throw Error("curvature needs two distinct vertices");
  const auto& snap = cache.snapshot();
  auto ix = snap.require_index(x);
  auto dxy = (*cache.from(snap.require_index(y)))[ix];
  if (dxy == kUnreachable) return std::nullopt;
  auto mu = mass_distribution(snap, x, opts.alpha);
  auto nu = mass_distribution(snap, y, opts.alpha);
  auto d = detail::support_distances(cache, mu, nu);
  if (!d) return std::nullopt;
  return 1.0 - detail::solve_transport(mu, nu, *d, opts).cost / static_cast<double>(dxy);
}

inline std::optional<double> ricci_curvature(const SnapshotPtr& snap, Asn x, Asn y, const CurvatureOptions& opts) {
  DistanceCache cache(snap);
  return ricci_curvature(cache, x, y, opts);
}

// Optimal plan between mu_x and mu_y; throws when x and y are disconnected.
inline TransportPlan transport_plan(DistanceCache& cache, Asn x, Asn y, const CurvatureOptions& opts) {
  const auto& snap = cache.snapshot();
  auto mu = mass_distribution(snap, x, opts.alpha);
  auto nu = mass_distribution(snap, y, opts.alpha);
  auto d = detail::support_distances(cache, mu, nu);
  if (!d)
    throw Error("AS " + std::to_string(x) + " and AS " + std::to_string(y) + " are disconnected in snapshot " +
                std::to_string(snap.seq()));
  return detail::solve_transport(mu, nu, *d, opts);
}

// Changed ASes x landmarks. Undefined cells hold 0 with defined == 0.
struct CurvatureMatrix {
  std::uint64_t seq = 0;
  std::vector<Asn> row_asns;
  std::vector<Asn> col_landmarks;
  Matrix values;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> defined;

  std::size_t rows() const { return row_asns.size(); }
  std::size_t cols() const { return col_landmarks.size(); }
};

struct DeltaMatrix {
  std::uint64_t seq = 0;
  Timestamp t = 0;
  std::vector<Asn> row_asns;
  std::vector<Asn> col_landmarks;
  Matrix values;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> defined;

  std::size_t m() const { return row_asns.size(); }
  std::size_t cols() const { return col_landmarks.size(); }
};

inline constexpr double kRangeSlack = 1e-9;

// values(i, j) = kappa(rows[i], landmarks[j]). A row equal to its column's
// landmark, a landmark or row missing from the snapshot, and disconnected
// pairs are undefined.
inline CurvatureMatrix build_curvature_rows(DistanceCache& cache, std::span<const Asn> rows,
                                            std::span<const Asn> landmarks, const CurvatureOptions& opts) {
  const auto& snap = cache.snapshot();
  CurvatureMatrix cm;
  cm.seq = snap.seq();
  cm.row_asns.assign(rows.begin(), rows.end());
  cm.col_landmarks.assign(landmarks.begin(), landmarks.end());
  const auto m = static_cast<Eigen::Index>(rows.size()), l = static_cast<Eigen::Index>(landmarks.size());
  cm.values = Matrix::Zero(m, l);
  cm.defined = decltype(cm.defined)::Zero(m, l);
  if (m == 0 || l == 0) return cm;

  std::vector<std::optional<MassDistribution>> col_mass(landmarks.size());
  for (std::size_t j = 0; j < landmarks.size(); ++j)
    if (snap.contains(landmarks[j])) col_mass[j] = mass_distribution(snap, landmarks[j], opts.alpha);

  const double lo = (opts.alpha >= 0.5 && opts.solver == OtSolver::Exact) ? -1.0 : -2.0;
  parallel_for(rows.size(), opts.threads, [&](std::size_t i) {
    if (!snap.contains(rows[i])) return;
    auto mu = mass_distribution(snap, rows[i], opts.alpha);
    auto ix = snap.index_of(rows[i]);
    for (std::size_t j = 0; j < landmarks.size(); ++j) {
      if (rows[i] == landmarks[j] || !col_mass[j]) continue;
      auto dxy = (*cache.from(snap.index_of(landmarks[j])))[ix];
      if (dxy == kUnreachable) continue;
      auto d = detail::support_distances(cache, mu, *col_mass[j]);
      if (!d) continue;
      double kappa = 1.0 - detail::solve_transport(mu, *col_mass[j], *d, opts).cost / static_cast<double>(dxy);
      if (opts.solver == OtSolver::Exact && (kappa < lo - kRangeSlack || kappa > 1.0 + kRangeSlack))
        throw Error("curvature " + std::to_string(kappa) + " out of range for AS " + std::to_string(rows[i]) +
                    " to landmark " + std::to_string(landmarks[j]));
      cm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kappa;
      cm.defined(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1;
    }
  });
  return cm;
}

inline CurvatureMatrix build_curvature_rows(const SnapshotPtr& snap, std::span<const Asn> rows,
                                            std::span<const Asn> landmarks, const CurvatureOptions& opts) {
  DistanceCache cache(snap);
  return build_curvature_rows(cache, rows, landmarks, opts);
}

// Delta = current - previous over the current matrix's rows. A row absent
// from `previous` counts as a defined prior curvature of 0; a cell is
// defined only when both sides are.
inline DeltaMatrix delta_from_matrices(const CurvatureMatrix& current, const CurvatureMatrix& previous,
                                       Timestamp t = 0) {
  if (current.col_landmarks != previous.col_landmarks) throw Error("mismatched landmark sets");
  DeltaMatrix dm;
  dm.seq = current.seq;
  dm.t = t;
  dm.row_asns = current.row_asns;
  dm.col_landmarks = current.col_landmarks;
  const auto m = static_cast<Eigen::Index>(current.rows()), l = static_cast<Eigen::Index>(current.cols());
  dm.values = Matrix::Zero(m, l);
  dm.defined = decltype(dm.defined)::Zero(m, l);
  std::unordered_map<Asn, Eigen::Index> prev_row;
  for (std::size_t i = 0; i < previous.rows(); ++i) prev_row[previous.row_asns[i]] = static_cast<Eigen::Index>(i);
  for (Eigen::Index i = 0; i < m; ++i) {
    auto it = prev_row.find(current.row_asns[i]);
    for (Eigen::Index j = 0; j < l; ++j) {
      if (!current.defined(i, j)) continue;
      double before = 0.0;
      if (it != prev_row.end()) {
        if (!previous.defined(it->second, j)) continue;
        before = previous.values(it->second, j);
      }
      dm.values(i, j) = current.values(i, j) - before;
      dm.defined(i, j) = 1;
    }
  }
  return dm;
}

// Rows are the ASes touched since the previous snapshot; both matrices are
// evaluated over those rows. Rows that did not exist before have no prior
// row and so take a prior curvature of 0.
inline DeltaMatrix delta(DistanceCache& current, DistanceCache& previous, std::span<const Asn> landmarks,
                         const CurvatureOptions& opts, CurvatureMatrix* current_out = nullptr,
                         CurvatureMatrix* previous_out = nullptr) {
  const auto& k = current.snapshot();
  const auto& km1 = previous.snapshot();
  if (km1.seq() + 1 != k.seq())
    throw Error("delta needs consecutive snapshots, got seq " + std::to_string(km1.seq()) + " and " +
                std::to_string(k.seq()));
  auto rows = changed_since(k, km1.t());
  std::vector<Asn> prev_rows;
  for (Asn a : rows)
    if (km1.contains(a)) prev_rows.push_back(a);
  auto ck = build_curvature_rows(current, rows, landmarks, opts);
  auto ckm1 = build_curvature_rows(previous, prev_rows, landmarks, opts);
  auto dm = delta_from_matrices(ck, ckm1, k.t());
  if (current_out) *current_out = std::move(ck);
  if (previous_out) *previous_out = std::move(ckm1);
  return dm;
}

inline DeltaMatrix delta(const SnapshotPtr& snap_k, const SnapshotPtr& snap_km1, std::span<const Asn> landmarks,
                         const CurvatureOptions& opts) {
  DistanceCache ck(snap_k), ckm1(snap_km1);
  return delta(ck, ckm1, landmarks, opts);
}

// Long-form CSV: row_asn,landmark_asn,kappa,defined
template <typename M>
void write_matrix_csv(std::ostream& out, const M& mat) {
  out << "row_asn,landmark_asn,kappa,defined\n";
  out.precision(17);
  for (std::size_t i = 0; i < mat.row_asns.size(); ++i)
    for (std::size_t j = 0; j < mat.col_landmarks.size(); ++j) {
      auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      out << mat.row_asns[i] << ',' << mat.col_landmarks[j] << ',' << mat.values(ii, jj) << ','
          << (mat.defined(ii, jj) ? 1 : 0) << '\n';
    }
}

template <typename M>
nlohmann::ordered_json matrix_to_json(const M& mat) {
  nlohmann::ordered_json j;
  j["seq"] = mat.seq;
  j["rows"] = mat.row_asns;
  j["landmarks"] = mat.col_landmarks;
  j["values"] = nlohmann::ordered_json::array();
  j["defined"] = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < mat.values.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(mat.values.cols()));
    std::vector<int> def(row.size());
    for (Eigen::Index c = 0; c < mat.values.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = mat.values(i, c);
      def[static_cast<std::size_t>(c)] = mat.defined(i, c);
    }
    j["values"].push_back(row);
    j["defined"].push_back(def);
  }
  return j;
}

inline DeltaMatrix delta_from_json(const nlohmann::json& j) {
  DeltaMatrix dm;
  try {
    dm.seq = j.at("seq").get<std::uint64_t>();
    if (j.contains("t")) dm.t = j.at("t").get<Timestamp>();
    dm.row_asns = j.at("rows").get<std::vector<Asn>>();
    dm.col_landmarks = j.at("landmarks").get<std::vector<Asn>>();
    const auto m = static_cast<Eigen::Index>(dm.row_asns.size()), l = static_cast<Eigen::Index>(dm.col_landmarks.size());
    dm.values = Matrix::Zero(m, l);
    dm.defined = decltype(dm.defined)::Zero(m, l);
    const auto& vals = j.at("values");
    const auto& def = j.at("defined");
    if (static_cast<Eigen::Index>(vals.size()) != m || static_cast<Eigen::Index>(def.size()) != m)
      throw Error("row count mismatch");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (static_cast<Eigen::Index>(vals[i].size()) != l || static_cast<Eigen::Index>(def[i].size()) != l)
        throw Error("column count mismatch in row " + std::to_string(i));
      for (Eigen::Index c = 0; c < l; ++c) {
        dm.values(i, c) = vals[i][c].get<double>();
        dm.defined(i, c) = def[i][c].get<int>() ? 1 : 0;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("delta JSON: ") + e.what());
  }
  return dm;
}

}  // namespace ricci_mon
