#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <utility>
#include <vector>

#include "ricci_mon/curvature.hpp"

namespace ricci_mon {

// Rows ranked by sum_j delta_ij^2, ties by ascending ASN.
inline std::vector<std::pair<Asn, double>> top_movers(const DeltaMatrix& delta, std::size_t n) {
  if (n == 0) throw Error("top_movers needs n >= 1");
  std::vector<std::pair<Asn, double>> rows;
  for (std::size_t i = 0; i < delta.m(); ++i)
    rows.emplace_back(delta.row_asns[i], delta.values.row(static_cast<Eigen::Index>(i)).squaredNorm());
  std::sort(rows.begin(), rows.end(), [](const auto& l, const auto& r) {
    if (l.second != r.second) return l.second > r.second;
    return l.first < r.first;
  });
  if (rows.size() > n) rows.resize(n);
  return rows;
}

// Column whose |delta| is largest on the given row; ties to the lower index.
inline Asn worst_landmark(const DeltaMatrix& delta, Asn row) {
  auto it = std::find(delta.row_asns.begin(), delta.row_asns.end(), row);
  if (it == delta.row_asns.end()) throw Error("AS " + std::to_string(row) + " is not a delta row");
  if (delta.cols() == 0) throw Error("delta has no landmark columns");
  auto i = static_cast<Eigen::Index>(it - delta.row_asns.begin());
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < delta.values.cols(); ++j)
    if (std::abs(delta.values(i, j)) > std::abs(delta.values(i, best))) best = j;
  return delta.col_landmarks[static_cast<std::size_t>(best)];
}

struct PlanDiff {
  Asn x = 0;
  Asn y = 0;
  std::vector<Asn> row_labels;  // union of mu_x supports, ascending
  std::vector<Asn> col_labels;  // union of mu_y supports, ascending
  Matrix diff;                  // plan after - plan before
  std::vector<std::pair<Asn, double>> movers;
};

namespace detail {

inline Matrix align_plan(const TransportPlan& tp, const std::vector<Asn>& rows, const std::vector<Asn>& cols) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  auto pos = [](const std::vector<Asn>& labels, Asn a) {
    return static_cast<Eigen::Index>(std::lower_bound(labels.begin(), labels.end(), a) - labels.begin());
  };
  for (std::size_t i = 0; i < tp.rows.size(); ++i)
    for (std::size_t j = 0; j < tp.cols.size(); ++j)
      out(pos(rows, tp.rows[i]), pos(cols, tp.cols[j])) += tp.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

inline TransportPlan plan_in(DistanceCache& cache, Asn x, Asn y, double alpha, const char* which) {
  const auto& snap = cache.snapshot();
  for (Asn a : {x, y})
    if (!snap.contains(a))
      throw Error(std::string("AS ") + std::to_string(a) + " is absent from the " + which + " snapshot (seq " +
                  std::to_string(snap.seq()) + ")");
  CurvatureOptions opts;
  opts.alpha = alpha;
  opts.solver = OtSolver::Exact;
  try {
    return transport_plan(cache, x, y, opts);
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " (" + which + " snapshot)");
  }
}

}  // namespace detail

// Diffs the exact optimal plans between mu_x and mu_y across two snapshots,
// aligned on the union of supports. Movers are the per-row net mass changes,
// ranked by |shift|; on ties gainers come first, then lower ASN.
inline PlanDiff plan_diff(DistanceCache& before, DistanceCache& after, Asn x, Asn y, double alpha) {
  auto p0 = detail::plan_in(before, x, y, alpha, "before");
  auto p1 = detail::plan_in(after, x, y, alpha, "after");
  PlanDiff out;
  out.x = x;
  out.y = y;
  std::set<Asn> rows(p0.rows.begin(), p0.rows.end()), cols(p0.cols.begin(), p0.cols.end());
  rows.insert(p1.rows.begin(), p1.rows.end());
  cols.insert(p1.cols.begin(), p1.cols.end());
  out.row_labels.assign(rows.begin(), rows.end());
  out.col_labels.assign(cols.begin(), cols.end());
  out.diff = detail::align_plan(p1, out.row_labels, out.col_labels) - detail::align_plan(p0, out.row_labels, out.col_labels);
  for (std::size_t i = 0; i < out.row_labels.size(); ++i)
    out.movers.emplace_back(out.row_labels[i], out.diff.row(static_cast<Eigen::Index>(i)).sum());
  std::stable_sort(out.movers.begin(), out.movers.end(), [](const auto& l, const auto& r) {
    double al = std::abs(l.second), ar = std::abs(r.second);
    if (std::abs(al - ar) > 1e-12 * std::max(1.0, std::max(al, ar))) return al > ar;
    if ((l.second > 0) != (r.second > 0)) return l.second > 0;
    return l.first < r.first;
  });
  return out;
}

inline PlanDiff plan_diff(const SnapshotPtr& before, const SnapshotPtr& after, Asn x, Asn y, double alpha) {
  DistanceCache b(before), a(after);
  return plan_diff(b, a, x, y, alpha);
}

// row_label,col_label,value
inline void write_plan_diff_csv(std::ostream& out, const PlanDiff& pd) {
  out << "row_label,col_label,value\n";
  out.precision(17);
  for (std::size_t i = 0; i < pd.row_labels.size(); ++i)
    for (std::size_t j = 0; j < pd.col_labels.size(); ++j)
      out << pd.row_labels[i] << ',' << pd.col_labels[j] << ','
          << pd.diff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << '\n';
}

}  // namespace ricci_mon
