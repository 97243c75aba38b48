#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "ricci_mon/graph.hpp"

namespace ricci_mon {

using Matrix = Eigen::MatrixXd;

// Finite probability distribution over a set of vertices.
struct MassDistribution {
  std::vector<Asn> support;
  std::vector<double> mass;

  std::size_t size() const { return support.size(); }
  double total() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }

  double mass_of(Asn asn) const {
    for (std::size_t i = 0; i < support.size(); ++i)
      if (support[i] == asn) return mass[i];
    return 0.0;
  }
};

struct TransportPlan {
  std::vector<Asn> rows;  // support of the source distribution
  std::vector<Asn> cols;  // support of the target distribution
  Matrix plan;
  double cost = 0.0;
};

struct ApproxTransport {
  TransportPlan transport;
  bool converged = false;
  std::size_t iterations = 0;
  double marginal_violation = 0.0;  // L1 row-marginal error at exit
};

namespace detail {

inline void check_ot_inputs(std::span<const double> mu, std::span<const double> nu, const Matrix& d) {
  if (d.rows() != static_cast<Eigen::Index>(mu.size()) || d.cols() != static_cast<Eigen::Index>(nu.size()))
    throw Error("distance matrix is " + std::to_string(d.rows()) + "x" + std::to_string(d.cols()) +
                ", expected " + std::to_string(mu.size()) + "x" + std::to_string(nu.size()));
  if (mu.empty() || nu.empty()) throw Error("empty distribution");
  for (double m : mu)
    if (!(m >= 0.0) || !std::isfinite(m)) throw Error("source mass must be finite and non-negative");
  for (double m : nu)
    if (!(m >= 0.0) || !std::isfinite(m)) throw Error("target mass must be finite and non-negative");
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    double v = d.data()[i];
    if (!std::isfinite(v)) throw Error("distance matrix has a non-finite entry");
    if (v < 0.0) throw Error("distance matrix has a negative entry");
  }
  double sa = std::accumulate(mu.begin(), mu.end(), 0.0);
  double sb = std::accumulate(nu.begin(), nu.end(), 0.0);
  if (std::abs(sa - sb) > 1e-9)
    throw Error("infeasible marginals: total mass " + std::to_string(sa) + " vs " + std::to_string(sb));
}

inline std::vector<std::size_t> positive_indices(std::span<const double> m) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] > 0.0) idx.push_back(i);
  return idx;
}

// Transportation simplex over the bipartite basis tree (MODI pricing).
// Entering cell: most negative reduced cost, lowest (row, col) on ties.
// Leaving cell: smallest flow on the negative half of the cycle, lowest
// (row, col) on ties. Long degenerate stalls switch to Bland's rule.
class TransportationSimplex {
public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand, Matrix cost)
      : n1_(supply.size()), n2_(demand.size()), a_(std::move(supply)), b_(std::move(demand)), c_(std::move(cost)) {
    double max_c = c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0;
    eps_ = 1e-12 * std::max(1.0, max_c);
    // Push the rounding residue of the totals into the largest demand.
    double diff = std::accumulate(a_.begin(), a_.end(), 0.0) - std::accumulate(b_.begin(), b_.end(), 0.0);
    auto big = std::max_element(b_.begin(), b_.end());
    *big = std::max(0.0, *big + diff);
    adj_.resize(n1_ + n2_);
  }

  Matrix solve() {
    north_west_corner();
    std::vector<double> u(n1_), v(n2_);
    std::size_t degenerate_run = 0;
    const std::size_t max_iter = 100 * (n1_ * n2_) + 1000;
    for (std::size_t iter = 0;; ++iter) {
      if (iter > max_iter) throw Error("transportation simplex failed to converge");
      potentials(u, v);
      const bool bland = degenerate_run > n1_ + n2_;
      std::size_t ei = n1_, ej = n2_;
      double best = -eps_;
      for (std::size_t i = 0; i < n1_ && !(bland && ei < n1_); ++i)
        for (std::size_t j = 0; j < n2_; ++j) {
          double r = c_(i, j) - u[i] - v[j];
          if (r < best) {
            best = r;
            ei = i;
            ej = j;
            if (bland) break;
          }
        }
      if (ei == n1_) break;
      double theta = pivot(ei, ej);
      degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
    }
    Matrix plan = Matrix::Zero(static_cast<Eigen::Index>(n1_), static_cast<Eigen::Index>(n2_));
    for (const auto& cell : cells_) plan(cell.i, cell.j) += cell.x;
    return plan;
  }

private:
  struct Cell {
    std::size_t i, j;
    double x;
  };

  void add_cell(std::size_t i, std::size_t j, double x) {
    adj_[i].push_back(cells_.size());
    adj_[n1_ + j].push_back(cells_.size());
    cells_.push_back({i, j, x});
  }

  void north_west_corner() {
    std::vector<double> s = a_, d = b_;
    std::size_t i = 0, j = 0;
    while (i < n1_ && j < n2_) {
      double x = std::min(s[i], d[j]);
      add_cell(i, j, x);
      s[i] -= x;
      d[j] -= x;
      if (i + 1 < n1_ && (s[i] <= d[j] || j + 1 == n2_)) ++i;
      else ++j;
    }
  }

  void potentials(std::vector<double>& u, std::vector<double>& v) {
    std::vector<char> seen(n1_ + n2_, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      auto node = stack.back();
      stack.pop_back();
      for (auto cid : adj_[node]) {
        const auto& cell = cells_[cid];
        if (node < n1_) {
          auto other = n1_ + cell.j;
          if (seen[other]) continue;
          v[cell.j] = c_(cell.i, cell.j) - u[cell.i];
          seen[other] = 1;
          stack.push_back(other);
        } else {
          if (seen[cell.i]) continue;
          u[cell.i] = c_(cell.i, cell.j) - v[cell.j];
          seen[cell.i] = 1;
          stack.push_back(cell.i);
        }
      }
    }
  }

  // Returns theta.
  double pivot(std::size_t ei, std::size_t ej) {
    // Tree path from column node ej to row node ei.
    const std::size_t start = n1_ + ej, goal = ei;
    std::vector<std::size_t> parent_cell(n1_ + n2_, cells_.size());
    std::vector<char> seen(n1_ + n2_, 0);
    std::vector<std::size_t> queue{start};
    seen[start] = 1;
    for (std::size_t h = 0; h < queue.size() && !seen[goal]; ++h) {
      auto node = queue[h];
      for (auto cid : adj_[node]) {
        auto other = node < n1_ ? n1_ + cells_[cid].j : cells_[cid].i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_cell[other] = cid;
        queue.push_back(other);
      }
    }
    // Walk back from goal: the cell touching the row ei is the last on the
    // path and carries a minus sign, then signs alternate.
    std::vector<std::size_t> minus, plus;
    std::size_t node = goal;
    bool sign_minus = true;
    while (node != start) {
      auto cid = parent_cell[node];
      (sign_minus ? minus : plus).push_back(cid);
      sign_minus = !sign_minus;
      node = node < n1_ ? n1_ + cells_[cid].j : cells_[cid].i;
    }
    std::size_t leave = cells_.size();
    double theta = std::numeric_limits<double>::infinity();
    for (auto cid : minus) {
      const auto& c = cells_[cid];
      if (c.x < theta || (c.x == theta && std::pair{c.i, c.j} < std::pair{cells_[leave].i, cells_[leave].j})) {
        theta = c.x;
        leave = cid;
      }
    }
    const double snap = 1e-15;
    for (auto cid : minus) {
      cells_[cid].x -= theta;
      if (cells_[cid].x < snap) cells_[cid].x = 0.0;
    }
    for (auto cid : plus) cells_[cid].x += theta;

    // Replace the leaving cell by the entering one in place.
    auto& old = cells_[leave];
    auto drop = [&](std::size_t n) {
      auto& v = adj_[n];
      v.erase(std::find(v.begin(), v.end(), leave));
    };
    drop(old.i);
    drop(n1_ + old.j);
    old = {ei, ej, theta};
    adj_[ei].push_back(leave);
    adj_[n1_ + ej].push_back(leave);
    return theta;
  }

  std::size_t n1_, n2_;
  std::vector<double> a_, b_;
  Matrix c_;
  double eps_;
  std::vector<Cell> cells_;
  std::vector<std::vector<std::size_t>> adj_;
};

}  // namespace detail

// Exact optimal transport between two mass vectors under cost matrix d.
// Zero-mass entries are kept in the returned plan as zero rows/columns.
inline Matrix exact_ot_plan(std::span<const double> mu, std::span<const double> nu, const Matrix& d) {
  detail::check_ot_inputs(mu, nu, d);
  auto ri = detail::positive_indices(mu);
  auto ci = detail::positive_indices(nu);
  Matrix plan = Matrix::Zero(d.rows(), d.cols());
  if (ri.empty() || ci.empty()) return plan;
  std::vector<double> a, b;
  for (auto i : ri) a.push_back(mu[i]);
  for (auto j : ci) b.push_back(nu[j]);
  Matrix c(static_cast<Eigen::Index>(ri.size()), static_cast<Eigen::Index>(ci.size()));
  for (std::size_t i = 0; i < ri.size(); ++i)
    for (std::size_t j = 0; j < ci.size(); ++j) c(i, j) = d(ri[i], ci[j]);
  detail::TransportationSimplex simplex(std::move(a), std::move(b), std::move(c));
  Matrix reduced = simplex.solve();
  for (std::size_t i = 0; i < ri.size(); ++i)
    for (std::size_t j = 0; j < ci.size(); ++j) plan(ri[i], ci[j]) = reduced(i, j);
  return plan;
}

inline double plan_cost(const Matrix& plan, const Matrix& d) { return plan.cwiseProduct(d).sum(); }

inline TransportPlan exact_ot(const MassDistribution& mu, const MassDistribution& nu, const Matrix& d) {
  TransportPlan out{mu.support, nu.support, exact_ot_plan(mu.mass, nu.mass, d), 0.0};
  out.cost = plan_cost(out.plan, d);
  return out;
}

struct SinkhornOptions {
  double epsilon = 0.01;
  std::size_t max_iter = 10000;
  double tol = 1e-9;
};

// Entropy-regularized transport, log-domain Sinkhorn iterations.
inline ApproxTransport sinkhorn_ot(const MassDistribution& mu, const MassDistribution& nu, const Matrix& d,
                                   const SinkhornOptions& opts = {}) {
  detail::check_ot_inputs(mu.mass, nu.mass, d);
  if (!(opts.epsilon > 0.0)) throw Error("sinkhorn epsilon must be positive");
  auto ri = detail::positive_indices(mu.mass);
  auto ci = detail::positive_indices(nu.mass);
  const auto n1 = ri.size(), n2 = ci.size();
  const double eps = opts.epsilon;
  std::vector<double> f(n1, 0.0), g(n2, 0.0), loga(n1), logb(n2), tmp;
  for (std::size_t i = 0; i < n1; ++i) loga[i] = std::log(mu.mass[ri[i]]);
  for (std::size_t j = 0; j < n2; ++j) logb[j] = std::log(nu.mass[ci[j]]);
  auto cost = [&](std::size_t i, std::size_t j) { return d(ri[i], ci[j]); };
  auto lse = [](std::vector<double>& v) {
    double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
  };

  ApproxTransport out;
  for (out.iterations = 0; out.iterations < opts.max_iter; ++out.iterations) {
    for (std::size_t i = 0; i < n1; ++i) {
      tmp.resize(n2);
      for (std::size_t j = 0; j < n2; ++j) tmp[j] = (g[j] - cost(i, j)) / eps;
      f[i] = eps * (loga[i] - lse(tmp));
    }
    for (std::size_t j = 0; j < n2; ++j) {
      tmp.resize(n1);
      for (std::size_t i = 0; i < n1; ++i) tmp[i] = (f[i] - cost(i, j)) / eps;
      g[j] = eps * (logb[j] - lse(tmp));
    }
    double err = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n2; ++j) row += std::exp((f[i] + g[j] - cost(i, j)) / eps);
      err += std::abs(row - mu.mass[ri[i]]);
    }
    out.marginal_violation = err;
    if (err <= opts.tol) {
      out.converged = true;
      ++out.iterations;
      break;
    }
  }
  if (!out.converged)
    spdlog::warn("sinkhorn stopped after {} iterations with marginal error {:.3e}", out.iterations,
                 out.marginal_violation);
  out.transport.rows = mu.support;
  out.transport.cols = nu.support;
  out.transport.plan = Matrix::Zero(d.rows(), d.cols());
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      out.transport.plan(ri[i], ci[j]) = std::exp((f[i] + g[j] - cost(i, j)) / eps);
  out.transport.cost = plan_cost(out.transport.plan, d);
  return out;
}

}  // namespace ricci_mon
