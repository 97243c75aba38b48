#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace ricci_mon;

namespace {

MassDistribution dist(std::vector<double> m) {
  MassDistribution d;
  for (std::size_t i = 0; i < m.size(); ++i) d.support.push_back(static_cast<Asn>(i + 1));
  d.mass = std::move(m);
  return d;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0;
  for (auto& x : v) s += x = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
  for (auto& x : v) x /= s;
  return v;
}

Matrix random_cost(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, bool integer = false) {
  Matrix d(r, c);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    d.data()[i] = integer ? static_cast<double>(rng() % 5) : std::uniform_real_distribution<double>(0, 4)(rng);
  return d;
}

void expect_marginals(const TransportPlan& p, const MassDistribution& mu, const MassDistribution& nu, double tol) {
  for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_NEAR(p.plan.row(static_cast<Eigen::Index>(i)).sum(), mu.mass[i], tol);
  for (std::size_t j = 0; j < nu.size(); ++j) EXPECT_NEAR(p.plan.col(static_cast<Eigen::Index>(j)).sum(), nu.mass[j], tol);
  EXPECT_GE(p.plan.minCoeff(), -1e-15);
}

// Uniform measures on the neighbourhoods of two adjacent clique vertices x=1, y=2.
std::tuple<MassDistribution, MassDistribution, Matrix> clique_instance(Asn n) {
  auto s = fixtures::snap(fixtures::clique(1, n));
  auto mu = mass_distribution(*s, 1, 0.0), nu = mass_distribution(*s, 2, 0.0);
  Matrix d(mu.size(), nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) d(i, j) = mu.support[i] == nu.support[j] ? 0 : 1;
  return {mu, nu, d};
}

}  // namespace

TEST(ExactOt, PointToPoint) {
  Matrix d(1, 1);
  d << 3;
  auto p = exact_ot(dist({1.0}), dist({1.0}), d);
  EXPECT_DOUBLE_EQ(p.plan(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.cost, 3.0);
}

TEST(ExactOt, FiveClique) {
  auto [mu, nu, d] = clique_instance(5);
  auto p = exact_ot(mu, nu, d);
  EXPECT_NEAR(p.cost, 0.25, 1e-12);
  expect_marginals(p, mu, nu, 1e-12);
}

TEST(ExactOt, StarPairAgainstFlowOracle) {
  // Two 4-vertex stars joined at the centres, uniform neighbour measures.
  auto s = fixtures::snap(fixtures::star_pair(4));
  DistanceCache cache(s);
  CurvatureOptions o;
  o.alpha = 0.0;
  auto p = transport_plan(cache, 1, 2, o);
  std::vector<double> a(p.plan.rows()), b(p.plan.cols());
  for (Eigen::Index i = 0; i < p.plan.rows(); ++i) a[i] = p.plan.row(i).sum();
  for (Eigen::Index j = 0; j < p.plan.cols(); ++j) b[j] = p.plan.col(j).sum();
  Matrix d(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::vector<Asn> t{p.cols[j]};
      d(i, j) = hop_distances(*s, p.rows[i], t).at(p.cols[j]);
    }
  double ref = oracle::ot_min_cost_flow(a, b, d);
  EXPECT_NEAR(p.cost, ref, 1e-12);
  EXPECT_NEAR(p.cost, 2.0, 1e-12);  // 3 - 4/N at N = 4
}

TEST(ExactOt, Errors) {
  Matrix d(1, 1);
  d << std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(exact_ot(dist({1.0}), dist({1.0}), d), Error);
  d << std::numeric_limits<double>::infinity();
  EXPECT_THROW(exact_ot(dist({1.0}), dist({1.0}), d), Error);
  Matrix d2 = Matrix::Ones(1, 2);
  EXPECT_THROW(exact_ot(dist({1.0}), dist({0.5, 0.4}), d2), Error);
  EXPECT_THROW(exact_ot(dist({1.0}), dist({0.5, 0.5}), Matrix::Ones(2, 2)), Error);
  d << -1;
  EXPECT_THROW(exact_ot(dist({1.0}), dist({1.0}), d), Error);
}

TEST(ExactOt, MatchesBasisEnumeration) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 60; ++rep) {
    auto r = 1 + rng() % 4, c = 1 + rng() % 4;
    auto mu = dist(random_simplex(rng, r)), nu = dist(random_simplex(rng, c));
    Matrix d = random_cost(rng, r, c, rep % 2 == 0);
    auto p = exact_ot(mu, nu, d);
    EXPECT_NEAR(p.cost, oracle::ot_enumerate(mu.mass, nu.mass, d), 1e-9);
    expect_marginals(p, mu, nu, 1e-8);
    EXPECT_NEAR(p.cost, plan_cost(p.plan, d), 1e-12);
  }
}

TEST(ExactOt, MatchesFlowOracleOnLargerInstances) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 40; ++rep) {
    auto r = 2 + rng() % 12, c = 2 + rng() % 12;
    auto mu = dist(random_simplex(rng, r)), nu = dist(random_simplex(rng, c));
    Matrix d = random_cost(rng, r, c, rep % 2 == 0);
    auto p = exact_ot(mu, nu, d);
    EXPECT_NEAR(p.cost, oracle::ot_min_cost_flow(mu.mass, nu.mass, d), 1e-9);
    expect_marginals(p, mu, nu, 1e-8);
  }
}

TEST(ExactOt, SymmetryAndScaling) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 40; ++rep) {
    auto r = 1 + rng() % 7, c = 1 + rng() % 7;
    auto mu = dist(random_simplex(rng, r)), nu = dist(random_simplex(rng, c));
    Matrix d = random_cost(rng, r, c);
    double cost = exact_ot(mu, nu, d).cost;
    EXPECT_NEAR(exact_ot(nu, mu, d.transpose()).cost, cost, 1e-10);
    EXPECT_NEAR(exact_ot(mu, nu, 2.5 * d).cost, 2.5 * cost, 1e-10);
  }
}

TEST(ExactOt, ZeroMassEntriesAllowed) {
  Matrix d(2, 2);
  d << 1, 2, 3, 4;
  auto p = exact_ot(dist({0.0, 1.0}), dist({1.0, 0.0}), d);
  EXPECT_DOUBLE_EQ(p.cost, 3.0);
}

TEST(ExactOt, Deterministic) {
  std::mt19937_64 rng(14);
  auto mu = dist(random_simplex(rng, 6)), nu = dist(random_simplex(rng, 6));
  Matrix d = random_cost(rng, 6, 6, true);
  auto a = exact_ot(mu, nu, d), b = exact_ot(mu, nu, d);
  EXPECT_TRUE(a.plan == b.plan);
}

TEST(Sinkhorn, PointToPoint) {
  Matrix d(1, 1);
  d << 3;
  for (double eps : {1.0, 0.1, 0.001}) {
    SinkhornOptions o;
    o.epsilon = eps;
    auto r = sinkhorn_ot(dist({1.0}), dist({1.0}), d, o);
    EXPECT_TRUE(r.converged);
    EXPECT_DOUBLE_EQ(r.transport.cost, 3.0);
  }
}

TEST(Sinkhorn, FiveCliqueNearExact) {
  auto [mu, nu, d] = clique_instance(5);
  SinkhornOptions o;
  o.epsilon = 0.1;
  auto r = sinkhorn_ot(mu, nu, d, o);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.transport.cost, 0.25, 0.02);
  expect_marginals(r.transport, mu, nu, 1e-6);
  // small epsilon stalls on this tied instance but stays close in cost
  o.epsilon = 0.01;
  auto s = sinkhorn_ot(mu, nu, d, o);
  EXPECT_NEAR(s.transport.cost, 0.25, 0.02);
  double err = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) err += std::abs(s.transport.plan.row(i).sum() - mu.mass[i]);
  EXPECT_NEAR(s.marginal_violation, err, 1e-12);
  EXPECT_EQ(s.converged, s.marginal_violation <= o.tol);
}

TEST(Sinkhorn, EpsilonSweepApproachesExact) {
  std::mt19937_64 rng(15);
  auto mu = dist(random_simplex(rng, 6)), nu = dist(random_simplex(rng, 6));
  Matrix d = random_cost(rng, 6, 6);
  double exact = exact_ot(mu, nu, d).cost;
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.5, 0.1, 0.01}) {
    SinkhornOptions o;
    o.epsilon = eps;
    auto r = sinkhorn_ot(mu, nu, d, o);
    ASSERT_TRUE(r.converged);
    double gap = std::abs(r.transport.cost - exact);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Sinkhorn, ReportsNonConvergence) {
  std::mt19937_64 rng(16);
  auto mu = dist(random_simplex(rng, 5)), nu = dist(random_simplex(rng, 5));
  Matrix d = random_cost(rng, 5, 5);
  SinkhornOptions o;
  o.epsilon = 1e-4;
  o.max_iter = 2;
  auto r = sinkhorn_ot(mu, nu, d, o);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2u);
  EXPECT_GT(r.marginal_violation, 0.0);
  o.epsilon = 0;
  EXPECT_THROW(sinkhorn_ot(mu, nu, d, o), Error);
}
