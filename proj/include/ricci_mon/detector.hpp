#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "ricci_mon/curvature.hpp"

namespace ricci_mon {

enum class EventClass { Global, Local, Drift };

inline std::string_view to_string(EventClass c) {
  switch (c) {
    case EventClass::Global: return "GLOBAL";
    case EventClass::Local: return "LOCAL";
    case EventClass::Drift: return "DRIFT";
  }
  return "DRIFT";
}

inline EventClass event_class_from_string(std::string_view s) {
  if (s == "GLOBAL") return EventClass::Global;
  if (s == "LOCAL") return EventClass::Local;
  if (s == "DRIFT") return EventClass::Drift;
  throw Error("unknown event class '" + std::string(s) + "'");
}

// Sum of squared entries. This is the squared Frobenius norm; the detector
// calls it "energy" and normalizes by the row count.
inline double frobenius_energy(const Matrix& values) { return values.squaredNorm(); }
inline double frobenius_energy(const DeltaMatrix& delta) { return frobenius_energy(delta.values); }

struct StableRank {
  double gamma = 1.0;       // energy / lambda_max, in [1, L]
  double lambda_max = 0.0;  // largest eigenvalue of the L x L Gram matrix
  bool degenerate = false;  // energy below 1e-12
  bool used_fallback = false;
};

inline constexpr double kDegenerateEnergy = 1e-12;

// lambda_max by power iteration on the Gram matrix from a fixed start
// vector; a full symmetric eigensolve takes over when the iteration stalls
// or lands below the largest Gram diagonal entry (a lower bound on lambda_max).
inline StableRank stable_rank(const Matrix& values, double tol = 1e-10, std::size_t max_iter = 10000) {
  StableRank sr;
  const double energy = frobenius_energy(values);
  if (energy < kDegenerateEnergy || values.cols() == 0) {
    sr.degenerate = true;
    return sr;
  }
  const Matrix gram = values.transpose() * values;
  const auto l = gram.rows();
  Eigen::VectorXd x(l);
  for (Eigen::Index j = 0; j < l; ++j) x(j) = 1.0 / std::sqrt(static_cast<double>(j) + 1.0);
  x.normalize();
  double lambda = x.dot(gram * x);
  bool converged = false;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Eigen::VectorXd y = gram * x;
    double norm = y.norm();
    if (norm <= 0.0) break;
    x = y / norm;
    double next = x.dot(gram * x);
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      lambda = next;
      converged = true;
      break;
    }
    lambda = next;
  }
  const double diag_bound = gram.diagonal().maxCoeff();
  if (!converged || lambda < diag_bound * (1.0 - 1e-9)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    lambda = es.eigenvalues().maxCoeff();
    sr.used_fallback = true;
  }
  sr.lambda_max = lambda;
  sr.gamma = energy / lambda;
  return sr;
}
inline StableRank stable_rank(const DeltaMatrix& delta) { return stable_rank(delta.values); }

struct CurvatureBalance {
  double sum_pos = 0.0;
  double sum_neg = 0.0;
  double total = 0.0;
};

inline CurvatureBalance curvature_balance(const Matrix& values) {
  CurvatureBalance b;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    double v = values.data()[k];
    if (v > 0) b.sum_pos += v;
    else b.sum_neg += v;
  }
  b.total = b.sum_pos + b.sum_neg;
  return b;
}
inline CurvatureBalance curvature_balance(const DeltaMatrix& delta) { return curvature_balance(delta.values); }

struct Thresholds {
  double energy = 1.0;     // T, on the normalized energy
  double gamma_inv = 0.7;  // g
};

inline void validate(const Thresholds& th) {
  if (!(th.energy > 0.0)) throw Error("energy threshold must be positive");
  if (!(th.gamma_inv > 0.0 && th.gamma_inv < 1.0)) throw Error("gamma threshold must lie in (0, 1)");
}

inline EventClass classify(double energy, double gamma_inv, const Thresholds& th = {}) {
  if (!(energy > th.energy)) return EventClass::Drift;
  return gamma_inv <= th.gamma_inv ? EventClass::Global : EventClass::Local;
}

struct DetectionPoint {
  std::uint64_t seq = 0;
  Timestamp t = 0;
  double energy = 0.0;  // normalized: sum of squares / m
  double gamma_inv = 1.0;
  double sum_pos = 0.0;
  double sum_neg = 0.0;
  std::size_t m = 0;
  EventClass cls = EventClass::Drift;
  bool degenerate = false;
};

// An empty delta (no changed AS) yields a degenerate DRIFT point with m = 0.
inline DetectionPoint detect(const DeltaMatrix& delta, const Thresholds& th = {}) {
  DetectionPoint p;
  p.seq = delta.seq;
  p.t = delta.t;
  p.m = delta.m();
  auto bal = curvature_balance(delta);
  p.sum_pos = bal.sum_pos;
  p.sum_neg = bal.sum_neg;
  if (p.m == 0) {
    p.degenerate = true;
    return p;
  }
  p.energy = frobenius_energy(delta) / static_cast<double>(p.m);
  auto sr = stable_rank(delta);
  p.degenerate = sr.degenerate;
  p.gamma_inv = 1.0 / sr.gamma;
  p.cls = sr.degenerate ? EventClass::Drift : classify(p.energy, p.gamma_inv, th);
  return p;
}

inline nlohmann::ordered_json to_json(const DetectionPoint& p) {
  nlohmann::ordered_json j;
  j["seq"] = p.seq;
  j["t"] = p.t;
  j["energy"] = p.energy;
  j["gamma_inv"] = p.gamma_inv;
  j["sum_pos"] = p.sum_pos;
  j["sum_neg"] = p.sum_neg;
  j["m"] = p.m;
  j["class"] = std::string(to_string(p.cls));
  return j;
}

inline DetectionPoint detection_from_json(const nlohmann::json& j) {
  DetectionPoint p;
  try {
    p.seq = j.at("seq").get<std::uint64_t>();
    p.t = j.at("t").get<Timestamp>();
    p.energy = j.at("energy").get<double>();
    p.gamma_inv = j.at("gamma_inv").get<double>();
    p.sum_pos = j.at("sum_pos").get<double>();
    p.sum_neg = j.at("sum_neg").get<double>();
    p.m = j.at("m").get<std::size_t>();
    p.cls = event_class_from_string(j.at("class").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("detection point JSON: ") + e.what());
  }
  return p;
}

// Running moments of defined delta entries, pooled across snapshots.
struct EntryMoments {
  std::uint64_t count = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(const DeltaMatrix& delta) {
    for (Eigen::Index k = 0; k < delta.values.size(); ++k) {
      if (!delta.defined.data()[k]) continue;
      double v = delta.values.data()[k];
      ++count;
      sum += v;
      sumsq += v * v;
    }
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double variance() const {
    if (count < 2) return 0.0;
    double mu = mean();
    return std::max(0.0, (sumsq - static_cast<double>(count) * mu * mu) / static_cast<double>(count - 1));
  }
};

// Survival function of the chi-square law with one degree of freedom.
inline double chi2_1_ccdf(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

// False-alarm probability of threshold T when normalized energy / variance
// follows chi-square with one degree of freedom.
inline double false_alarm_probability(double threshold, double entry_variance) {
  if (!(entry_variance > 0.0)) throw Error("entry variance must be positive");
  return chi2_1_ccdf(threshold / entry_variance);
}

struct CalibrationReport {
  double shape = 0.0;  // Gamma fit by moments on normalized energies
  double scale = 0.0;
  double energy_mean = 0.0;
  double energy_variance = 0.0;
  std::size_t samples = 0;
  double entry_mean = 0.0;
  double entry_variance = 0.0;
  std::vector<std::pair<double, double>> false_alarm;  // (T, probability)
};

inline constexpr std::size_t kMinCalibrationHistory = 100;

inline CalibrationReport calibrate(std::span<const DetectionPoint> history, bool drift_only,
                                   const std::optional<EntryMoments>& entries,
                                   std::vector<double> candidate_thresholds = {0.25, 0.5, 1.0, 2.0}) {
  std::vector<double> e;
  for (const auto& p : history)
    if (!drift_only || p.cls == EventClass::Drift) e.push_back(p.energy);
  if (e.size() < kMinCalibrationHistory)
    throw Error("insufficient history: " + std::to_string(e.size()) + " points, need " +
                std::to_string(kMinCalibrationHistory));
  CalibrationReport r;
  r.samples = e.size();
  double n = static_cast<double>(e.size());
  for (double v : e) r.energy_mean += v;
  r.energy_mean /= n;
  for (double v : e) r.energy_variance += (v - r.energy_mean) * (v - r.energy_mean);
  r.energy_variance /= n - 1.0;
  if (!(r.energy_mean > 0.0) || !(r.energy_variance > 1e-12 * r.energy_mean * r.energy_mean))
    throw Error("degenerate history: energy variance is zero");
  r.shape = r.energy_mean * r.energy_mean / r.energy_variance;
  r.scale = r.energy_variance / r.energy_mean;
  if (entries && entries->count >= 2) {
    r.entry_mean = entries->mean();
    r.entry_variance = entries->variance();
    if (r.entry_variance > 0.0)
      for (double th : candidate_thresholds) r.false_alarm.emplace_back(th, false_alarm_probability(th, r.entry_variance));
  }
  return r;
}

inline nlohmann::ordered_json to_json(const CalibrationReport& r) {
  nlohmann::ordered_json j;
  j["gamma_shape"] = r.shape;
  j["gamma_scale"] = r.scale;
  j["energy_mean"] = r.energy_mean;
  j["energy_variance"] = r.energy_variance;
  j["samples"] = r.samples;
  j["entry_mean"] = r.entry_mean;
  j["entry_variance"] = r.entry_variance;
  j["false_alarm"] = nlohmann::ordered_json::array();
  for (auto [th, p] : r.false_alarm) j["false_alarm"].push_back({{"threshold", th}, {"probability", p}});
  return j;
}

}  // namespace ricci_mon
