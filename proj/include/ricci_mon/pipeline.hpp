#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "ricci_mon/curvature.hpp"
#include "ricci_mon/detector.hpp"
#include "ricci_mon/feed.hpp"
#include "ricci_mon/landmarks.hpp"
#include "ricci_mon/root_cause.hpp"
#include "ricci_mon/snapshot_io.hpp"
#include "toml.hpp"

namespace ricci_mon {

struct Config {
  Timestamp interval = 60;
  std::string landmark_file;
  std::vector<Asn> landmarks;  // filled from landmark_file when empty
  double alpha = 0.5;
  OtSolver solver = OtSolver::Exact;
  SinkhornOptions sinkhorn{};
  Thresholds thresholds{};
  std::string out_dir = "out";
  unsigned threads = 0;  // 0: default_threads()
  std::size_t explain_top = 5;
  bool explain = true;
};

inline std::string_view to_string(OtSolver s) { return s == OtSolver::Exact ? "exact" : "approx"; }

inline OtSolver ot_solver_from_string(std::string_view s) {
  if (s == "exact") return OtSolver::Exact;
  if (s == "approx") return OtSolver::Approx;
  throw Error("unknown OT solver '" + std::string(s) + "' (exact|approx)");
}

inline void validate(const Config& c) {
  if (c.interval <= 0) throw Error("config: interval must be positive");
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw Error("config: alpha must lie in [0, 1]");
  validate(c.thresholds);
  if (!(c.sinkhorn.epsilon > 0.0)) throw Error("config: sinkhorn epsilon must be positive");
  if (c.landmarks.empty() && c.landmark_file.empty()) throw Error("config: no landmark file given");
  if (c.out_dir.empty()) throw Error("config: output directory is empty");
}

// Overlays keys present in a TOML document onto `base`.
inline Config config_from_toml(const toml::table& t, Config base = {}) {
  auto num = [&](std::string_view key, auto& field) {
    using T = std::remove_reference_t<decltype(field)>;
    auto node = t[key];
    if (!node) return;
    if (auto v = node.template value<double>()) {
      field = static_cast<T>(*v);
      return;
    }
    throw Error("config key '" + std::string(key) + "' must be a number");
  };
  auto str = [&](std::string_view key, std::string& field) {
    auto node = t[key];
    if (!node) return;
    if (auto v = node.value<std::string>()) {
      field = *v;
      return;
    }
    throw Error("config key '" + std::string(key) + "' must be a string");
  };
  num("interval", base.interval);
  str("landmarks", base.landmark_file);
  num("alpha", base.alpha);
  std::string solver(to_string(base.solver));
  str("solver", solver);
  base.solver = ot_solver_from_string(solver);
  num("sinkhorn_epsilon", base.sinkhorn.epsilon);
  num("sinkhorn_max_iter", base.sinkhorn.max_iter);
  num("threshold", base.thresholds.energy);
  num("gamma_threshold", base.thresholds.gamma_inv);
  str("out", base.out_dir);
  num("threads", base.threads);
  num("explain_top", base.explain_top);
  if (auto v = t["explain"].value<bool>()) base.explain = *v;
  return base;
}

inline Config load_config(const std::string& path, Config base = {}) {
  try {
    return config_from_toml(toml::parse_file(path), std::move(base));
  } catch (const toml::parse_error& e) {
    throw Error("config " + path + ": " + std::string(e.description()));
  }
}

inline toml::table config_to_toml(const Config& c) {
  toml::table t;
  t.insert("interval", static_cast<std::int64_t>(c.interval));
  t.insert("landmarks", c.landmark_file);
  toml::array members;
  for (Asn a : c.landmarks) members.push_back(static_cast<std::int64_t>(a));
  t.insert("landmark_members", members);
  t.insert("alpha", c.alpha);
  t.insert("solver", std::string(to_string(c.solver)));
  t.insert("sinkhorn_epsilon", c.sinkhorn.epsilon);
  t.insert("sinkhorn_max_iter", static_cast<std::int64_t>(c.sinkhorn.max_iter));
  t.insert("threshold", c.thresholds.energy);
  t.insert("gamma_threshold", c.thresholds.gamma_inv);
  t.insert("out", c.out_dir);
  t.insert("threads", static_cast<std::int64_t>(c.threads));
  t.insert("explain_top", static_cast<std::int64_t>(c.explain_top));
  t.insert("explain", c.explain);
  return t;
}

// Landmark file: the landmarks JSON object or a bare JSON array of ASNs.
inline std::vector<Asn> load_landmark_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open landmark file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("landmark file " + path + ": " + e.what());
  }
  std::vector<Asn> out = j.is_array() ? j.get<std::vector<Asn>>() : landmarks_from_json(j).members;
  if (out.size() < 2) throw Error("landmark file " + path + " lists fewer than 2 ASes");
  return out;
}

struct SnapshotTiming {
  double bfs = 0.0;
  double ot = 0.0;
  double eigen = 0.0;
  double total = 0.0;
};

struct PipelineResult {
  std::vector<DetectionPoint> points;
  IngestStats ingest;
  EntryMoments entries;
  std::size_t snapshots = 0;
  std::vector<SnapshotTiming> timings;
  bool wrote_outputs = false;
};

namespace detail {

class PipelineOutputs {
public:
  explicit PipelineOutputs(const Config& cfg) : cfg_(cfg), dir_(cfg.out_dir) {}

  void open() {
    if (opened_) return;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir_.string() + ": " + ec.message());
    detections_.open(dir_ / "detections.jsonl");
    phase_.open(dir_ / "phase.csv");
    if (!detections_ || !phase_) throw Error("output directory " + dir_.string() + " is not writable");
    phase_ << "energy,gamma_inv,class\n";
    phase_.precision(17);
    std::ofstream conf(dir_ / "config.toml");
    conf << config_to_toml(cfg_) << '\n';
    if (!conf) throw Error("cannot write resolved config to " + dir_.string());
    opened_ = true;
  }

  void point(const DetectionPoint& p) {
    detections_ << to_json(p).dump() << '\n';
    phase_ << p.energy << ',' << p.gamma_inv << ',' << to_string(p.cls) << '\n';
    detections_.flush();
    phase_.flush();
    if (!detections_ || !phase_) throw Error("write failed in " + dir_.string());
  }

  void entries(const EntryMoments& e) {
    if (!opened_) return;
    nlohmann::ordered_json j{{"count", e.count}, {"sum", e.sum}, {"sumsq", e.sumsq}};
    std::ofstream(dir_ / "entry_moments.json") << j.dump() << '\n';
  }

  void explain(const DeltaMatrix& dm, DistanceCache& before, DistanceCache& after) {
    auto sub = dir_ / ("explain-" + std::to_string(dm.seq));
    std::filesystem::create_directories(sub);
    std::ofstream(sub / "delta.json") << matrix_to_json(dm).dump() << '\n';
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (auto [asn, energy] : top_movers(dm, cfg_.explain_top)) {
      auto y = worst_landmark(dm, asn);
      nlohmann::ordered_json item{{"asn", asn}, {"row_energy", energy}, {"landmark", y}};
      try {
        auto pd = plan_diff(before, after, asn, y, cfg_.alpha);
        auto name = "plan-" + std::to_string(asn) + "-" + std::to_string(y) + ".csv";
        std::ofstream csv(sub / name);
        write_plan_diff_csv(csv, pd);
        item["file"] = name;
        item["movers"] = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < std::min<std::size_t>(pd.movers.size(), 5); ++k)
          item["movers"].push_back({{"asn", pd.movers[k].first}, {"shift", pd.movers[k].second}});
      } catch (const Error& e) {
        item["error"] = e.what();
      }
      summary.push_back(item);
    }
    std::ofstream(sub / "movers.json") << summary.dump(2) << '\n';
  }

private:
  const Config& cfg_;
  std::filesystem::path dir_;
  std::ofstream detections_, phase_;
  bool opened_ = false;
};

}  // namespace detail

// Streams the feed into snapshots and folds each consecutive pair into a
// detection point. Only two snapshots and their distance caches are alive at
// any time. Outputs appear on the first snapshot; an empty feed leaves the
// output directory untouched.
inline PipelineResult run_pipeline(Config cfg, std::istream& feed) {
  if (cfg.landmarks.empty()) cfg.landmarks = load_landmark_file(cfg.landmark_file);
  if (cfg.threads == 0) cfg.threads = default_threads();
  validate(cfg);
  std::sort(cfg.landmarks.begin(), cfg.landmarks.end());
  cfg.landmarks.erase(std::unique(cfg.landmarks.begin(), cfg.landmarks.end()), cfg.landmarks.end());

  PipelineResult res;
  detail::PipelineOutputs out(cfg);
  std::unique_ptr<DistanceCache> prev;
  OtTimer ot_timer;
  CurvatureOptions copts;
  copts.alpha = cfg.alpha;
  copts.solver = cfg.solver;
  copts.sinkhorn = cfg.sinkhorn;
  copts.threads = cfg.threads;
  copts.timer = &ot_timer;

  auto on_snapshot = [&](SnapshotPtr snap) {
    out.open();
    res.wrote_outputs = true;
    ++res.snapshots;
    auto cur = std::make_unique<DistanceCache>(snap);
    if (!prev) {
      std::size_t missing = 0;
      for (Asn a : cfg.landmarks) missing += !snap->contains(a);
      if (missing)
        spdlog::warn("{} of {} landmarks absent from the first snapshot; their columns stay undefined", missing,
                     cfg.landmarks.size());
      prev = std::move(cur);
      return;
    }
    auto t0 = std::chrono::steady_clock::now();
    double bfs0 = prev->bfs_seconds();
    double ot0 = ot_timer.seconds();
    auto dm = delta(*cur, *prev, cfg.landmarks, copts);
    auto t1 = std::chrono::steady_clock::now();
    auto point = detect(dm, cfg.thresholds);
    auto t2 = std::chrono::steady_clock::now();
    SnapshotTiming tm;
    tm.bfs = cur->bfs_seconds() + prev->bfs_seconds() - bfs0;
    tm.ot = ot_timer.seconds() - ot0;
    tm.eigen = std::chrono::duration<double>(t2 - t1).count();
    tm.total = std::chrono::duration<double>(t2 - t0).count();
    res.timings.push_back(tm);
    spdlog::info("seq={} t={} m={} energy={:.6g} gamma_inv={:.4f} class={} bfs={:.3f}s ot={:.3f}s eig={:.4f}s total={:.3f}s",
                 point.seq, point.t, point.m, point.energy, point.gamma_inv, to_string(point.cls), tm.bfs, tm.ot,
                 tm.eigen, tm.total);
    out.point(point);
    res.entries.add(dm);
    if (point.cls == EventClass::Global && cfg.explain) out.explain(dm, *prev, *cur);
    res.points.push_back(point);
    prev = std::move(cur);
  };

  IngestOptions iopts;
  iopts.interval = cfg.interval;
  res.ingest = run_ingest(feed, iopts, on_snapshot);
  out.entries(res.entries);
  if (!res.wrote_outputs) spdlog::info("feed produced no snapshots; nothing written");
  return res;
}

inline PipelineResult run_pipeline(const Config& cfg, const std::string& feed_path) {
  if (feed_path == "-") return run_pipeline(cfg, std::cin);
  std::ifstream in(feed_path);
  if (!in) throw Error("cannot open feed " + feed_path);
  return run_pipeline(cfg, in);
}

}  // namespace ricci_mon
