#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "ricci_mon/ricci_mon.hpp"

namespace fs = std::filesystem;
using namespace ricci_mon;

namespace {

std::ofstream open_out(const std::string& path) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::vector<Asn> read_asn_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<Asn> out;
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::getline(in, tok);
      continue;
    }
    auto v = detail::parse_uint<Asn>(tok);
    if (!v || *v == 0) throw Error(path + ": bad ASN '" + tok + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<DetectionPoint> read_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<DetectionPoint> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(detection_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ricci-mon: curvature-based AS graph monitor"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "replay a feed into snapshot files");
  std::string feed_path, out_path;
  Timestamp interval = 60;
  ingest->add_option("--feed", feed_path, "feed file or - for stdin")->required();
  ingest->add_option("--interval", interval, "snapshot interval in seconds");
  ingest->add_option("--out", out_path, "output directory")->required();

  // landmarks
  auto* lm = app.add_subcommand("landmarks", "select a landmark set");
  std::string method = "lazy-walk", tier_file, snapshot_path, lm_out;
  SelectOptions sel;
  std::optional<Asn> collector;
  lm->add_option("--method", method,
                 "random|top-degree|top-centrality|top-triangles|tier-mix|random-walk|random-walk-collector|lazy-walk");
  lm->add_option("--count", sel.count, "number of landmarks");
  lm->add_option("--iters", sel.iters, "lazy-walk iterations");
  lm->add_option("--seed", sel.seed);
  lm->add_option("--tier-file", tier_file, "whitespace-separated tier ASNs");
  lm->add_option("--collector", collector, "start AS for random-walk-collector");
  lm->add_option("--snapshot", snapshot_path, "snapshot JSON or GML")->required();
  lm->add_option("--out", lm_out, "landmarks JSON")->required();

  // monitor
  auto* mon = app.add_subcommand("monitor", "run the detection pipeline over a feed");
  std::string config_path, landmarks_path, mon_feed, mon_out, ot_name;
  std::optional<double> threshold, gamma_threshold, alpha;
  std::optional<Timestamp> mon_interval;
  std::optional<unsigned> threads;
  mon->add_option("--feed", mon_feed, "feed file or - for stdin")->required();
  mon->add_option("--config", config_path, "TOML config; flags override it");
  mon->add_option("--landmarks", landmarks_path, "landmarks JSON");
  mon->add_option("--threshold", threshold, "energy threshold T");
  mon->add_option("--gamma-threshold", gamma_threshold, "inverse stable rank threshold g");
  mon->add_option("--alpha", alpha, "mass kept on the centre vertex");
  mon->add_option("--ot", ot_name, "exact|approx");
  mon->add_option("--interval", mon_interval, "snapshot interval in seconds");
  mon->add_option("--threads", threads, "worker threads");
  mon->add_option("--out", mon_out, "output directory");

  // explain
  auto* ex = app.add_subcommand("explain", "diff transport plans across a snapshot pair");
  std::string before_path, after_path, ex_out, delta_path;
  Asn ex_asn = 0, ex_landmark = 0;
  bool ex_auto = false;
  std::size_t ex_n = 5;
  double ex_alpha = 0.5;
  ex->add_option("--before", before_path, "snapshot k-1")->required();
  ex->add_option("--after", after_path, "snapshot k")->required();
  ex->add_option("--asn", ex_asn);
  ex->add_option("--landmark", ex_landmark);
  ex->add_flag("--auto", ex_auto, "rank rows of --delta and diff each against its worst landmark");
  ex->add_option("--delta", delta_path, "delta JSON (with --auto)");
  ex->add_option("-n", ex_n, "number of movers (with --auto)");
  ex->add_option("--alpha", ex_alpha);
  ex->add_option("--out", ex_out, "CSV file, or directory with --auto")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic feed from a scenario");
  std::string scenario_path, sim_out, labels_out;
  sim->add_option("--scenario", scenario_path, "scenario TOML")->required();
  sim->add_option("--out", sim_out, "feed file")->required();
  sim->add_option("--labels", labels_out, "ground truth JSON");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit the energy distribution of a detection history");
  std::string history_path, entries_path, cal_out;
  bool drift_only = false;
  std::vector<double> candidates{0.25, 0.5, 1.0, 2.0};
  cal->add_option("--history", history_path, "detections.jsonl")->required();
  cal->add_option("--entries", entries_path, "entry_moments.json written by monitor");
  cal->add_flag("--drift-only", drift_only, "fit DRIFT points only");
  cal->add_option("--thresholds", candidates, "candidate thresholds");
  cal->add_option("--out", cal_out, "report JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("ricci-mon"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*ingest) {
      fs::create_directories(out_path);
      IngestOptions opts;
      opts.interval = interval;
      auto sink = [&](SnapshotPtr s) {
        auto path = fs::path(out_path) / ("snapshot-" + std::to_string(s->seq()) + ".json");
        open_out(path.string()) << export_snapshot(*s) << '\n';
      };
      IngestStats st;
      if (feed_path == "-") {
        st = run_ingest(std::cin, opts, sink);
      } else {
        std::ifstream in(feed_path);
        if (!in) throw Error("cannot open feed " + feed_path);
        st = run_ingest(in, opts, sink);
      }
      spdlog::info("{} lines, {} records, {} parse errors, {} snapshots", st.lines, st.records, st.parse_errors,
                   st.snapshots);
    } else if (*lm) {
      auto snap = load_snapshot_file(snapshot_path);
      if (!tier_file.empty()) sel.tier_set = read_asn_list(tier_file);
      sel.collector = collector;
      auto ls = select_landmarks(snap, landmark_method_from_string(method), sel);
      open_out(lm_out) << to_json(ls).dump(2) << '\n';
      spdlog::info("{} landmarks via {}: S1={:.4f} S2={:.4f}", ls.members.size(), method, ls.s1, ls.s2);
    } else if (*mon) {
      Config cfg;
      if (!config_path.empty()) cfg = load_config(config_path);
      if (!landmarks_path.empty()) cfg.landmark_file = landmarks_path;
      if (threshold) cfg.thresholds.energy = *threshold;
      if (gamma_threshold) cfg.thresholds.gamma_inv = *gamma_threshold;
      if (alpha) cfg.alpha = *alpha;
      if (!ot_name.empty()) cfg.solver = ot_solver_from_string(ot_name);
      if (mon_interval) cfg.interval = *mon_interval;
      if (threads) cfg.threads = *threads;
      if (!mon_out.empty()) cfg.out_dir = mon_out;
      auto res = run_pipeline(cfg, mon_feed);
      std::size_t global = 0, local = 0;
      for (const auto& p : res.points) {
        global += p.cls == EventClass::Global;
        local += p.cls == EventClass::Local;
      }
      spdlog::info("{} snapshots, {} points: {} GLOBAL, {} LOCAL", res.snapshots, res.points.size(), global, local);
    } else if (*ex) {
      auto before = std::make_shared<const AsGraphSnapshot>(load_snapshot_file(before_path));
      auto after = std::make_shared<const AsGraphSnapshot>(load_snapshot_file(after_path));
      DistanceCache cb(before), ca(after);
      if (ex_auto) {
        if (delta_path.empty()) throw Error("--auto needs --delta");
        auto dm = delta_from_json(nlohmann::json::parse(read_file(delta_path)));
        fs::create_directories(ex_out);
        for (auto [asn, energy] : top_movers(dm, ex_n)) {
          auto y = worst_landmark(dm, asn);
          auto pd = plan_diff(cb, ca, asn, y, ex_alpha);
          auto path = fs::path(ex_out) / ("plan-" + std::to_string(asn) + "-" + std::to_string(y) + ".csv");
          auto csv = open_out(path.string());
          write_plan_diff_csv(csv, pd);
          std::cout << asn << " energy=" << energy << " landmark=" << y << " top mover="
                    << (pd.movers.empty() ? 0 : pd.movers.front().first) << '\n';
        }
      } else {
        if (ex_asn == 0 || ex_landmark == 0) throw Error("explain needs --asn and --landmark (or --auto)");
        auto pd = plan_diff(cb, ca, ex_asn, ex_landmark, ex_alpha);
        auto csv = open_out(ex_out);
        write_plan_diff_csv(csv, pd);
        for (std::size_t k = 0; k < std::min<std::size_t>(5, pd.movers.size()); ++k)
          std::cout << pd.movers[k].first << ' ' << pd.movers[k].second << '\n';
      }
    } else if (*sim) {
      auto sc = load_scenario(scenario_path);
      auto feed = emit_feed(sc);
      auto out = open_out(sim_out);
      write_feed(out, feed);
      if (!labels_out.empty()) open_out(labels_out) << labels_to_json(sc, feed).dump(2) << '\n';
      spdlog::info("scenario {}: {} records, {} labels", sc.name, feed.records.size(), feed.labels.size());
    } else if (*cal) {
      auto history = read_detections(history_path);
      std::optional<EntryMoments> entries;
      if (!entries_path.empty()) {
        auto j = nlohmann::json::parse(read_file(entries_path));
        entries = EntryMoments{j.at("count").get<std::uint64_t>(), j.at("sum").get<double>(),
                               j.at("sumsq").get<double>()};
      }
      auto report = calibrate(history, drift_only, entries, candidates);
      auto text = to_json(report).dump(2);
      if (cal_out.empty()) std::cout << text << '\n';
      else open_out(cal_out) << text << '\n';
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
