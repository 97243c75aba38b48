// One PASS/FAIL line per acceptance criterion; exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "fixtures.hpp"

using namespace ricci_mon;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string strf(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(Outcome& o, bool pass, const std::string& what) {
  if (!pass) {
    o.ok = false;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += what;
  }
}

SnapshotPtr snapshot_of(const SyntheticTopology& t) {
  std::vector<AsVertex> vs;
  for (Asn a : t.asns) vs.push_back({a, 0, 0});
  std::vector<AsEdge> es;
  for (auto [a, b] : t.edges) es.push_back({a, b, 4096});
  return std::make_shared<const AsGraphSnapshot>(60, 0, std::move(vs), std::move(es));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs the monitor over a scenario with lazy-walk landmarks picked on the
// first snapshot, returning the detection points.
std::vector<DetectionPoint> monitor_scenario(const Scenario& sc, std::size_t landmarks, std::uint64_t seed) {
  std::ostringstream text;
  write_feed(text, emit_feed(sc));
  SnapshotPtr first;
  {
    std::istringstream in(text.str());
    run_ingest(in, {}, [&](SnapshotPtr s) {
      if (!first) first = s;
    });
  }
  SelectOptions so;
  so.count = landmarks;
  so.seed = seed;
  auto dir = std::filesystem::temp_directory_path() / ("ricci_mon_acceptance_" + sc.name);
  std::filesystem::remove_all(dir);
  Config cfg;
  cfg.landmarks = select_landmarks(*first, LandmarkMethod::LazyWalk, so).members;
  cfg.out_dir = dir.string();
  std::istringstream in(text.str());
  auto res = run_pipeline(cfg, in);
  std::filesystem::remove_all(dir);
  return res.points;
}

Scenario scenario(const char* name) {
  return load_scenario(std::string(RICCI_MON_SCENARIO_DIR) + "/" + name + ".toml");
}

Outcome closed_forms() {
  Outcome o;
  CurvatureOptions a0, a5;
  a0.alpha = 0.0;
  a5.alpha = 0.5;
  for (Asn n = 3; n <= 10; ++n) {
    auto k = fixtures::snap(fixtures::clique(1, n));
    double want = 1.0 - 1.0 / static_cast<double>(n - 1);
    for (Asn y = 2; y <= n; ++y) {
      double got = *ricci_curvature(k, 1, y, a0);
      note(o, std::abs(got - want) <= 1e-9, strf("clique N=%u: %.12g vs %.12g", n, got, want));
    }
    auto l = fixtures::snap(fixtures::line(n));
    for (Asn x = 1; x < n; ++x) {
      double got = *ricci_curvature(l, x, x + 1, a0);
      note(o, std::abs(got) <= 1e-9, strf("line N=%u (%u,%u): %.12g vs 0", n, x, x + 1, got));
    }
    auto s = fixtures::snap(fixtures::star_pair(n));
    double nn = static_cast<double>(n);
    double g0 = *ricci_curvature(s, 1, 2, a0), w0 = -2.0 + 2.0 / nn;
    double g5 = *ricci_curvature(s, 1, 2, a5), w5 = -1.0 + 3.0 / (2.0 * nn);
    note(o, std::abs(g0 - w0) <= 1e-9, strf("star pair N=%u alpha=0: %.6f vs %.6f", n, g0, w0));
    note(o, std::abs(g5 - w5) <= 1e-9, strf("star pair N=%u alpha=0.5: %.6f vs %.6f", n, g5, w5));
  }
  if (o.ok) o.detail = "cliques, lines, star pairs N=3..10";
  return o;
}

Outcome ot_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    int m = size(rng), n = size(rng);
    auto simplex = [&](int k) {
      std::vector<double> w(k);
      double s = 0;
      for (auto& x : w) s += (x = u(rng) < 0.15 ? 0.0 : u(rng));
      if (s == 0) w[0] = s = 1;
      for (auto& x : w) x /= s;
      return w;
    };
    auto a = simplex(m), b = simplex(n);
    // renormalize the second marginal onto the first's total
    double sa = 0, sb = 0;
    for (double x : a) sa += x;
    for (double x : b) sb += x;
    for (auto& x : b) x *= sa / sb;
    Matrix d(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = rep % 2 ? std::floor(u(rng) * 4) : u(rng) * 3;
    MassDistribution mu, nu;
    for (int i = 0; i < m; ++i) mu.support.push_back(static_cast<Asn>(i + 1)), mu.mass.push_back(a[i]);
    for (int j = 0; j < n; ++j) nu.support.push_back(static_cast<Asn>(j + 1)), nu.mass.push_back(b[j]);
    double got = exact_ot(mu, nu, d).cost, want = oracle::ot_enumerate(a, b, d);
    worst = std::max(worst, std::abs(got - want));
    note(o, std::abs(got - want) <= 1e-9, strf("instance %d: %.12g vs %.12g", rep, got, want));
  }
  if (o.ok) o.detail = strf("200 instances, max |diff| %.2e", worst);
  return o;
}

Outcome curvature_bounds() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::size_t pairs = 0;
  double lo5 = 1, hi5 = -1, lo0 = 1, hi0 = -2;
  for (int rep = 0; rep < 1000; ++rep) {
    Asn n = 2 + rng() % 49;
    double p = std::uniform_real_distribution<double>(0.0, 4.0 / n)(rng);
    auto s = fixtures::snap(fixtures::random_connected(rng, n, p));
    DistanceCache cache(s, n);
    CurvatureOptions a0, a5;
    a0.alpha = 0.0;
    a5.alpha = 0.5;
    for (Asn x = 1; x <= n; ++x)
      for (Asn y = x + 1; y <= n; ++y) {
        auto k5 = ricci_curvature(cache, x, y, a5), k0 = ricci_curvature(cache, x, y, a0);
        ++pairs;
        if (k5) {
          lo5 = std::min(lo5, *k5), hi5 = std::max(hi5, *k5);
          note(o, *k5 >= -1.0 - 1e-12 && *k5 <= 1.0 + 1e-12, strf("alpha=0.5 graph %d (%u,%u): %.12g", rep, x, y, *k5));
        }
        if (k0) {
          lo0 = std::min(lo0, *k0), hi0 = std::max(hi0, *k0);
          note(o, *k0 >= -2.0 - 1e-12 && *k0 <= 1.0 + 1e-12, strf("alpha=0 graph %d (%u,%u): %.12g", rep, x, y, *k0));
        }
      }
  }
  if (o.ok)
    o.detail = strf("%zu pairs; alpha=0.5 range [%.4f, %.4f], alpha=0 range [%.4f, %.4f]", pairs, lo5, hi5, lo0, hi0);
  return o;
}

Outcome stable_rank_algebra() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0, 1);
  auto rnd = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
  };
  for (int rep = 0; rep < 100; ++rep) {
    Matrix m = rnd(5 + rep % 40, 1) * rnd(1, 2 + rep % 19);
    double got = stable_rank(m).gamma;
    note(o, std::abs(got - 1.0) <= 1e-9, strf("rank-1 #%d: gamma %.12g", rep, got));
  }
  for (int l : {2, 5, 10, 20}) {
    double got = stable_rank(Matrix::Identity(l, l)).gamma;
    note(o, std::abs(got - l) <= 1e-9, strf("identity L=%d: gamma %.12g", l, got));
  }
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Matrix m = rnd(50, 20);
    double got = stable_rank(m).gamma, want = oracle::stable_rank_dense(m);
    worst = std::max(worst, std::abs(got - want));
    note(o, std::abs(got - want) <= 1e-6, strf("random #%d: %.10g vs %.10g", rep, got, want));
  }
  if (o.ok) o.detail = strf("rank-1, identity, 100 random 50x20 (max |diff| %.2e)", worst);
  return o;
}

Outcome leak_detection() {
  Outcome o;
  auto sc = scenario("leak");
  Timestamp event = 0;
  for (auto& e : sc.events)
    if (e.kind == ScenarioEventKind::Leak) event = e.t;
  auto points = monitor_scenario(sc, 20, 1);
  std::size_t pre = 0, pre_drift = 0;
  bool flagged = false;
  std::string around;
  double best_e = 0, best_g = 1;
  for (auto& p : points) {
    if (p.t <= event) {
      ++pre;
      pre_drift += p.cls == EventClass::Drift;
    } else if (p.t <= event + 2 * 60 + 60) {
      // the snapshot holding the event plus the next two
      flagged |= p.cls == EventClass::Global;
      around += strf(" t=%lld E=%.3g g=%.3f %s;", static_cast<long long>(p.t), p.energy, p.gamma_inv,
                    std::string(to_string(p.cls)).c_str());
      if (p.energy > best_e) best_e = p.energy, best_g = p.gamma_inv;
    }
  }
  double frac = pre ? static_cast<double>(pre_drift) / static_cast<double>(pre) : 0.0;
  note(o, flagged, "no GLOBAL near the leak:" + around);
  note(o, frac >= 0.95, strf("pre-event DRIFT fraction %.3f", frac));
  if (o.ok) o.detail = strf("GLOBAL after leak (peak E=%.3g, 1/gamma=%.3f); pre-event DRIFT %.3f", best_e, best_g, frac);
  else o.detail += strf("; pre-event DRIFT %zu/%zu", pre_drift, pre);
  return o;
}

Outcome cut_separation() {
  Outcome o;
  auto cut_time = [](const Scenario& sc) { return sc.events.at(0).t; };
  auto par = scenario("parallel_cut");
  auto pp = monitor_scenario(par, 20, 1);
  for (auto& p : pp)
    if (p.t > cut_time(par))
      note(o, p.cls != EventClass::Global, strf("parallel cut flagged GLOBAL at t=%lld", static_cast<long long>(p.t)));
  auto sole = scenario("barbell_cut");
  auto sp = monitor_scenario(sole, 20, 1);
  std::vector<double> drift;
  double peak = 0;
  for (auto& p : sp) {
    if (p.t <= cut_time(sole)) drift.push_back(p.energy);
    else if (p.t <= cut_time(sole) + 180) peak = std::max(peak, p.energy);
  }
  double med = drift.empty() ? 0.0 : median(drift);
  note(o, !drift.empty() && peak >= 10 * med, strf("sole bridge peak %.3g vs drift median %.3g", peak, med));
  if (o.ok) o.detail = strf("parallel cut never GLOBAL; sole bridge peak %.3g = %.0fx drift median", peak, peak / med);
  return o;
}

Outcome calibration() {
  Outcome o;
  double fa = false_alarm_probability(1.0, 3.5e-2);
  note(o, fa < 1.36e-7, strf("false alarm %.3g", fa));
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> g(0.5, 2.0);
  std::vector<DetectionPoint> h(10000);
  for (auto& p : h) p.energy = g(rng);
  auto r = calibrate(h, false, std::nullopt);
  note(o, std::abs(r.shape - 0.5) <= 0.1, strf("fitted shape %.4f", r.shape));
  if (o.ok) o.detail = strf("false alarm %.3g; shape %.4f scale %.4f", fa, r.shape, r.scale);
  return o;
}

Outcome landmark_quality() {
  Outcome o;
  std::vector<double> s1_lazy, s1_top;
  std::string s2s;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto snap = snapshot_of(gen_topology({.kind = TopologyKind::ScaleFree, .size = 10000, .seed = seed}));
    SelectOptions so;
    so.count = 20;
    so.seed = seed;
    auto lazy = select_landmarks(*snap, LandmarkMethod::LazyWalk, so);
    auto top = select_landmarks(*snap, LandmarkMethod::TopDegree, so);
    s1_lazy.push_back(lazy.s1);
    s1_top.push_back(top.s1);
    note(o, lazy.s2 > top.s2, strf("graph %llu: lazy S2 %.3f vs top-degree %.3f", static_cast<unsigned long long>(seed),
                                  lazy.s2, top.s2));
    s2s += strf(" %.2f/%.2f", lazy.s2, top.s2);
  }
  double ml = median(s1_lazy), mt = median(s1_top);
  note(o, ml >= mt, strf("median S1 lazy %.4f vs top-degree %.4f", ml, mt));
  if (o.ok) o.detail = strf("S2 lazy/top:%s; median S1 %.3f vs %.3f", s2s.c_str(), ml, mt);
  return o;
}

Outcome ingest_conservation() {
  Outcome o;
  std::mt19937_64 rng(31337);
  RouteTable rt;
  AsGraph g;
  std::uniform_int_distribution<Asn> as(1, 400);
  std::uniform_int_distribution<int> len(8, 32), hops(1, 6), peers(0, 24);
  std::vector<std::pair<Asn, Ipv4Prefix>> live;
  auto recompute_and_compare = [&](std::size_t at) {
    std::map<std::pair<Asn, Asn>, std::uint64_t> shadow;
    for (auto& [key, path] : rt.routes) {
      auto p = dedup_path(path);
      for (std::size_t i = 1; i < p.size(); ++i) shadow[edge_key(p[i - 1], p[i])] += key.second.addresses();
    }
    std::size_t bad = 0;
    for (auto& [k, c] : shadow) bad += g.edge_count(k.first, k.second).value_or(0) != c;
    bad += g.edge_count() != shadow.size();
    note(o, bad == 0, strf("%zu mismatched edges after %zu records", bad, at));
  };
  const std::size_t total = 100000;
  for (std::size_t i = 0; i < total; ++i) {
    FeedRecord r;
    r.t = static_cast<Timestamp>(i / 100);
    if (!live.empty() && rng() % 3 == 0) {
      auto k = rng() % live.size();
      r.peer = live[k].first;
      r.kind = RecordKind::Withdraw;
      r.prefix = live[k].second;
      live[k] = live.back();
      live.pop_back();
    } else {
      r.kind = RecordKind::Announce;
      r.peer = static_cast<Asn>(1 + peers(rng));
      auto l = static_cast<std::uint8_t>(len(rng));
      r.prefix = Ipv4Prefix::make(static_cast<std::uint32_t>(rng()), l);
      r.as_path.push_back(r.peer);
      for (int h = hops(rng); h > 0; --h) {
        r.as_path.push_back(as(rng));
        if (rng() % 8 == 0) r.as_path.push_back(r.as_path.back());  // prepending
      }
      live.emplace_back(r.peer, r.prefix);
    }
    apply_record(rt, g, r);
    if ((i + 1) % 20000 == 0) recompute_and_compare(i + 1);
  }
  if (o.ok) o.detail = strf("%zu records, %zu edges, %zu live routes", total, g.edge_count(), rt.routes.size());
  return o;
}

Outcome reroute_plan_diff() {
  Outcome o;
  auto [s0, s1] = fixtures::reroute_fixture();
  auto pd = plan_diff(s0, s1, 1, 8, 0.5);
  double sum = pd.diff.sum();
  note(o, std::abs(sum) <= 1e-8, strf("diff sum %.3g", sum));
  note(o, !pd.movers.empty() && pd.movers[0].first == 3,
       strf("top mover AS %u", pd.movers.empty() ? 0u : static_cast<unsigned>(pd.movers[0].first)));
  if (o.ok) o.detail = strf("sum %.2e, top mover AS 3 (shift %+.4f)", sum, pd.movers[0].second);
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  std::vector<Criterion> all{
      {1, "closed-form curvature", 5, closed_forms},
      {2, "exact OT vs basis enumeration", 30, ot_oracle},
      {3, "curvature bounds on random graphs", 120, curvature_bounds},
      {4, "stable-rank algebra", 10, stable_rank_algebra},
      {5, "synthetic leak detected as GLOBAL", 600, leak_detection},
      {6, "local/global cut separation", 300, cut_separation},
      {7, "calibration arithmetic", 10, calibration},
      {8, "landmark quality direction", 600, landmark_quality},
      {9, "ingest conservation", 60, ingest_conservation},
      {10, "plan-diff zero-sum and reroute", 5, reroute_plan_diff},
  };
  int failed = 0;
  for (auto& c : all) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) note(out, false, strf("runtime %.1fs over %.0fs limit", secs, c.limit_s));
    if (out.detail.size() > 600) out.detail = out.detail.substr(0, 600) + " ...";
    std::printf("%s %2d %s: %s [%.2fs / %.0fs]\n", out.ok ? "PASS" : "FAIL", c.id, c.name.c_str(), out.detail.c_str(),
                secs, c.limit_s);
    std::fflush(stdout);
    failed += !out.ok;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed ? 1 : 0;
}
