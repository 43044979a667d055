// Acceptance run: one PASS/FAIL line per criterion with its wall time.
// Exit status is 0 only if every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xmurf/xmurf.hpp"

namespace fs = std::filesystem;
using namespace xmurf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> body;
};

// Matrices kept for the invariant sweep, with the forest and data that produced them.
struct Produced {
  std::string origin;
  forest::Forest forest;
  Dataset data;
  ProximityMatrix p;
};
std::vector<Produced> produced;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1 ----

Outcome jaccard_example() {
  const forest::PathSet a{{0, 1, 3}};
  const forest::PathSet b{{0, 1, 4, 7}};
  const double v = forest::path_proximity_tree(a, b);
  return {v == 0.4, "Jaccard = " + fmt("%.17g", v)};
}

// ---- 2 ----

double normal_cdf_integrated(double z) {
  // Composite Simpson from 0 to |z| of the standard normal density.
  const int n = 2000;
  const double a = std::abs(z);
  const double h = a / n;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
  double s = pdf(0.0) + pdf(a);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * pdf(k * h);
  const double half = s * h / 3.0;
  return z >= 0 ? 0.5 + half : 0.5 - half;
}

Outcome normal_cdf_grid() {
  double worst = 0.0;
  for (int k = 0; k <= 600; ++k) {
    const double z = -3.0 + k * 0.01;
    worst = std::max(worst, std::abs(forest::noise_cdf(forest::NoiseKind::normal, z) - normal_cdf_integrated(z)));
  }
  return {worst <= 1e-3, "max abs error " + fmt("%.2e", worst) + " over 601 points"};
}

// ---- 3 ----

Outcome noise_conservation() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> count(1, 100000);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_int_distribution<int> kind(0, static_cast<int>(forest::kNoiseKindCount) - 1);
  int bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const int real = count(rng);
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const double tau = lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double p = forest::noise_cdf(static_cast<forest::NoiseKind>(kind(rng)),
                                       forest::standardize(tau, lo, hi));
    const auto [l, r] = forest::estimate_noise_children(real, p);
    if (l + r != static_cast<double>(real) || l < 0.0 || r < 0.0) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " of 10000 triples violate noise_left + noise_right = real_count"};
}

// ---- 4 ----

double choose2(double n) { return n * (n - 1.0) / 2.0; }

double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, n] : cells) index += choose2(n);
  for (const auto& [k, n] : ra) sa += choose2(n);
  for (const auto& [k, n] : rb) sb += choose2(n);
  const double expected = sa * sb / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  return max_index == expected ? 1.0 : (index - expected) / (max_index - expected);
}

Dataset blobs(std::uint64_t seed, std::vector<int>& truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double s = 10.0 / std::sqrt(2.0);  // centroids s*e_k, pairwise 10 sigma
  Dataset d;
  for (int q = 0; q < 5; ++q) d.feature_names.push_back("x" + std::to_string(q));
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 50; ++i) {
      std::vector<double> x(5);
      for (int q = 0; q < 5; ++q) x[static_cast<std::size_t>(q)] = g(rng) + (q == k ? s : 0.0);
      d.append("b" + std::to_string(k) + "_" + std::to_string(i), x);
      truth.push_back(k);
    }
  return d;
}

Outcome blob_recovery() {
  std::string aris;
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::vector<int> truth;
    auto data = blobs(seed, truth);
    auto f = forest::fit(data, 100, seed, 0);
    auto p = forest::proximity_matrix(f, data, 0);
    const double ari = adjusted_rand(truth, ordering::cut_tree(ordering::linkage(p), 3));
    worst = std::min(worst, ari);
    aris += (aris.empty() ? "" : " ") + fmt("%.3f", ari);
    produced.push_back({"blobs seed " + std::to_string(seed), std::move(f), std::move(data), std::move(p)});
  }
  return {worst >= 0.9, "min ARI " + fmt("%.3f", worst) + " (per seed: " + aris + ")"};
}

// ---- 5 ----

std::vector<int> walk_json(const nlohmann::json& tree, double x) {
  std::map<int, const nlohmann::json*> by_id;
  for (const auto& n : tree.at("nodes")) by_id[n.at("id").get<int>()] = &n;
  std::vector<int> path{0};
  const nlohmann::json* n = by_id.at(0);
  while (!n->at("left").is_null()) {
    const int next = x <= n->at("threshold").get<double>() ? n->at("left").get<int>() : n->at("right").get<int>();
    path.push_back(next);
    n = by_id.at(next);
  }
  return path;
}

Outcome small_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  int mismatches = 0, cases = 0;
  for (std::size_t m = 2; m <= 6; ++m)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Dataset d;
      d.feature_names = {"x"};
      for (std::size_t i = 0; i < m; ++i) {
        // some duplicated values to exercise equal paths
        const double v = (i > 0 && seed % 4 == 0) ? d.values[i - 1] : std::round(u(rng) * 4) / 4;
        d.append("r" + std::to_string(i), std::vector<double>{v});
      }
      auto f = forest::fit(d, 1, seed, 1);
      const auto p = forest::proximity_matrix(f, d, 1);
      const auto j = nlohmann::json::parse(forest::forest_to_json(f).dump());
      const auto& tree = j.at("trees").at(0);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
          auto pa = walk_json(tree, d.at(a, 0));
          auto pb = walk_json(tree, d.at(b, 0));
          std::set<int> sa(pa.begin(), pa.end()), common;
          for (int id : pb)
            if (sa.count(id)) common.insert(id);
          const double inter = static_cast<double>(common.size());
          const double expect = inter / (static_cast<double>(pa.size() + pb.size()) - inter);
          if (p(a, b) != expect) ++mismatches;
        }
      ++cases;
      produced.push_back({"small M=" + std::to_string(m) + " seed " + std::to_string(seed), std::move(f), std::move(d), p});
    }
  return {mismatches == 0, std::to_string(cases) + " forests, " + std::to_string(mismatches) + " mismatching cells"};
}

// ---- 6 ----

LabeledDataset overlapping_classes(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.5);
  LabeledDataset d;
  d.base.feature_names = {"a", "b", "c", "d"};
  const std::vector<std::string> names = {"brake", "cruise", "cut_in"};
  for (std::size_t c = 0; c < names.size(); ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> x(4);
      for (std::size_t q = 0; q < 4; ++q) x[q] = g(rng) + (q == c ? 3.0 : 0.0);
      d.base.append(names[c] + std::to_string(i), x);
      d.labels.push_back(names[c]);
    }
  return d;
}

Outcome classifier_monotone() {
  const std::vector<double> ratios = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto train = overlapping_classes(60, 6);
  const auto held_out = overlapping_classes(60, 66);
  const auto f = classify::fit_classifier(train, 100, 6, 0);
  const auto th = classify::oob_thresholds(f, train);
  bool ok = true;
  std::string counts;
  for (const Dataset* data : {&train.base, &held_out.base}) {
    std::vector<std::vector<bool>> assigned;
    for (double r : ratios) {
      const auto preds = classify::predict_all(f, th, *data, r, 0);
      std::vector<bool> a;
      for (const auto& p : preds) a.push_back(p.label.has_value());
      counts += (counts.empty() ? "" : " ") + std::to_string(std::count(a.begin(), a.end(), true));
      assigned.push_back(std::move(a));
    }
    counts += " /" + std::to_string(data->rows()) + ";";
    ok = ok && std::all_of(assigned[0].begin(), assigned[0].end(), [](bool b) { return b; });
    for (std::size_t hi = 0; hi < ratios.size(); ++hi)
      for (std::size_t lo = 0; lo < hi; ++lo)
        for (std::size_t i = 0; i < data->rows(); ++i)
          if (assigned[hi][i] && !assigned[lo][i]) ok = false;
  }
  return {ok, "assigned at ratios 0..1 (train; held-out): " + counts};
}

// ---- 7 ----

Outcome simulator_physics() {
  const double delta = 0.1;
  const double radius = sim::kWheelbase / std::tan(delta);
  sim::VehicleState s;
  s.v = 10.0;
  double worst = 0.0;
  while (s.psi < 2.0 * std::numbers::pi) {
    s = sim::one_track_step(s, delta, 0.0, 0.001).state;
    worst = std::max(worst, std::abs(std::hypot(s.x, s.y - radius) - radius) / radius);
  }

  sim::RoadConfig road;
  road.lanes = 3;
  road.max_per_lane = 4;
  std::uint64_t seed = 0;
  while (sim::init_scene(road, seed).vehicles.size() != 12) ++seed;
  sim::SimParams params;
  params.duration = 60.0;
  params.seed = seed;
  const auto tr = sim::run_simulation(road, params, sim::init_scene(road, seed));

  const double eps = sim::kGravity * tr.dt * tr.dt;
  long residual_violations = 0;
  for (std::size_t t = 0; t + 1 < tr.steps(); ++t)
    for (std::size_t i = 0; i < tr.vehicles(); ++i) {
      const auto& a = tr.states[t][i];
      const auto& b = tr.states[t + 1][i];
      if (std::abs(b.x - a.x - a.v * tr.dt) > eps) ++residual_violations;
    }

  long swaps = 0;
  for (std::size_t t = 0; t + 1 < tr.steps(); ++t)
    for (std::size_t i = 0; i < tr.vehicles(); ++i)
      for (std::size_t j = i + 1; j < tr.vehicles(); ++j) {
        const auto &a0 = tr.states[t][i], &b0 = tr.states[t][j];
        const auto &a1 = tr.states[t + 1][i], &b1 = tr.states[t + 1][j];
        if (a0.lane != b0.lane || a1.lane != b1.lane || a0.lane != a1.lane) continue;
        if ((a0.x < b0.x) == (a1.x < b1.x)) continue;
        const bool collided = std::any_of(tr.collisions.begin(), tr.collisions.end(), [&](const auto& c) {
          return c.first == static_cast<int>(i) && c.second == static_cast<int>(j);
        });
        if (!collided) ++swaps;
      }

  const bool ok = worst < 0.01 && tr.vehicles() == 12 && residual_violations == 0 && swaps == 0;
  return {ok, "circle error " + fmt("%.2e", worst) + "; " + std::to_string(tr.vehicles()) + " vehicles, " +
                  std::to_string(tr.steps()) + " steps, " + std::to_string(residual_violations) +
                  " residual violations, " + std::to_string(swaps) + " unexplained swaps, " +
                  std::to_string(tr.lane_changes.size()) + " lane changes"};
}

// ---- 8 ----

// Every interval [s, e] is tested for being a maximal chain of triggered
// samples whose consecutive gaps are shorter than 1 s.
std::vector<scenario::ThwWindow> brute_windows(const std::vector<double>& thw, double dt) {
  const std::size_t n = thw.size();
  std::vector<std::size_t> trig;
  for (std::size_t t = 0; t < n; ++t)
    if (thw[t] <= 1.0) trig.push_back(t);
  auto close = [&](std::size_t a, std::size_t b) { return static_cast<double>(b - a) * dt < 1.0; };
  std::vector<scenario::ThwWindow> out;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t e = s; e < n; ++e) {
      if (!(thw[s] <= 1.0 && thw[e] <= 1.0)) continue;
      bool chain = true, maximal = true;
      std::size_t prev = s;
      for (std::size_t t : trig) {
        if (t < s) maximal = maximal && !close(t, s);
        else if (t > e) maximal = maximal && !close(e, t);
        else if (t > s) {
          chain = chain && close(prev, t);
          prev = t;
        }
      }
      if (!chain || !maximal) continue;
      scenario::ThwWindow w{s, e, s, scenario::kNoThreat};
      for (std::size_t t = s; t <= e; ++t)
        if (thw[t] < w.thw_min) {
          w.thw_min = thw[t];
          w.changepoint = t;
        }
      if (w.thw_min <= 0.8) out.push_back(w);
    }
  return out;
}

Outcome detector_oracle() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> level(0.3, 2.0);
  std::uniform_int_distribution<int> hold(1, 40), pick(0, 9);
  int mismatches = 0, windows = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double dt = trial % 2 ? 0.1 : 0.05;
    std::vector<double> thw;
    while (thw.size() < 150) {
      const int r = pick(rng);
      const double v = r == 0 ? 1.0 : r == 1 ? 0.8 : r == 2 ? scenario::kNoThreat : level(rng);
      for (int k = hold(rng); k > 0 && thw.size() < 150; --k) thw.push_back(v);
    }
    const auto got = scenario::detect_windows(thw, dt);
    windows += static_cast<int>(got.size());
    if (got != brute_windows(thw, dt)) ++mismatches;
  }
  return {mismatches == 0, "100 series, " + std::to_string(windows) + " windows, " +
                               std::to_string(mismatches) + " mismatching series"};
}

// ---- 9 ----

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

pipeline::PipelineConfig pipeline_config(const fs::path& dir, unsigned threads) {
  pipeline::PipelineConfig c;
  c.seed = 9;
  c.threads = threads;
  c.work_dir = dir.string();
  // dense traffic with frequent speed redraws, sized for about 200 scenarios
  c.road.max_per_lane = 10;
  c.sim.runs = 5;
  c.sim.duration = 1200.0;
  c.sim.retarget_interval = 10.0;
  c.xmurf.trees = 100;
  c.classify.trees = 100;
  c.classify.ratio = 0.75;
  return c;
}

std::size_t run_pipeline(const pipeline::PipelineConfig& c) {
  std::ostringstream log;
  pipeline::cmd_simulate(c, log);
  pipeline::cmd_extract(c, log);
  pipeline::cmd_cluster(c, log);
  pipeline::cmd_order(c, log);
  const std::size_t m = load_dataset(pipeline::path_of(c, "scenarios")).rows();
  const nlohmann::json ranges = nlohmann::json::array(
      {{{"start", 0}, {"end", m / 2 - 1}, {"label", "near"}}, {{"start", m / 2}, {"end", m - 1}, {"label", "far"}}});
  detail::write_file(pipeline::path_of(c, "ranges"), ranges.dump(1) + "\n");
  pipeline::cmd_render(c, log);
  pipeline::cmd_label(c, log);
  pipeline::cmd_train(c, log);
  pipeline::cmd_classify(c, log);
  return m;
}

Outcome pipeline_determinism(const fs::path& root) {
  const auto a_dir = root / "a";
  const auto b_dir = root / "b";
  // One run single-threaded, one on every core: the outputs may not depend on either.
  const auto ca = pipeline_config(a_dir, 1);
  const auto cb = pipeline_config(b_dir, 0);
  const std::size_t m = run_pipeline(ca);
  run_pipeline(cb);
  const auto a = snapshot(a_dir);
  const auto b = snapshot(b_dir);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  const bool same_names = a.size() == b.size();

  produced.push_back({"pipeline", forest::load_forest(pipeline::path_of(ca, "forest")),
                      load_dataset(pipeline::path_of(ca, "scenarios")),
                      load_matrix(pipeline::path_of(ca, "proximity"), MatrixFormat::raw)});
  const bool ok = same_names && differing == 0 && m >= 2;
  return {ok, "M=" + std::to_string(m) + ", " + std::to_string(a.size()) + " files compared, " +
                  std::to_string(differing) + " differ"};
}

// ---- 10 ----

Outcome proximity_invariants() {
  long bad = 0, cells = 0;
  for (const auto& pr : produced) {
    const auto& p = pr.p;
    const std::size_t m = p.size();
    if (m != pr.data.rows()) {
      ++bad;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (p(i, i) != 1.0) ++bad;
      for (std::size_t j = i + 1; j < m; ++j) {
        ++cells;
        const double v = p(i, j);
        if (v != p(j, i) || !(v > 0.0) || v > 1.0) ++bad;
        if (v < forest::root_sharing_bound(pr.forest, pr.data.row(i), pr.data.row(j))) ++bad;
      }
    }
  }
  return {bad == 0 && !produced.empty(), std::to_string(produced.size()) + " matrices, " + std::to_string(cells) +
                                             " pairs, " + std::to_string(bad) + " violations"};
}

}  // namespace

int main() {
  set_warning_sink([](std::string_view) {});
  const fs::path work = fs::temp_directory_path() / ("xmurf_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(work);

  const std::vector<Check> checks = {
      {1, "path proximity example 2/5", 0.001, jaccard_example},
      {2, "normal CDF approximation on 601 points", 1.0, normal_cdf_grid},
      {3, "noise conservation on 10^4 triples", 1.0, noise_conservation},
      {4, "three 5-D blobs recovered by a 3-cluster cut", 60.0, blob_recovery},
      {5, "small forests match a walk of the serialized tree", 1.0, small_oracle},
      {6, "classifier assigned sets shrink with the ratio", 10.0, classifier_monotone},
      {7, "simulator physics", 30.0, simulator_physics},
      {8, "detector matches brute-force window search", 5.0, detector_oracle},
      {9, "pipeline outputs byte-identical across two runs", 300.0, [&] { return pipeline_determinism(work); }},
      {10, "proximity invariants on matrices from 4, 5, 9", 60.0, proximity_invariants},
  };

  int failed = 0;
  for (const auto& c : checks) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d  %-52s %9.4f s (limit %g s)%s  %s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), s,
                c.limit_s, in_time ? "" : " TOO SLOW", o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work);
  std::printf("%d of %zu criteria passed\n", static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
