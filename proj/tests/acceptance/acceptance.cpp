// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "trussgrasp/harness.hpp"

using namespace trussgrasp;
using testing::kPi;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr double kTenMinutes = 600.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double pct(double fraction) { return 100.0 * fraction; }

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.seed = kSeed;
  return cfg;
}

// Shared by criteria 1 to 3.
struct ModelCache {
  std::optional<RankingModel> model;
  double seconds = 0.0;

  const RankingModel& get() {
    if (!model) {
      Stopwatch w;
      model = bootstrap_model(base_config());
      seconds = w.seconds();
      std::cerr << fmt("  (offline model trained in %.1f s)\n", seconds);
    }
    return *model;
  }
};

Verdict strategy_ordering(ModelCache& models) {
  ExperimentConfig cfg = base_config();
  cfg.experiment = ExperimentKind::Isolated;
  cfg.trusses = 30;
  cfg.attempts = {10, 10, 10};
  const RankingModel& model = models.get();
  Stopwatch w;
  const StatsReport r = run_experiment(cfg, &model);
  const double secs = w.seconds() + models.seconds;
  const double rnd = r.find("isolated", "random")->failure_rate();
  const double ctr = r.find("isolated", "center")->failure_rate();
  const double rnk = r.find("isolated", "ranking")->failure_rate();
  const bool trials = r.find("isolated", "random")->trials >= 300 &&
                      r.find("isolated", "center")->trials >= 300 &&
                      r.find("isolated", "ranking")->trials >= 300;
  const bool order = rnk < ctr && ctr < rnd;
  const bool gaps = pct(ctr - rnk) >= 5.0 && pct(rnd - ctr) >= 5.0;
  const bool targets = std::abs(pct(rnd) - 47.6) <= 10.0 && std::abs(pct(ctr) - 20.0) <= 10.0 &&
                       std::abs(pct(rnk) - 7.2) <= 10.0;
  return {trials && order && gaps && targets && secs < kTenMinutes,
          fmt("random %.1f%%, center %.1f%%, ranking %.1f%% over %llu trials each, %.0f s",
              pct(rnd), pct(ctr), pct(rnk),
              static_cast<unsigned long long>(r.find("isolated", "random")->trials), secs)};
}

Verdict clutter_robustness(ModelCache& models) {
  const RankingModel& model = models.get();
  ExperimentConfig iso = base_config();
  iso.strategies = {Strategy::Ranking};
  iso.trusses = 25;
  iso.attempts.ranking = 10;
  ExperimentConfig clt = iso;
  clt.experiment = ExperimentKind::Clutter;
  const StatsReport ri = run_experiment(iso, &model);
  const auto* a = ri.find("isolated", "ranking");
  const StatsReport rc = run_experiment(clt, &model);
  const auto* c = rc.find("clutter", "ranking");
  const double ia = a->failure_rate();
  const double cr = c->failure_rate();
  return {c->trials >= 250 && std::abs(pct(cr - ia)) <= 10.0,
          fmt("clutter %.1f%% vs isolated %.1f%% over %llu trials", pct(cr), pct(ia),
              static_cast<unsigned long long>(c->trials))};
}

Verdict pile_clearing(ModelCache& models) {
  const RankingModel& model = models.get();
  ExperimentConfig cfg = base_config();
  cfg.experiment = ExperimentKind::Pile;
  cfg.strategies = {Strategy::Ranking};
  cfg.pile_size = 10;
  cfg.pile_repetitions = 10;
  Stopwatch w;
  const StatsReport r = run_experiment(cfg, &model);
  const double secs = w.seconds();
  int cleared = 0, first = 0, trusses = 0, repeats = 0;
  for (const auto& p : r.piles) {
    cleared += p.cleared;
    first += p.first_attempt_successes();
    trusses += p.trusses;
    repeats = std::max(repeats, p.max_consecutive_repeats);
  }
  const double rate = trusses ? double(first) / trusses : 0.0;
  return {cleared == 10 && rate >= 0.85 && repeats <= 3 && secs < kTenMinutes,
          fmt("%d/10 piles cleared, first attempt %d/%d (%.0f%%), max repeats %d, %.0f s",
              cleared, first, trusses, pct(rate), repeats, secs)};
}

Verdict metric_reproduction() {
  const double a = compute_metrics(172, 32, 14, 72).f1;
  const double b = f1_score(0.935, 0.967);
  return {std::abs(a - 0.88) <= 0.005 && std::abs(b - 0.95) <= 0.005,
          fmt("F1 %.4f and %.4f", a, b)};
}

Verdict ransac_oracle() {
  Rng rng(derive_seed(kSeed, 5));
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 3 + rng.below(10);
    // Mix of near-planar and scattered clouds.
    PointCloud cloud = testing::random_cloud(rng, n, Vec3(0, 0, 1), 0.05);
    if (i % 2 == 0)
      for (auto& p : cloud.points)
        if (rng.bernoulli(0.6)) p.z() = 1.0 + rng.uniform(-0.008, 0.008);
    const auto fit = fit_plane_ransac(cloud, 0.01, 1000, derive_seed(kSeed, 5, i));
    agree += fit.exhaustive && fit.consensus_count == testing::brute_force_max_inliers(cloud.points, 0.01);
  }
  return {agree == 100, fmt("%d/100 clouds match brute force", agree)};
}

Verdict geometry_round_trip() {
  const auto intr = survey_intrinsics();
  Rng rng(derive_seed(kSeed, 6));
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec2 px(rng.uniform(-0.5, intr.width - 0.5), rng.uniform(-0.5, intr.height - 0.5));
    const double z = rng.uniform(0.1, 2.0);
    const Vec3 p = deproject(px, z, intr);
    const Projection q = project(p, intr);
    const Vec3 back = deproject(q.pixel, q.depth, intr);
    worst = std::max({worst, (back - p).norm(), (q.pixel - px).norm(), std::abs(q.depth - z)});
  }
  return {worst <= 1e-9, fmt("worst deviation %.2e over 1e5 points", worst)};
}

Verdict patch_suite() {
  Rng rng(derive_seed(kSeed, 7));
  const PatchParams params;
  std::size_t shape_ok = 0, member_ok = 0;
  double diff_sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const GraspPose g{{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.3, 1.0)},
                      rng.uniform(0.0, kPi), std::nullopt, Frame::Camera};
    const PointCloud cloud = i % 2 ? testing::random_cloud(rng, 300, g.position, 0.03)
                                   : testing::ridge_cloud(rng, g.position, rng.uniform(0, kPi));
    const GraspPatch p = extract_patch(cloud, g, params);
    bool ok = p.resolution == 128 && p.values.size() == 128u * 128u;
    for (float v : p.values) ok = ok && v >= 0.0f && v <= 1.0f;
    shape_ok += ok;

    std::size_t expected = 0;
    const double c = std::cos(g.yaw), s = std::sin(g.yaw);
    for (const auto& q : cloud.points) {
      const Vec3 d = q - g.position;
      const double lx = c * d.x() + s * d.y(), ly = -s * d.x() + c * d.y();
      if (std::max({std::abs(lx), std::abs(ly), std::abs(d.z())}) <= params.d_r) ++expected;
    }
    member_ok += crop_cloud(cloud, g, params.d_r).size() == expected;

    const double theta = rng.uniform(-kPi, kPi);
    GraspPose turned = g;
    turned.yaw = g.yaw - theta;
    const GraspPatch r = extract_patch(rotate_cloud_yaw(cloud, theta, g.position), turned, params);
    double d = 0.0;
    for (std::size_t k = 0; k < p.values.size(); ++k) d += std::abs(p.values[k] - r.values[k]);
    diff_sum += d / static_cast<double>(p.values.size());
  }
  const double mad = diff_sum / n;
  return {shape_ok == n && member_ok == n && mad < 0.02,
          fmt("shape %zu/%d, membership %zu/%d, rotation MAD %.5f", shape_ok, n, member_ok, n, mad)};
}

Verdict autoencoder_learning() {
  const auto patches = testing::synthetic_patches(2000, derive_seed(kSeed, 8));
  TrainConfig cfg;
  cfg.seed = kSeed;
  const Autoencoder a = train_autoencoder(patches, cfg);
  const Autoencoder b = train_autoencoder(patches, cfg);
  const auto& h = a.history();
  const double ratio = h.validation_mse.back() / h.initial_validation_mse;

  Autoencoder probe(128, kSeed);
  std::vector<PooledPatch> batch;
  for (std::size_t i = 0; i < 16; ++i) batch.push_back(pool_patch(patches[i]));
  const auto g = probe.gradient(batch);
  Rng rng(derive_seed(kSeed, 8, 1));
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const auto i = static_cast<std::size_t>(rng.below(probe.parameter_count()));
    const double w = probe.parameter(i);
    const double step = 1e-5;
    probe.set_parameter(i, w + step);
    const double up = probe.loss(batch);
    probe.set_parameter(i, w - step);
    const double down = probe.loss(batch);
    probe.set_parameter(i, w);
    const double fd = (up - down) / (2 * step);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-7}));
  }
  const bool same = a.to_json() == b.to_json();
  return {ratio < 0.5 && worst < 1e-4 && same,
          fmt("validation MSE %.5f -> %.5f (x%.3f), gradient error %.2e, deterministic %s",
              h.initial_validation_mse, h.validation_mse.back(), ratio, worst, same ? "yes" : "no")};
}

Verdict noise_calibration() {
  const KeypointStudy s = study_keypoints(base_config(), 10000, kSeed);
  const double med = s.median_error_mm();
  const double drop = s.drop_rate();
  return {s.proposals >= 10000 && std::abs(med - 0.58) <= 0.1 && std::abs(pct(drop) - 2.0) <= 0.5,
          fmt("median %.3f mm, drop %.2f%% over %zu proposals", med, pct(drop), s.proposals)};
}

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict cli_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI binary given (--cli)"};
  const std::string args =
      " run --seed 42 --trusses 3 --attempts.random 4 --attempts.center 4 --attempts.ranking 4"
      " --offline_grasps 60 --train.epochs 3 --train.batch_size 64 -s /dev/null";
  std::string logs[2];
  for (int i = 0; i < 2; ++i) {
    const std::string path = "determinism_" + std::to_string(i) + ".jsonl";
    std::remove(path.c_str());
    const std::string cmd = "\"" + cli + "\"" + args + " -l " + path + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed: " + cmd};
    const auto text = slurp(path);
    if (!text) return {false, "no log written"};
    logs[i] = *text;
  }
  const auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
  return {!logs[0].empty() && logs[0] == logs[1],
          fmt("%zu bytes, %ld trials, identical %s", logs[0].size(), static_cast<long>(lines),
              logs[0] == logs[1] ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  std::string cli;
  std::vector<int> only;
  app.add_option("--cli", cli, "trussgrasp binary for the determinism check");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);

  ModelCache models;
  const std::map<int, std::function<Verdict()>> criteria{
      {1, [&] { return strategy_ordering(models); }},
      {2, [&] { return clutter_robustness(models); }},
      {3, [&] { return pile_clearing(models); }},
      {4, metric_reproduction},
      {5, ransac_oracle},
      {6, geometry_round_trip},
      {7, patch_suite},
      {8, autoencoder_learning},
      {9, noise_calibration},
      {10, [&] { return cli_determinism(cli); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << v.detail << std::endl;
  }
  return failed ? 1 : 0;
}
