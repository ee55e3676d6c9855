#include <benchmark/benchmark.h>

#include "trussgrasp/autoencoder.hpp"
#include "trussgrasp/knn.hpp"
#include "trussgrasp/patch.hpp"
#include "trussgrasp/rng.hpp"
#include "trussgrasp/scene.hpp"

using namespace trussgrasp;

namespace {

SceneState pile_scene() {
  std::vector<TrussModel> ts;
  for (int i = 0; i < 10; ++i) {
    ts.push_back(generate_truss(derive_seed(1, i)));
    ts.back().id = i;
  }
  return build_scene(ts, Layout::pile(10), 1);
}

PointCloud noisy_plane(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-0.2, 0.2), y = rng.uniform(-0.2, 0.2);
    const double z = rng.bernoulli(0.7) ? 0.75 + rng.normal(0, 0.002) : rng.uniform(0.5, 0.75);
    c.points.push_back({x, y, z});
  }
  return c;
}

GraspPatch random_patch(Rng& rng) {
  GraspPatch p = GraspPatch::background(128);
  p.empty = false;
  for (auto& v : p.values) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return p;
}

}  // namespace

static void BM_RenderSurvey(benchmark::State& state) {
  const SceneState s = pile_scene();
  const auto cam = survey_camera();
  const auto intr = survey_intrinsics();
  for (auto _ : state) benchmark::DoNotOptimize(render_depth(s, cam, intr));
}
BENCHMARK(BM_RenderSurvey)->Unit(benchmark::kMillisecond);

static void BM_Ransac(benchmark::State& state) {
  const PointCloud c = noisy_plane(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_plane_ransac(c, 0.01));
}
BENCHMARK(BM_Ransac)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_ExtractPatch(benchmark::State& state) {
  const PointCloud c = noisy_plane(20000, 3);
  const GraspPose g{{0, 0, 0.75}, 0.4, std::nullopt, Frame::Camera};
  for (auto _ : state) benchmark::DoNotOptimize(extract_patch(c, g));
}
BENCHMARK(BM_ExtractPatch)->Unit(benchmark::kMicrosecond);

static void BM_KnnScore(benchmark::State& state) {
  Rng rng(4);
  KnnStore store;
  store.k = 10;
  for (int i = 0; i < state.range(0); ++i) {
    Latent l(Autoencoder::kLatent);
    for (Eigen::Index j = 0; j < l.size(); ++j) l[j] = rng.normal(0, 1);
    store.entries.push_back({l, rng.bernoulli(0.5)});
  }
  Latent q = store.entries.front().latent * 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(knn_score(store, q));
}
BENCHMARK(BM_KnnScore)->Arg(1000)->Arg(4000)->Unit(benchmark::kMicrosecond);

static void BM_Encode(benchmark::State& state) {
  Rng rng(5);
  std::vector<GraspPatch> patches;
  for (int i = 0; i < 64; ++i) patches.push_back(random_patch(rng));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  const Autoencoder ae = train_autoencoder(patches, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(ae.encode(patches[0]));
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
