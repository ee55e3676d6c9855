#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <set>

#include "support.hpp"
#include "trussgrasp/autoencoder.hpp"
#include "trussgrasp/error.hpp"
#include "trussgrasp/knn.hpp"
#include "trussgrasp/ranking.hpp"

using namespace trussgrasp;
using testing::kPi;

namespace {

GraspPose at(const Vec3& p, double yaw = 0.0) { return {p, yaw, std::nullopt, Frame::Camera}; }

PointCloud cloud_of(std::vector<Vec3> pts) {
  PointCloud c;
  c.points = std::move(pts);
  return c;
}

Latent vec(std::initializer_list<double> xs) {
  Latent l(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) l[i++] = x;
  return l;
}

GraspPatch random_patch(Rng& rng, int res) {
  GraspPatch p = GraspPatch::background(res);
  p.empty = false;
  for (auto& v : p.values) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return p;
}

TrainConfig small_train(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  return cfg;
}

const Autoencoder& small_model() {
  static const Autoencoder model = train_autoencoder(testing::synthetic_patches(300, 21), small_train(1));
  return model;
}

}  // namespace

TEST_SUITE("ranking") {

TEST_CASE("patch of a single point") {
  const Vec3 g(0.01, -0.02, 0.5);
  const GraspPatch p = extract_patch(cloud_of({g}), at(g));
  CHECK_FALSE(p.empty);
  int occupied = 0;
  for (int r = 0; r < p.resolution; ++r)
    for (int c = 0; c < p.resolution; ++c)
      if (p.at(r, c) < 1.0f) ++occupied;
  CHECK(occupied == 1);
  CHECK(p.at(64, 64) == 0.0f);

  const GraspPatch far = extract_patch(cloud_of({g + Vec3(0.03, 0, 0)}), at(g));
  CHECK(far.empty);
  CHECK(far == GraspPatch::background(128));
}

TEST_CASE("patch cell layout") {
  const PatchParams params;
  CHECK(patch_cell({0, 0, 0}, params) == std::array<int, 2>{64, 64});
  CHECK(patch_cell({0.019, 0, 0}, params)[1] == 124);
  CHECK(patch_cell({0, -0.0199, 0}, params)[0] == 0);
  CHECK(patch_cell({0.021, 0, 0}, params) == std::array<int, 2>{-1, -1});
}

TEST_CASE("rotating the grasp rotates the patch") {
  const GraspPatch a = extract_patch(cloud_of({{0, 0, 0.5}, {0, 0.01, 0.52}}), at({0, 0, 0.5}, kPi / 2));
  const GraspPatch b = extract_patch(cloud_of({{0, 0, 0.5}, {0.01, 0, 0.52}}), at({0, 0, 0.5}, 0.0));
  CHECK(a == b);
}

TEST_CASE("crop membership is the L-infinity ball") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const GraspPose g = at({rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.5}, rng.uniform(0, kPi));
    const PointCloud cloud = testing::random_cloud(rng, 100, g.position, 0.04);
    const auto kept = crop_cloud(cloud, g, 0.02);
    std::size_t expected = 0;
    const double c = std::cos(g.yaw), s = std::sin(g.yaw);
    for (const auto& p : cloud.points) {
      const Vec3 d = p - g.position;
      const Vec3 q(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
      if (std::max({std::abs(q.x()), std::abs(q.y()), std::abs(q.z())}) <= 0.02) ++expected;
    }
    CHECK(kept.size() == expected);
  }
}

TEST_CASE("patches are normalized") {
  for (const auto& p : testing::synthetic_patches(50, 4)) {
    CHECK(p.resolution == 128);
    CHECK(p.values.size() == 128u * 128u);
    CHECK_NOTHROW(p.validate());
    float lo = 1.0f;
    for (float v : p.values) lo = std::min(lo, v);
    CHECK(lo == 0.0f);
  }
  PatchParams bad;
  bad.d_r = 0.0;
  CHECK_THROWS_AS(extract_patch({}, at({0, 0, 1}), bad), Error);
}

TEST_CASE("augmentation") {
  GraspPatch flat = GraspPatch::background(32);
  std::fill(flat.values.begin(), flat.values.end(), 0.25f);
  for (const auto& p : augment(flat)) CHECK(p == flat);

  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const GraspPatch p = random_patch(rng, 32);
    CHECK(flip_ud(flip_ud(p)) == p);
    CHECK(flip_lr(flip_lr(p)) == p);
    CHECK(rot180(p) == flip_ud(flip_lr(p)));
    const auto four = augment(p);
    CHECK(four[0] == p);
    CHECK(four[1] == flip_ud(p));
    CHECK(four[2] == flip_lr(p));
    CHECK(four[3] == rot180(p));
    CHECK(flip_ud(p).at(0, 3) == p.at(31, 3));
    CHECK(flip_lr(p).at(3, 0) == p.at(3, 31));
  }
}

TEST_CASE("autoencoder gradient matches finite differences") {
  Autoencoder ae(128, 9);
  std::vector<PooledPatch> batch;
  for (const auto& p : testing::synthetic_patches(8, 10)) batch.push_back(pool_patch(p));
  const auto g = ae.gradient(batch);
  REQUIRE(g.size() == ae.parameter_count());
  Rng rng(11);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto i = static_cast<std::size_t>(rng.below(ae.parameter_count()));
    const double w = ae.parameter(i);
    const double h = 1e-5;
    ae.set_parameter(i, w + h);
    const double up = ae.loss(batch);
    ae.set_parameter(i, w - h);
    const double down = ae.loss(batch);
    ae.set_parameter(i, w);
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-7}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("pooled loss equals the pixel loss") {
  const Autoencoder& ae = small_model();
  for (const auto& p : testing::synthetic_patches(5, 12))
    CHECK(ae.loss({pool_patch(p)}) == doctest::Approx(ae.mse(p)).epsilon(1e-9));
}

TEST_CASE("autoencoder training") {
  const Autoencoder& ae = small_model();
  CHECK(ae.trained());
  const auto& h = ae.history();
  REQUIRE(h.train_mse.size() == 5);
  CHECK(h.train_mse.back() < h.train_mse.front());
  CHECK(h.validation_mse.back() < h.initial_validation_mse);
  CHECK(h.validation_samples == 90);

  const Autoencoder again = train_autoencoder(testing::synthetic_patches(300, 21), small_train(1));
  CHECK(again.to_json() == ae.to_json());

  TrainConfig zero = small_train(1);
  zero.epochs = 0;
  CHECK_THROWS_AS(train_autoencoder(testing::synthetic_patches(10, 1), zero), Error);
  CHECK_THROWS_AS(Autoencoder(128, 1).encode(GraspPatch::background(128)), Error);
}

TEST_CASE("encoding") {
  const Autoencoder& ae = small_model();
  const auto patches = testing::synthetic_patches(3, 13);
  CHECK(ae.encode(patches[0]) == ae.encode(patches[0]));
  const Latent bg = ae.encode(GraspPatch::background(128));
  CHECK(bg.size() == Autoencoder::kLatent);
  CHECK(bg.allFinite());

  GraspPatch lo = GraspPatch::background(128), hi = lo;
  Rng rng(14);
  for (std::size_t i = 0; i < lo.values.size(); ++i) {
    lo.values[i] = static_cast<float>(rng.uniform(0.0, 0.5));
    hi.values[i] = lo.values[i] + 0.5f;
  }
  CHECK((ae.encode(lo) - ae.encode(hi)).norm() > 0.0);

  const Autoencoder back = Autoencoder::from_json(ae.to_json());
  CHECK(back.encode(patches[1]) == ae.encode(patches[1]));
  CHECK(ae.decode(ae.encode(patches[2])).resolution == 128);
}

TEST_CASE("knn scoring examples") {
  KnnStore all_good;
  for (int i = 0; i < 10; ++i) all_good.entries.push_back({vec({double(i), 0}), 1});
  CHECK(knn_score(all_good, vec({0.5, 0.5})) == 1.0);

  KnnStore two{{{vec({1, 0}), 1}, {vec({-2, 0}), 0}}, 2};
  CHECK(knn_score(two, vec({0, 0})) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  KnnStore near_failure{{{vec({0, 0}), 0}}, 10};
  for (int i = 0; i < 9; ++i) near_failure.entries.push_back({vec({1.0 + i, 0}), 1});
  CHECK(knn_score(near_failure, vec({0, 0})) < 1e-6);

  CHECK_THROWS_AS(knn_score(KnnStore{}, vec({0, 0})), Error);
  KnnStore mismatch{{{vec({0, 0, 0}), 1}}, 1};
  CHECK_THROWS_AS(knn_score(mismatch, vec({0, 0})), Error);
}

TEST_CASE("knn scores stay in [0, 1]") {
  Rng rng(15);
  KnnStore s;
  s.k = 7;
  for (int i = 0; i < 60; ++i)
    s.entries.push_back({vec({rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)}), rng.bernoulli(0.4)});
  for (int i = 0; i < 200; ++i) {
    const double v = knn_score(s, vec({rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)}));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("refit") {
  const KnnStore one = refit(KnnStore{}, vec({1, 2}), 1);
  CHECK(one.size() == 1);
  Rng rng(16);
  for (int i = 0; i < 10; ++i) CHECK(knn_score(one, vec({rng.normal(0, 3), rng.normal(0, 3)})) == 1.0);

  const KnnStore twice = refit(one, vec({1, 2}), 1);
  CHECK(twice.size() == 2);
  CHECK(knn_score(twice, vec({0, 0})) == doctest::Approx(knn_score(one, vec({0, 0}))).epsilon(1e-12));

  for (int t = 0; t < 50; ++t) {
    KnnStore s;
    s.k = 5;
    for (int i = 0; i < 20; ++i) s.entries.push_back({vec({rng.normal(0, 1), rng.normal(0, 1)}), rng.bernoulli(0.6)});
    const Latent l = vec({rng.normal(0, 1), rng.normal(0, 1)});
    const double before = knn_score(s, l);
    if (before > 0.0) CHECK(knn_score(refit(s, l, 0), l) < before);
  }

  // More identical latents than k: a new failure still counts.
  KnnStore crowd;
  crowd.k = 4;
  for (int i = 0; i < 10; ++i) crowd.entries.push_back({vec({0.5, 0.5}), i < 8 ? 1 : 0});
  CHECK(knn_score(crowd, vec({0.5, 0.5})) == doctest::Approx(0.8));
  const KnnStore crowd2 = refit(crowd, vec({0.5, 0.5}), 0);
  CHECK(knn_score(crowd2, vec({0.5, 0.5})) == doctest::Approx(8.0 / 11.0));
  KnnStore reversed = crowd2;
  std::reverse(reversed.entries.begin(), reversed.entries.end());
  CHECK(knn_score(reversed, vec({0.4, 0.5})) == knn_score(crowd2, vec({0.4, 0.5})));

  CHECK_THROWS_AS(refit(one, vec({0, 0}), 2), Error);

  const Autoencoder& ae = small_model();
  const auto p = testing::synthetic_patches(1, 17)[0];
  const KnnStore four = refit(KnnStore{}, ae, p, 0);
  CHECK(four.size() == 4);
  CHECK(four.entries[1].latent == ae.encode(flip_ud(p)));
}

TEST_CASE("knn store JSON round trip and online classifier") {
  KnnStore s{{{vec({1, 2}), 1}, {vec({3, 4}), 0}}, 3};
  const KnnStore back = knn_from_json(knn_to_json(s));
  CHECK(back.k == 3);
  REQUIRE(back.size() == 2);
  CHECK(back.entries[1].latent == s.entries[1].latent);
  CHECK(back.entries[1].label == 0);

  OnlineClassifier clf(s);
  const auto snap = clf.snapshot();
  const Autoencoder& ae = small_model();
  clf.reset(refit(KnnStore{}, ae, testing::synthetic_patches(1, 18)[0], 1));
  CHECK(snap->size() == 2);
  CHECK(clf.snapshot()->size() == 4);
  clf.add(ae, testing::synthetic_patches(1, 19)[0], 0);
  CHECK(clf.snapshot()->size() == 8);
}

TEST_CASE("ranking candidates") {
  const Autoencoder& ae = small_model();
  Rng rng(20);
  PointCloud cloud = testing::ridge_cloud(rng, {-0.05, 0, 0.1}, 0.0);
  for (auto& p : testing::ridge_cloud(rng, {0.05, 0, 0.1}, kPi / 2).points) cloud.points.push_back(p);
  const GraspPose good = at({-0.05, 0, 0.1}, 0.0), bad = at({0.05, 0, 0.1}, 0.0);
  KnnStore store;
  store.k = 1;
  store = refit(store, ae, extract_patch(cloud, good), 1);
  store = refit(store, ae, extract_patch(cloud, bad), 0);

  const auto single = rank_candidates(ae, store, cloud, {bad});
  REQUIRE(single.size() == 1);
  REQUIRE(single[0].score);
  CHECK(*single[0].score == doctest::Approx(0.0));

  const auto ranked = rank_candidates(ae, store, cloud, {bad, good});
  CHECK(ranked[0].position == good.position);
  for (const auto& r : ranked) {
    CHECK(*r.score >= 0.0);
    CHECK(*r.score <= 1.0);
  }

  const RankingContext ctx{&ae, &store, &cloud, {}};
  const auto obb = OrientedBBox2D::from_center({128, 64}, 50, 10, 0);
  const Selection sel = strategy_select({bad, good}, obb, Strategy::Ranking, testing::small_intrinsics(), 1, ctx);
  CHECK(sel.index == 1);
  REQUIRE(sel.pose.score);
  CHECK(*sel.pose.score == doctest::Approx(1.0));

  // Equal best scores: both copies of the good grasp get picked, never the bad one.
  std::set<std::size_t> picked;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto a = strategy_select({good, bad, good}, obb, Strategy::Ranking, testing::small_intrinsics(), seed, ctx);
    CHECK(a.index ==
          strategy_select({good, bad, good}, obb, Strategy::Ranking, testing::small_intrinsics(), seed, ctx).index);
    picked.insert(a.index);
  }
  CHECK(picked == std::set<std::size_t>{0, 2});
  CHECK_THROWS_AS(strategy_select({good}, obb, Strategy::Ranking, testing::small_intrinsics(), 1), Error);
}

TEST_CASE("strategy selection") {
  const auto intr = testing::small_intrinsics();
  const auto obb = OrientedBBox2D::from_center({64, 64}, 40, 10, 0);
  // 5 px and 20 px from the box center at depth 1.
  const GraspPose near = at({0.05, 0, 1}), far = at({-0.2, 0, 1});
  for (Strategy s : {Strategy::Random, Strategy::Center})
    CHECK(strategy_select({near}, obb, s, intr, 3).index == 0);
  CHECK(strategy_select({far, near}, obb, Strategy::Center, intr, 3).index == 1);

  std::vector<GraspPose> many;
  for (int i = 0; i < 10; ++i) many.push_back(at({0.01 * i, 0, 1}));
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    CHECK(strategy_select(many, obb, Strategy::Random, intr, seed).index ==
          strategy_select(many, obb, Strategy::Random, intr, seed).index);
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    seen.insert(strategy_select(many, obb, Strategy::Random, intr, seed).index);
  CHECK(seen.size() == 10);
  CHECK_THROWS_AS(strategy_select({}, obb, Strategy::Center, intr, 1), Error);
  CHECK(strategy_from_string("center") == Strategy::Center);
  CHECK_THROWS_AS(strategy_from_string("best"), Error);
}

TEST_CASE("dataset split and persistence") {
  GraspDataset ds;
  const auto patches = testing::synthetic_patches(20, 22, {0.02, 32});
  for (std::size_t i = 0; i < patches.size(); ++i)
    ds.add(patches[i], i % 3 == 0 ? std::optional<int>(int(i % 2)) : std::nullopt, "t" + std::to_string(i));
  ds.split(5);
  CHECK(ds.train_count() == 14);
  CHECK(ds.labeled_count() == 7);
  CHECK(ds.patches(true).size() == 14);

  const auto path = std::filesystem::temp_directory_path() / "trussgrasp_dataset_test.jsonl";
  ds.save_jsonl(path);
  const GraspDataset back = GraspDataset::load_jsonl(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.records()[i].patch == ds.records()[i].patch);
    CHECK(back.records()[i].label == ds.records()[i].label);
    CHECK(back.records()[i].train == ds.records()[i].train);
    CHECK(back.records()[i].provenance == ds.records()[i].provenance);
  }
  CHECK_THROWS_AS(ds.add(patches[0], 3, "x"), Error);
}

}  // TEST_SUITE
