#include "trussgrasp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <nlohmann/json.hpp>

#include "trussgrasp/detection.hpp"
#include "trussgrasp/error.hpp"
#include "trussgrasp/io.hpp"
#include "trussgrasp/rng.hpp"

namespace trussgrasp {

using nlohmann::json;

json model_to_json(const RankingModel& model) {
  return {{"schema_version", kModelSchemaVersion},
          {"autoencoder", model.autoencoder.to_json()},
          {"knn", knn_to_json(model.store)}};
}

RankingModel model_from_json(const json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kModelSchemaVersion)
      fail(ErrorKind::Config, "unsupported model schema version");
    RankingModel m{Autoencoder::from_json(doc.at("autoencoder")), knn_from_json(doc.at("knn"))};
    if (!m.autoencoder.trained()) fail(ErrorKind::Untrained, "model file holds an untrained network");
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const RankingModel& model) {
  io::write_file(path, model_to_json(model).dump() + "\n");
}

RankingModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(io::read_file(path)));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kBackgroundIdBase = 1000;
constexpr double kSamePoseDistance = 0.003;
constexpr double kPi = std::numbers::pi;

TrussModel make_truss(std::uint64_t seed, int id, const TrussGenParams& params) {
  TrussModel t = generate_truss(seed, params);
  t.id = id;
  return t;
}

std::vector<TrussModel> clutter_trusses(TrussModel target, int background, std::uint64_t seed,
                                        const TrussGenParams& params) {
  std::vector<TrussModel> out;
  out.push_back(std::move(target));
  for (int j = 0; j < background; ++j)
    out.push_back(make_truss(derive_seed(seed, j), kBackgroundIdBase + j, params));
  return out;
}

struct Perception {
  std::string note;  // set when the pipeline stopped early
  int target_id = -1;
  RigidTransform camera;
  CameraIntrinsics intr;
  std::optional<OrientedBBox2D> obb;
  PointCloud cloud;
  std::vector<GraspPose> candidates;

  bool ok() const { return note.empty(); }
};

bool perception_error(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NoTarget:
    case ErrorKind::PreprocessingFailed:
    case ErrorKind::Degenerate:
    case ErrorKind::BehindCamera:
      return true;
    default:
      return false;
  }
}

Perception perceive(const SceneState& scene, const ExperimentConfig& cfg, std::uint64_t seed) {
  Perception p;
  const RigidTransform survey = survey_camera(cfg.survey_height);
  const CameraIntrinsics sintr = survey_intrinsics();
  SceneAnnotation annotation;
  std::vector<Detection> detections;
  for (int s = 0; s < cfg.max_surveys && detections.empty(); ++s) {
    annotation = annotate(scene, survey, sintr, cfg.overlap_threshold);
    detections = detect_trusses(annotation, cfg.noise, derive_seed(seed, 0xde7, s));
  }
  if (detections.empty()) {
    p.note = "no detection";
    return p;
  }
  try {
    const Detection target = select_target(detections, annotation);
    if (!target.truss_id) {
      p.note = "detection on no truss";
      return p;
    }
    const TrussModel* truss = scene.find(*target.truss_id);
    if (!truss) fail(ErrorKind::InvariantViolation, "detected truss is not in the scene");
    p.target_id = truss->id;

    const DepthImage survey_depth = render_depth(scene, survey, sintr);
    p.camera = closeup_camera_pose(target.obb, survey, survey_depth, sintr);
    p.intr = closeup_intrinsics();
    const DepthImage depth = render_depth(scene, p.camera, p.intr);
    const double plane_z = p.camera.translation.z() - kCloseupStandoff;
    p.obb = transfer_obb(target.obb, survey, sintr, p.camera, p.intr, plane_z);
    p.cloud = preprocess(depth_to_cloud(depth, p.intr), *p.obb, p.intr, cfg.preprocess,
                         derive_seed(seed, 0x9e9));
    p.candidates = propose_grasp_keypoints(*truss, p.camera, p.intr, cfg.noise,
                                           derive_seed(seed, 0x4e7), depth);
  } catch (const Error& e) {
    if (!perception_error(e)) throw;
    p.note = e.what();
    return p;
  }
  if (p.candidates.empty()) p.note = "no grasp candidates";
  return p;
}

/// Lifts the truss out and drops it again at a random pose near the center.
void replace_truss(SceneState& scene, int truss_id, double radius, std::uint64_t seed) {
  auto it = std::find_if(scene.trusses.begin(), scene.trusses.end(),
                         [&](const TrussModel& t) { return t.id == truss_id; });
  if (it == scene.trusses.end()) fail(ErrorKind::NotFound, "held truss is not in the scene");
  TrussModel t = std::move(*it);
  scene.trusses.erase(it);
  settle(scene);
  Rng rng(seed);
  const double ang = rng.uniform(0.0, 2.0 * kPi);
  const double rad = radius * std::sqrt(rng.uniform());
  t.pose = RigidTransform::from_yaw(Vec3(rad * std::cos(ang), rad * std::sin(ang), 0.0),
                                    rng.uniform(-kPi, kPi));
  t.pose.translation.z() = settle_height(t, scene.trusses);
  scene.trusses.push_back(std::move(t));
  scene.validate();
}

bool world_pose_ok(const GraspPose& pose, const GripperParams& gripper) {
  return pose.position.allFinite() &&
         std::abs(pose.position.x()) <= gripper.workspace_half_extent &&
         std::abs(pose.position.y()) <= gripper.workspace_half_extent;
}

}  // namespace

TrussModel evaluation_truss(const ExperimentConfig& cfg, int index) {
  return make_truss(derive_seed(cfg.seed, 0xe7a1, index), index, cfg.truss);
}

TrussModel training_truss(const ExperimentConfig& cfg, std::uint64_t seed, int index) {
  return make_truss(derive_seed(seed, 0x7a1e, index), index, cfg.truss);
}

SceneState initial_scene(const ExperimentConfig& cfg, int index) {
  const std::uint64_t seed = derive_seed(cfg.seed, 0x5ce, index);
  switch (cfg.experiment) {
    case ExperimentKind::Isolated:
      return build_scene({evaluation_truss(cfg, index)}, Layout::isolated(), seed);
    case ExperimentKind::Clutter:
      return build_scene(clutter_trusses(evaluation_truss(cfg, index), cfg.clutter_background,
                                         derive_seed(cfg.seed, 0xb6, index), cfg.truss),
                         Layout::clutter(), seed);
    case ExperimentKind::Pile: {
      std::vector<TrussModel> trusses;
      for (int j = 0; j < cfg.pile_size; ++j)
        trusses.push_back(evaluation_truss(cfg, index * cfg.pile_size + j));
      return build_scene(std::move(trusses), Layout::pile(cfg.pile_size), seed);
    }
  }
  fail(ErrorKind::Config, "unknown experiment");
}

GraspDataset collect_offline_dataset(const ExperimentConfig& cfg, int n_grasps,
                                     std::uint64_t seed) {
  if (n_grasps < 1) fail(ErrorKind::Config, "n_grasps must be at least 1");
  cfg.validate();
  GraspDataset dataset;
  int executed = 0;
  const long long max_trials = 20LL * n_grasps;
  for (long long t = 0; executed < n_grasps && t < max_trials; ++t) {
    const int k = static_cast<int>(t % cfg.offline_trusses);
    const std::uint64_t trial_seed = derive_seed(seed, 0x0ff, t);
    TrussModel truss = training_truss(cfg, seed, k);
    SceneState scene;
    switch (k % 3) {
      case 0:
        scene = build_scene({std::move(truss)}, Layout::isolated(), trial_seed);
        break;
      case 1:
        scene = build_scene(clutter_trusses(std::move(truss), cfg.clutter_background,
                                            derive_seed(trial_seed, 0xb6), cfg.truss),
                            Layout::clutter(), trial_seed);
        break;
      default: {
        std::vector<TrussModel> pile{std::move(truss)};
        for (int j = 1; j < cfg.pile_size; ++j)
          pile.push_back(training_truss(cfg, seed, cfg.offline_trusses + k * cfg.pile_size + j));
        scene = build_scene(std::move(pile), Layout::pile(cfg.pile_size), trial_seed);
      }
    }
    const Perception p = perceive(scene, cfg, trial_seed);
    if (!p.ok()) continue;
    const Selection sel =
        strategy_select(p.candidates, *p.obb, Strategy::Random, p.intr, trial_seed);
    const GraspPose world = camera_to_world(sel.pose, p.camera);
    if (!world_pose_ok(world, cfg.gripper)) continue;
    const GraspOutcome out = simulate_grasp(scene, world, cfg.gripper, trial_seed);
    const int label = label_grasp(out.force_before_release, out.force_after_release, cfg.label);
    const std::string tag = "offline/trial" + std::to_string(t) + "/truss" + std::to_string(k);
    for (std::size_t i = 0; i < p.candidates.size(); ++i) {
      GraspPatch patch = extract_patch(p.cloud, p.candidates[i], cfg.patch);
      if (i == sel.index)
        dataset.add(std::move(patch), label, tag + "/executed");
      else
        dataset.add(std::move(patch), std::nullopt, tag + "/proposal" + std::to_string(i));
    }
    ++executed;
  }
  if (executed < n_grasps)
    fail(ErrorKind::InvariantViolation, "offline collection executed too few grasps");
  dataset.split(derive_seed(seed, 0x5b1), 0.7);
  return dataset;
}

RankingModel train_ranking_model(const GraspDataset& dataset, const ExperimentConfig& cfg) {
  if (dataset.labeled_count() == 0) fail(ErrorKind::InvalidInput, "dataset has no labeled grasps");
  RankingModel m;
  m.autoencoder = train_autoencoder(dataset.patches(true), cfg.train);
  m.store = seed_store(m.autoencoder, dataset, cfg.knn_k);
  if (m.store.empty()) fail(ErrorKind::InvalidInput, "no labeled grasps in the training split");
  return m;
}

// ---------------------------------------------------------------------------

std::string TrialRecord::failure_class() const {
  switch (result) {
    case GraspResult::Success: return "none";
    case GraspResult::PerceptionFailure: return "perception";
    case GraspResult::GripperSlip: return "gripper";
  }
  return "unknown";
}

json trial_to_json(const TrialRecord& r) {
  json j;
  j["trial_id"] = r.trial_id;
  j["experiment"] = r.experiment;
  j["strategy"] = r.strategy;
  if (r.pile >= 0) j["pile"] = r.pile;
  j["truss_id"] = r.truss_id;
  j["attempt"] = r.attempt;
  if (r.grasp)
    j["grasp"] = {{"position", {r.grasp->position.x(), r.grasp->position.y(), r.grasp->position.z()}},
                  {"yaw", r.grasp->yaw},
                  {"frame", "world"}};
  else
    j["grasp"] = nullptr;
  j["score"] = r.score ? json(*r.score) : json(nullptr);
  j["result"] = to_string(r.result);
  j["failure_class"] = r.failure_class();
  j["width_after_close"] = r.width_after_close;
  j["force_delta"] = r.force_delta;
  j["label"] = r.label ? json(*r.label) : json(nullptr);
  j["candidates"] = r.candidates;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

TrialRecord run_pick_place_trial(SceneState& scene, Strategy strategy, const TrialModels& models,
                                 const ExperimentConfig& cfg, std::uint64_t seed) {
  if (scene.trusses.empty()) fail(ErrorKind::InvalidInput, "the scene has no trusses");
  TrialRecord rec;
  rec.experiment = to_string(cfg.experiment);
  rec.strategy = to_string(strategy);

  const Perception p = perceive(scene, cfg, seed);
  rec.truss_id = p.target_id;
  rec.candidates = static_cast<int>(p.candidates.size());
  if (!p.ok()) {
    rec.note = p.note;
    return rec;
  }

  std::shared_ptr<const KnnStore> snapshot;
  RankingContext ctx;
  if (strategy == Strategy::Ranking) {
    if (!models.autoencoder) fail(ErrorKind::Untrained, "ranking needs a trained model");
    if (models.classifier)
      snapshot = models.classifier->snapshot();
    else if (models.store)
      snapshot = std::shared_ptr<const KnnStore>(std::shared_ptr<const KnnStore>{}, models.store);
    if (!snapshot || snapshot->empty()) fail(ErrorKind::Untrained, "ranking needs a KNN store");
    ctx = {models.autoencoder, snapshot.get(), &p.cloud, cfg.patch};
  }
  const Selection sel =
      strategy_select(p.candidates, *p.obb, strategy, p.intr, derive_seed(seed, 0x5e1), ctx);
  const GraspPose world = camera_to_world(sel.pose, p.camera);
  rec.grasp = world;
  rec.score = sel.pose.score;
  if (!world_pose_ok(world, cfg.gripper)) {
    rec.note = "grasp outside the workspace";
    return rec;
  }

  const GraspOutcome out = simulate_grasp(scene, world, cfg.gripper, derive_seed(seed, 0xe4e));
  rec.result = out.result;
  rec.width_after_close = out.width_after_close;
  rec.force_delta = out.force_delta;
  rec.label = label_grasp(out.force_before_release, out.force_after_release, cfg.label);

  if (models.classifier && models.autoencoder)
    models.classifier->add(*models.autoencoder, extract_patch(p.cloud, sel.pose, cfg.patch),
                           *rec.label);

  if (out.result == GraspResult::Success) {
    if (cfg.experiment == ExperimentKind::Pile)
      scene = remove_truss(scene, out.held_truss);
    else
      replace_truss(scene, out.held_truss, cfg.replace_radius, derive_seed(seed, 0x9e1));
  }
  return rec;
}

namespace {

struct ExperimentRun {
  const ExperimentConfig& cfg;
  const RankingModel* model;
  std::ostream* log;
  StatsReport report;
  int next_trial = 0;

  void record(TrialRecord& rec, StrategyStats& stats) {
    rec.trial_id = next_trial++;
    ++stats.trials;
    if (rec.result == GraspResult::PerceptionFailure) ++stats.perception_failures;
    if (rec.result == GraspResult::GripperSlip) ++stats.gripper_failures;
    if (log) *log << trial_to_json(rec).dump() << '\n';
  }

  TrialModels models(OnlineClassifier* classifier) const {
    if (!model) return {};
    return {&model->autoencoder, &model->store, classifier};
  }

  void per_truss(Strategy s, StrategyStats& stats) {
    OnlineClassifier classifier(model ? model->store : KnnStore{});
    for (int i = 0; i < cfg.trusses; ++i) {
      SceneState scene = initial_scene(cfg, i);
      if (model) classifier.reset(model->store);
      for (int a = 0; a < cfg.attempts.of(s); ++a) {
        TrialRecord rec = run_pick_place_trial(scene, s, models(cfg.online() ? &classifier : nullptr),
                                               cfg, derive_seed(cfg.seed, 0x7a1a1, i, a));
        rec.attempt = a;
        record(rec, stats);
      }
    }
  }

  void piles(Strategy s, StrategyStats& stats) {
    OnlineClassifier classifier(model ? model->store : KnnStore{});
    for (int rep = 0; rep < cfg.pile_repetitions; ++rep) {
      SceneState scene = initial_scene(cfg, rep);
      if (model) classifier.reset(model->store);
      PileStats pile;
      pile.strategy = to_string(s);
      pile.pile = rep;
      pile.trusses = static_cast<int>(scene.trusses.size());
      int attempts = 0, total = 0, run = 0;
      std::optional<GraspPose> prev;
      bool prev_failed = false;
      while (!scene.trusses.empty()) {
        TrialRecord rec =
            run_pick_place_trial(scene, s, models(cfg.online() ? &classifier : nullptr), cfg,
                                 derive_seed(cfg.seed, 0x911e, rep, total));
        rec.pile = rep;
        rec.attempt = attempts;
        record(rec, stats);
        ++attempts;
        ++total;
        if (rec.grasp) {
          const bool same = prev && prev_failed &&
                            (rec.grasp->position - prev->position).norm() <= kSamePoseDistance;
          run = same ? run + 1 : 1;
          pile.max_consecutive_repeats = std::max(pile.max_consecutive_repeats, run);
          prev = rec.grasp;
        }
        prev_failed = rec.result != GraspResult::Success;
        if (rec.result == GraspResult::Success) {
          pile.attempts_per_truss.push_back(attempts);
          attempts = 0;
          prev.reset();
          run = 0;
        } else if (attempts >= cfg.pile_attempt_cap) {
          break;
        }
      }
      pile.cleared = scene.trusses.empty();
      report.piles.push_back(std::move(pile));
    }
  }
};

}  // namespace

StatsReport run_experiment(const ExperimentConfig& cfg, const RankingModel* model,
                           std::ostream* log) {
  cfg.validate();
  for (Strategy s : cfg.strategies)
    if (s == Strategy::Ranking && !model)
      fail(ErrorKind::Untrained, "the ranking strategy needs a trained model");
  ExperimentRun run{cfg, model, log, {}, 0};
  for (Strategy s : cfg.strategies) {
    run.report.strategies.push_back({to_string(cfg.experiment), to_string(s), 0, 0, 0});
    StrategyStats stats = run.report.strategies.back();
    if (cfg.experiment == ExperimentKind::Pile)
      run.piles(s, stats);
    else
      run.per_truss(s, stats);
    *run.report.find(stats.experiment, stats.strategy) = stats;
  }
  run.report.validate();
  return run.report;
}


RankingModel bootstrap_model(const ExperimentConfig& cfg) {
  const GraspDataset dataset =
      collect_offline_dataset(cfg, cfg.offline_grasps, derive_seed(cfg.seed, 0xb007));
  return train_ranking_model(dataset, cfg);
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

double KeypointStudy::precision() const {
  return proposals ? static_cast<double>(matched) / static_cast<double>(proposals) : 1.0;
}

double KeypointStudy::recall() const {
  return truths ? static_cast<double>(matched) / static_cast<double>(truths) : 0.0;
}

double KeypointStudy::median_error_mm() const { return median(errors_mm); }
double KeypointStudy::median_error_deg() const { return median(errors_deg); }

KeypointStudy study_keypoints(const ExperimentConfig& cfg, std::size_t min_proposals,
                              std::uint64_t seed) {
  ExperimentConfig iso = cfg;
  iso.experiment = ExperimentKind::Isolated;
  iso.seed = seed;
  const CameraIntrinsics intr = closeup_intrinsics();
  KeypointStudy study;
  for (int i = 0; study.proposals < min_proposals; ++i) {
    const SceneState scene = initial_scene(iso, i);
    const TrussModel& truss = scene.trusses.front();
    Vec3 first = Vec3::Zero(), last = Vec3::Zero();
    bool seen = false;
    for (const auto& p : truss.world_parts()) {
      if (p.kind != PartKind::Peduncle) continue;
      if (!seen) first = p.shape.a;
      last = p.shape.b;
      seen = true;
    }
    const Vec3 axis = last - first;
    const RigidTransform camera = RigidTransform::look_down(
        0.5 * (first + last) + Vec3(0.0, 0.0, kCloseupStandoff), std::atan2(axis.y(), axis.x()));
    const DepthImage depth = render_depth(scene, camera, intr);
    std::vector<GraspPose> truth;
    for (const auto& gt : ground_truth_grasps(truss, camera))
      if (intr.contains(project(gt.position, intr).pixel)) truth.push_back(gt);
    const auto predicted =
        propose_grasp_keypoints(truss, camera, intr, cfg.noise, derive_seed(seed, 0x4e7, i), depth);
    const KeypointEvaluation ev = evaluate_keypoints(predicted, truth);
    ++study.trusses;
    study.proposals += predicted.size();
    study.truths += truth.size();
    study.matched += ev.matched;
    study.errors_mm.insert(study.errors_mm.end(), ev.errors_mm.begin(), ev.errors_mm.end());
    study.errors_deg.insert(study.errors_deg.end(), ev.errors_deg.begin(), ev.errors_deg.end());
  }
  return study;
}

}  // namespace trussgrasp
