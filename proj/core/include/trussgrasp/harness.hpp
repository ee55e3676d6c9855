#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "trussgrasp/autoencoder.hpp"
#include "trussgrasp/config.hpp"
#include "trussgrasp/executor.hpp"
#include "trussgrasp/knn.hpp"
#include "trussgrasp/ranking.hpp"
#include "trussgrasp/stats.hpp"

namespace trussgrasp {

struct RankingModel {
  Autoencoder autoencoder;
  KnnStore store;
};

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json model_to_json(const RankingModel& model);
RankingModel model_from_json(const nlohmann::json& doc);
void save_model(const std::filesystem::path& path, const RankingModel& model);
RankingModel load_model(const std::filesystem::path& path);

/// Trusses used for evaluation; training trusses come from a disjoint stream.
TrussModel evaluation_truss(const ExperimentConfig& cfg, int index);
TrussModel training_truss(const ExperimentConfig& cfg, std::uint64_t seed, int index);

/// Scene the experiment starts from for truss `index` (and pile repetition
/// `index` for piles).
SceneState initial_scene(const ExperimentConfig& cfg, int index);

/// Random-strategy grasps on training trusses, cycling through isolated,
/// clutter and pile scenes, until `n_grasps` grasps were executed. Every proposal
/// becomes an unlabeled patch except the executed one, which carries its
/// force-based label. Split 70/30.
GraspDataset collect_offline_dataset(const ExperimentConfig& cfg, int n_grasps,
                                     std::uint64_t seed);

/// Autoencoder on the training patches plus a KNN store seeded from the
/// labeled training records.
RankingModel train_ranking_model(const GraspDataset& dataset, const ExperimentConfig& cfg);

/// collect_offline_dataset(cfg.offline_grasps) followed by training, on a
/// stream derived from cfg.seed.
RankingModel bootstrap_model(const ExperimentConfig& cfg);

struct KeypointStudy {
  std::size_t trusses = 0;
  std::size_t proposals = 0;
  std::size_t truths = 0;
  std::size_t matched = 0;
  std::vector<double> errors_mm;
  std::vector<double> errors_deg;

  double precision() const;
  double recall() const;
  double drop_rate() const { return 1.0 - recall(); }
  double median_error_mm() const;
  double median_error_deg() const;
};

/// Keypoint proposals on isolated trusses seen from a close-up camera 0.1 m
/// above the peduncle midpoint, aligned with it, until at least
/// `min_proposals` were made. Only ground truths inside the image count.
KeypointStudy study_keypoints(const ExperimentConfig& cfg, std::size_t min_proposals,
                              std::uint64_t seed);

struct TrialRecord {
  int trial_id = 0;
  std::string experiment;
  std::string strategy;
  int pile = -1;  // pile repetition, -1 outside pile runs
  int truss_id = -1;  // target truss, -1 when none was found
  int attempt = 0;
  std::optional<GraspPose> grasp;  // world frame
  std::optional<double> score;
  GraspResult result = GraspResult::PerceptionFailure;
  double width_after_close = 0.0;
  double force_delta = 0.0;
  std::optional<int> label;
  int candidates = 0;
  std::string note;  // why the trial stopped before execution

  std::string failure_class() const;  // none | perception | gripper
};

nlohmann::json trial_to_json(const TrialRecord& record);

/// Online scoring state for the ranking strategy. `classifier` may be null
/// when online learning is off; `store` is then used as is.
struct TrialModels {
  const Autoencoder* autoencoder = nullptr;
  const KnnStore* store = nullptr;
  OnlineClassifier* classifier = nullptr;
};

/// One pick-and-place attempt. On success the held truss is re-placed near
/// the workspace center (isolated, clutter) or removed (pile); on failure the
/// scene is unchanged. Failures before execution are perception failures.
TrialRecord run_pick_place_trial(SceneState& scene, Strategy strategy, const TrialModels& models,
                                 const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every configured strategy. Each trial is written to `log` as one JSON
/// line when given. `model` is required for the ranking strategy.
StatsReport run_experiment(const ExperimentConfig& cfg, const RankingModel* model,
                           std::ostream* log = nullptr);

}  // namespace trussgrasp
