#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "trussgrasp/autoencoder.hpp"
#include "trussgrasp/detection.hpp"
#include "trussgrasp/executor.hpp"
#include "trussgrasp/patch.hpp"
#include "trussgrasp/ranking.hpp"
#include "trussgrasp/scene.hpp"

namespace trussgrasp {

enum class ExperimentKind { Isolated, Clutter, Pile };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_from_string(const std::string& name);

struct AttemptCounts {
  int random = 20;
  int center = 10;
  int ranking = 10;

  int of(Strategy s) const;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Isolated;
  std::vector<Strategy> strategies = {Strategy::Random, Strategy::Center, Strategy::Ranking};
  int trusses = 25;
  AttemptCounts attempts;
  int pile_size = 10;
  int pile_repetitions = 10;
  int pile_attempt_cap = 50;
  int clutter_background = 9;
  /// Unset: enabled for piles only.
  std::optional<bool> online_learning;
  std::uint64_t seed = 0;

  int offline_grasps = 1000;
  int offline_trusses = 50;

  double survey_height = kSurveyHeight;
  int max_surveys = 3;
  double replace_radius = 0.05;
  double overlap_threshold = kDefaultOverlapThreshold;
  int knn_k = 10;

  DetectorNoiseModel noise;
  GripperParams gripper;
  PatchParams patch;
  PreprocessParams preprocess;
  TrussGenParams truss;
  TrainConfig train;
  LabelParams label;

  bool online() const { return online_learning.value_or(experiment == ExperimentKind::Pile); }
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Missing keys keep their defaults; unknown keys are a config error.
ExperimentConfig config_from_json(const nlohmann::json& doc);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets a dotted key ("gripper.slip_b", "noise.kp_recall") from its command
/// line text. The text is parsed as JSON when possible, else taken as a string.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace trussgrasp
