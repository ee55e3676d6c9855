#include "trussgrasp/config.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

#include "trussgrasp/error.hpp"
#include "trussgrasp/io.hpp"

namespace trussgrasp {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FingerGeometry, width, thickness, length, max_opening,
                                   grasp_depth)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrussGenParams, tomato_count_min, tomato_count_max,
                                   tomato_radius_min, tomato_radius_max, junction_spacing_min,
                                   junction_spacing_max, peduncle_radius, pedicel_radius,
                                   pedicel_length_min, pedicel_length_max, pedicel_pitch_min,
                                   pedicel_pitch_max, pedicel_spread, proximal_length_min,
                                   proximal_length_max, distal_length, bend, out_of_plane,
                                   clearance_margin, probe)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DetectorNoiseModel, detect_precision, detect_recall,
                                   kp_precision, kp_recall, kp_pos_error_quartiles,
                                   kp_pos_error_whisker, kp_pos_error_cap,
                                   kp_angle_error_quartiles, kp_angle_error_whisker,
                                   kp_angle_error_cap, depth_window)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GripperParams, fingers, close_width_epsilon, slip_a, slip_b,
                                   slip_enabled, force_noise, sensor_baseline,
                                   workspace_half_extent)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PatchParams, d_r, resolution)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PreprocessParams, d_p, ransac_threshold, ransac_iterations)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainConfig, learning_rate, weight_decay, beta, beta2, epsilon,
                                   epochs, batch_size, validation_fraction, augment, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LabelParams, force_threshold)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AttemptCounts, random, center, ranking)

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Isolated: return "isolated";
    case ExperimentKind::Clutter: return "clutter";
    case ExperimentKind::Pile: return "pile";
  }
  return "unknown";
}

ExperimentKind experiment_from_string(const std::string& name) {
  if (name == "isolated") return ExperimentKind::Isolated;
  if (name == "clutter") return ExperimentKind::Clutter;
  if (name == "pile") return ExperimentKind::Pile;
  fail(ErrorKind::Config, "unknown experiment '" + name + "'");
}

int AttemptCounts::of(Strategy s) const {
  switch (s) {
    case Strategy::Random: return random;
    case Strategy::Center: return center;
    case Strategy::Ranking: return ranking;
  }
  return 0;
}

void ExperimentConfig::validate() const {
  if (strategies.empty()) fail(ErrorKind::Config, "at least one strategy is required");
  for (std::size_t i = 0; i < strategies.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (strategies[i] == strategies[j])
        fail(ErrorKind::Config, "strategy '" + to_string(strategies[i]) + "' is listed twice");
  auto at_least_one = [](int v, const char* name) {
    if (v < 1) fail(ErrorKind::Config, std::string(name) + " must be at least 1");
  };
  at_least_one(trusses, "trusses");
  for (Strategy s : strategies) at_least_one(attempts.of(s), "attempts per truss");
  at_least_one(pile_size, "pile_size");
  at_least_one(pile_repetitions, "pile_repetitions");
  at_least_one(pile_attempt_cap, "pile_attempt_cap");
  at_least_one(offline_grasps, "offline_grasps");
  at_least_one(offline_trusses, "offline_trusses");
  at_least_one(max_surveys, "max_surveys");
  at_least_one(knn_k, "knn_k");
  if (clutter_background < 0) fail(ErrorKind::Config, "clutter_background must be non-negative");
  if (!(survey_height > 0.0)) fail(ErrorKind::Config, "survey_height must be positive");
  if (!(replace_radius >= 0.0)) fail(ErrorKind::Config, "replace_radius must be non-negative");
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0))
    fail(ErrorKind::Config, "overlap_threshold must lie in [0, 1]");
  noise.validate();
  gripper.validate();
  patch.validate();
  preprocess.validate();
  truss.validate();
  train.validate();
  label.validate();
}

json config_to_json(const ExperimentConfig& cfg) {
  json strategies = json::array();
  for (Strategy s : cfg.strategies) strategies.push_back(to_string(s));
  json j;
  j["experiment"] = to_string(cfg.experiment);
  j["strategies"] = strategies;
  j["trusses"] = cfg.trusses;
  j["attempts"] = cfg.attempts;
  j["pile_size"] = cfg.pile_size;
  j["pile_repetitions"] = cfg.pile_repetitions;
  j["pile_attempt_cap"] = cfg.pile_attempt_cap;
  j["clutter_background"] = cfg.clutter_background;
  j["online_learning"] = cfg.online_learning ? json(*cfg.online_learning) : json(nullptr);
  j["seed"] = cfg.seed;
  j["offline_grasps"] = cfg.offline_grasps;
  j["offline_trusses"] = cfg.offline_trusses;
  j["survey_height"] = cfg.survey_height;
  j["max_surveys"] = cfg.max_surveys;
  j["replace_radius"] = cfg.replace_radius;
  j["overlap_threshold"] = cfg.overlap_threshold;
  j["knn_k"] = cfg.knn_k;
  j["noise"] = cfg.noise;
  j["gripper"] = cfg.gripper;
  j["patch"] = cfg.patch;
  j["preprocess"] = cfg.preprocess;
  j["truss"] = cfg.truss;
  j["train"] = cfg.train;
  j["label"] = cfg.label;
  return j;
}

namespace {

void strict_merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) fail(ErrorKind::Config, "'" + path + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) fail(ErrorKind::Config, "unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object())
      strict_merge(slot, it.value(), key);
    else
      slot = it.value();
  }
}

std::vector<Strategy> parse_strategies(const json& j) {
  std::vector<Strategy> out;
  if (j.is_string()) {
    std::istringstream in(j.get<std::string>());
    std::string name;
    while (std::getline(in, name, ','))
      if (!name.empty()) out.push_back(strategy_from_string(name));
  } else {
    for (const auto& s : j) out.push_back(strategy_from_string(s.get<std::string>()));
  }
  return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  json merged = config_to_json(ExperimentConfig{});
  strict_merge(merged, doc, "");
  ExperimentConfig cfg;
  try {
    cfg.experiment = experiment_from_string(merged.at("experiment").get<std::string>());
    cfg.strategies = parse_strategies(merged.at("strategies"));
    cfg.trusses = merged.at("trusses").get<int>();
    cfg.attempts = merged.at("attempts").get<AttemptCounts>();
    cfg.pile_size = merged.at("pile_size").get<int>();
    cfg.pile_repetitions = merged.at("pile_repetitions").get<int>();
    cfg.pile_attempt_cap = merged.at("pile_attempt_cap").get<int>();
    cfg.clutter_background = merged.at("clutter_background").get<int>();
    const auto& online = merged.at("online_learning");
    if (!online.is_null()) cfg.online_learning = online.get<bool>();
    cfg.seed = merged.at("seed").get<std::uint64_t>();
    cfg.offline_grasps = merged.at("offline_grasps").get<int>();
    cfg.offline_trusses = merged.at("offline_trusses").get<int>();
    cfg.survey_height = merged.at("survey_height").get<double>();
    cfg.max_surveys = merged.at("max_surveys").get<int>();
    cfg.replace_radius = merged.at("replace_radius").get<double>();
    cfg.overlap_threshold = merged.at("overlap_threshold").get<double>();
    cfg.knn_k = merged.at("knn_k").get<int>();
    cfg.noise = merged.at("noise").get<DetectorNoiseModel>();
    cfg.gripper = merged.at("gripper").get<GripperParams>();
    cfg.patch = merged.at("patch").get<PatchParams>();
    cfg.preprocess = merged.at("preprocess").get<PreprocessParams>();
    cfg.truss = merged.at("truss").get<TrussGenParams>();
    cfg.train = merged.at("train").get<TrainConfig>();
    cfg.label = merged.at("label").get<LabelParams>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return config_from_json(doc);
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key.empty()) fail(ErrorKind::Config, "empty override key");
  json value_json;
  try {
    value_json = json::parse(value);
  } catch (const json::parse_error&) {
    value_json = value;
  }
  json doc = json::object();
  json* node = &doc;
  std::istringstream in(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, '.')) {
    if (part.empty()) fail(ErrorKind::Config, "malformed override key '" + key + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value_json;

  json current = config_to_json(cfg);
  json probe = current;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!probe.is_object() || !probe.contains(parts[i]))
      fail(ErrorKind::Config, "unknown config key '" + key + "'");
    probe = probe[parts[i]];
  }
  if (!probe.is_object() || !probe.contains(parts.back()))
    fail(ErrorKind::Config, "unknown config key '" + key + "'");
  strict_merge(current, doc, "");
  cfg = config_from_json(current);
}

}  // namespace trussgrasp
