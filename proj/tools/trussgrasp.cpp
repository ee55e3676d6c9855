// trussgrasp: command-line front end for the grasp simulation lab.
//
//   trussgrasp run --config exp.json --seed 42 --log trials.jsonl
//   trussgrasp run --seed 7 --experiment pile --strategies ranking
//
// Every config key can be set with `--key value` (dotted for nested keys,
// e.g. `--gripper.slip_a 14`).

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "trussgrasp/config.hpp"
#include "trussgrasp/error.hpp"
#include "trussgrasp/harness.hpp"
#include "trussgrasp/io.hpp"
#include "trussgrasp/scene.hpp"
#include "trussgrasp/stats.hpp"

using namespace trussgrasp;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("-c,--config", common.config_path, "experiment config (JSON)");
  sub->allow_extras();
}

// Leftover `--key value` / `--key=value` pairs become config overrides.
ExperimentConfig build_config(const CLI::App* sub, const Common& common) {
  ExperimentConfig cfg = common.config_path.empty() ? ExperimentConfig{} : load_config(common.config_path);
  const std::vector<std::string> extras = sub->remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3)
      fail(ErrorKind::Config, "unexpected argument '" + arg + "'");
    std::string key = arg.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) fail(ErrorKind::Config, "missing value for '" + arg + "'");
      value = extras[++i];
    }
    apply_override(cfg, key, value);
  }
  if (common.seed) cfg.seed = *common.seed;
  cfg.validate();
  return cfg;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    io::write_file(path, text);
}

int cmd_generate(const ExperimentConfig& cfg, int index, const std::string& out,
                 const std::string& depth_out) {
  const SceneState scene = initial_scene(cfg, index);
  write_or_print(out, scene_to_json(scene).dump(2) + "\n");
  if (!depth_out.empty())
    io::write_depth_pfm(depth_out, render_depth(scene, survey_camera(cfg.survey_height), survey_intrinsics()));
  return kExitOk;
}

int cmd_collect(const ExperimentConfig& cfg, std::optional<int> grasps, const std::string& out) {
  const GraspDataset ds = collect_offline_dataset(cfg, grasps.value_or(cfg.offline_grasps), cfg.seed);
  ds.save_jsonl(out);
  std::cerr << "collected " << ds.labeled_count() << " executed grasps, " << ds.size()
            << " patches (" << ds.train_count() << " train)\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& dataset, const std::string& out) {
  const GraspDataset ds = GraspDataset::load_jsonl(dataset);
  const RankingModel model = train_ranking_model(ds, cfg);
  save_model(out, model);
  const auto& h = model.autoencoder.history();
  std::cerr << "validation mse " << h.initial_validation_mse << " -> "
            << (h.validation_mse.empty() ? h.initial_validation_mse : h.validation_mse.back())
            << ", store " << model.store.size() << " entries\n";
  return kExitOk;
}

int cmd_run(const ExperimentConfig& cfg, const std::string& model_path,
            const std::string& save_model_path, const std::string& log_path,
            const std::string& stats_path, const std::string& format) {
  const ReportFormat fmt = report_format_from_string(format);
  std::optional<RankingModel> model;
  bool needs_model = false;
  for (Strategy s : cfg.strategies) needs_model = needs_model || s == Strategy::Ranking;
  if (!model_path.empty()) {
    model = load_model(model_path);
  } else if (needs_model) {
    std::cerr << "no --model given, collecting " << cfg.offline_grasps << " offline grasps\n";
    model = bootstrap_model(cfg);
    if (!save_model_path.empty()) save_model(save_model_path, *model);
  }
  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::binary);
    if (!log_file) fail(ErrorKind::Io, "cannot write " + log_path);
    log = &log_file;
  }
  const StatsReport stats = run_experiment(cfg, model ? &*model : nullptr, log);
  if (!stats_path.empty()) io::write_file(stats_path, stats_to_json(stats).dump(2) + "\n");
  std::cout << report(stats, fmt);
  return kExitOk;
}

int cmd_report(const std::string& stats_path, const std::string& format) {
  json doc;
  try {
    doc = json::parse(io::read_file(stats_path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, stats_path + ": " + e.what());
  }
  std::cout << report(stats_from_json(doc), report_format_from_string(format));
  return kExitOk;
}

int cmd_eval_keypoints(const ExperimentConfig& cfg, std::size_t proposals, bool as_json) {
  const KeypointStudy s = study_keypoints(cfg, proposals, cfg.seed);
  if (as_json) {
    std::cout << json{{"trusses", s.trusses},
                      {"proposals", s.proposals},
                      {"ground_truth", s.truths},
                      {"matched", s.matched},
                      {"precision", s.precision()},
                      {"recall", s.recall()},
                      {"drop_rate", s.drop_rate()},
                      {"median_error_mm", s.median_error_mm()},
                      {"median_error_deg", s.median_error_deg()}}
                     .dump(2)
              << '\n';
    return kExitOk;
  }
  std::printf("trusses          %zu\n", s.trusses);
  std::printf("proposals        %zu\n", s.proposals);
  std::printf("ground truth     %zu\n", s.truths);
  std::printf("matched          %zu\n", s.matched);
  std::printf("precision        %.3f\n", s.precision());
  std::printf("recall           %.3f\n", s.recall());
  std::printf("drop rate        %s\n", format_percent(s.drop_rate()).c_str());
  std::printf("median error     %.3f mm, %.1f deg\n", s.median_error_mm(), s.median_error_deg());
  return kExitOk;
}

int cmd_metrics(std::optional<std::uint64_t> tp, std::optional<std::uint64_t> fp,
                std::optional<std::uint64_t> fn, std::optional<std::uint64_t> tn,
                std::optional<double> precision, std::optional<double> recall) {
  if (precision || recall) {
    if (!precision || !recall) fail(ErrorKind::Config, "--precision and --recall go together");
    std::printf("f1 %.3f\n", f1_score(*precision, *recall));
    return kExitOk;
  }
  if (!tp || !fp || !fn || !tn) fail(ErrorKind::Config, "--tp --fp --fn --tn are required");
  const Metrics m = compute_metrics(*tp, *fp, *fn, *tn);
  std::printf("precision %.3f\nrecall    %.3f\nf1        %.3f\n", m.precision, m.recall, m.f1);
  std::printf("tp %s  fp %s  fn %s  tn %s\n", format_percent(m.tp_fraction).c_str(),
              format_percent(m.fp_fraction).c_str(), format_percent(m.fn_fraction).c_str(),
              format_percent(m.tn_fraction).c_str());
  if (m.degenerate) std::printf("degenerate: a ratio had a zero denominator\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tomato-truss grasp simulation lab"};
  app.require_subcommand(1);

  Common common;

  auto* generate = app.add_subcommand("generate", "write the initial scene of one truss or pile");
  add_common(generate, common);
  int gen_index = 0;
  std::string gen_out, gen_depth;
  generate->add_option("--seed", common.seed, "master seed");
  generate->add_option("--index", gen_index, "truss (or pile) index")->check(CLI::NonNegativeNumber);
  generate->add_option("-o,--out", gen_out, "scene JSON (stdout when absent)");
  generate->add_option("--depth", gen_depth, "also render the survey depth image (PFM)");

  auto* collect = app.add_subcommand("collect", "run offline random grasps and store the patches");
  add_common(collect, common);
  std::optional<int> grasps;
  std::string collect_out;
  collect->add_option("--seed", common.seed, "master seed");
  collect->add_option("-n,--grasps", grasps, "executed grasps (default: offline_grasps)");
  collect->add_option("-o,--out", collect_out, "dataset (JSONL)")->required();

  auto* train = app.add_subcommand("train", "train the autoencoder and seed the KNN store");
  add_common(train, common);
  std::string train_dataset, train_out;
  train->add_option("--seed", common.seed, "master seed");
  train->add_option("-d,--dataset", train_dataset, "dataset (JSONL)")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", train_out, "model file")->required();

  auto* run = app.add_subcommand("run", "run an experiment");
  add_common(run, common);
  std::string model_path, save_model_path, log_path, stats_path, run_format = "table";
  run->add_option("--seed", common.seed, "master seed")->required();
  run->add_option("-m,--model", model_path, "trained model; collected and trained when absent")
      ->check(CLI::ExistingFile);
  run->add_option("--save-model", save_model_path, "where to keep a freshly trained model");
  run->add_option("-l,--log", log_path, "trial log (JSONL)");
  run->add_option("-s,--stats", stats_path, "statistics (JSON)");
  run->add_option("-f,--format", run_format, "table, json or csv");

  auto* rep = app.add_subcommand("report", "render saved statistics");
  std::string rep_stats, rep_format = "table";
  rep->add_option("stats", rep_stats, "statistics (JSON)")->required()->check(CLI::ExistingFile);
  rep->add_option("-f,--format", rep_format, "table, json or csv");

  auto* eval = app.add_subcommand("eval-keypoints", "measure the keypoint noise model");
  add_common(eval, common);
  std::size_t eval_proposals = 10000;
  bool eval_json = false;
  eval->add_option("--seed", common.seed, "master seed");
  eval->add_option("-n,--proposals", eval_proposals, "minimum number of proposals");
  eval->add_flag("--json", eval_json, "print JSON");

  auto* metrics = app.add_subcommand("metrics", "precision, recall and F1 from a confusion matrix");
  std::optional<std::uint64_t> tp, fp, fn, tn;
  std::optional<double> precision, recall;
  metrics->add_option("--tp", tp);
  metrics->add_option("--fp", fp);
  metrics->add_option("--fn", fn);
  metrics->add_option("--tn", tn);
  metrics->add_option("--precision", precision);
  metrics->add_option("--recall", recall);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*generate) return cmd_generate(build_config(generate, common), gen_index, gen_out, gen_depth);
    if (*collect) return cmd_collect(build_config(collect, common), grasps, collect_out);
    if (*train) return cmd_train(build_config(train, common), train_dataset, train_out);
    if (*run)
      return cmd_run(build_config(run, common), model_path, save_model_path, log_path, stats_path,
                     run_format);
    if (*rep) return cmd_report(rep_stats, rep_format);
    if (*eval) return cmd_eval_keypoints(build_config(eval, common), eval_proposals, eval_json);
    if (*metrics) return cmd_metrics(tp, fp, fn, tn, precision, recall);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.kind() == ErrorKind::Config) return kExitConfig;
    if (e.kind() == ErrorKind::InvariantViolation) return kExitInvariant;
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
