#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace trussgrasp {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double tp_fraction = 0.0;
  double fp_fraction = 0.0;
  double fn_fraction = 0.0;
  double tn_fraction = 0.0;
  bool degenerate = false;  // some ratio had a zero denominator
};

Metrics compute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

struct StrategyStats {
  std::string experiment;
  std::string strategy;
  std::uint64_t trials = 0;
  std::uint64_t gripper_failures = 0;
  std::uint64_t perception_failures = 0;

  std::uint64_t failures() const { return gripper_failures + perception_failures; }
  double failure_rate() const {
    return trials ? static_cast<double>(failures()) / static_cast<double>(trials) : 0.0;
  }
  friend bool operator==(const StrategyStats&, const StrategyStats&) = default;
};

struct PileStats {
  std::string strategy;
  int pile = 0;
  int trusses = 0;
  bool cleared = false;
  std::vector<int> attempts_per_truss;  // removal order
  int max_consecutive_repeats = 0;

  int total_attempts() const;
  int first_attempt_successes() const;
  friend bool operator==(const PileStats&, const PileStats&) = default;
};

struct StatsReport {
  std::vector<StrategyStats> strategies;
  std::vector<PileStats> piles;

  StrategyStats* find(const std::string& experiment, const std::string& strategy);
  const StrategyStats* find(const std::string& experiment, const std::string& strategy) const;
  void validate() const;
  friend bool operator==(const StatsReport&, const StatsReport&) = default;
};

/// "47.6%": one decimal, rounded half away from zero.
std::string format_percent(double fraction);

enum class ReportFormat { Table, Json, Csv };
ReportFormat report_format_from_string(const std::string& name);

std::string report(const StatsReport& stats, ReportFormat format);

nlohmann::json stats_to_json(const StatsReport& stats);
StatsReport stats_from_json(const nlohmann::json& doc);

}  // namespace trussgrasp
