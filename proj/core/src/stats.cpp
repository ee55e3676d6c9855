#include "trussgrasp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "trussgrasp/error.hpp"

namespace trussgrasp {

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics compute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  const std::uint64_t total = tp + fp + fn + tn;
  if (total == 0) fail(ErrorKind::InvalidInput, "confusion matrix is empty");
  Metrics m;
  auto ratio = [&](std::uint64_t num, std::uint64_t den) {
    if (den == 0) {
      m.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = f1_score(m.precision, m.recall);
  m.tp_fraction = ratio(tp, total);
  m.fp_fraction = ratio(fp, total);
  m.fn_fraction = ratio(fn, total);
  m.tn_fraction = ratio(tn, total);
  return m;
}

int PileStats::total_attempts() const {
  int n = 0;
  for (int a : attempts_per_truss) n += a;
  return n;
}

int PileStats::first_attempt_successes() const {
  return static_cast<int>(std::count(attempts_per_truss.begin(), attempts_per_truss.end(), 1));
}

StrategyStats* StatsReport::find(const std::string& experiment, const std::string& strategy) {
  for (auto& s : strategies)
    if (s.experiment == experiment && s.strategy == strategy) return &s;
  return nullptr;
}

const StrategyStats* StatsReport::find(const std::string& experiment,
                                       const std::string& strategy) const {
  return const_cast<StatsReport*>(this)->find(experiment, strategy);
}

void StatsReport::validate() const {
  for (const auto& s : strategies)
    if (s.failures() > s.trials)
      fail(ErrorKind::InvariantViolation, "more failures than trials for " + s.strategy);
  for (const auto& p : piles)
    for (int a : p.attempts_per_truss)
      if (a < 1) fail(ErrorKind::InvariantViolation, "a removed truss needs at least one attempt");
}

std::string format_percent(double fraction) {
  const double tenths = std::round(fraction * 1000.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", tenths / 10.0);
  return buf;
}

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "table") return ReportFormat::Table;
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  fail(ErrorKind::Config, "unknown report format '" + name + "'");
}

namespace {

std::string count_with_rate(std::uint64_t count, std::uint64_t trials) {
  return std::to_string(count) + " (" +
         format_percent(trials ? static_cast<double>(count) / static_cast<double>(trials) : 0.0) +
         ")";
}

std::string table(const StatsReport& stats) {
  std::ostringstream out;
  std::vector<const StrategyStats*> rows;
  for (const auto& s : stats.strategies)
    if (s.trials > 0) rows.push_back(&s);
  if (!rows.empty()) {
    out << std::left << std::setw(12) << "experiment" << std::setw(10) << "strategy"
        << std::setw(8) << "trials" << std::setw(16) << "failures" << std::setw(16) << "gripper"
        << "perception\n";
    for (const auto* s : rows)
      out << std::left << std::setw(12) << s->experiment << std::setw(10) << s->strategy
          << std::setw(8) << s->trials << std::setw(16) << count_with_rate(s->failures(), s->trials)
          << std::setw(16) << count_with_rate(s->gripper_failures, s->trials)
          << count_with_rate(s->perception_failures, s->trials) << '\n';
  }
  if (!stats.piles.empty()) {
    if (!rows.empty()) out << '\n';
    out << std::left << std::setw(10) << "strategy" << std::setw(6) << "pile" << std::setw(9) << "trusses" << std::setw(10)
        << "attempts" << std::setw(9) << "cleared" << std::setw(15) << "first-attempt"
        << "attempts per truss\n";
    int trusses = 0, first = 0;
    for (const auto& p : stats.piles) {
      std::string hist;
      for (int a : p.attempts_per_truss) hist += (hist.empty() ? "" : " ") + std::to_string(a);
      out << std::left << std::setw(10) << p.strategy << std::setw(6) << p.pile << std::setw(9) << p.trusses << std::setw(10)
          << p.total_attempts() << std::setw(9) << (p.cleared ? "yes" : "no") << std::setw(15)
          << p.first_attempt_successes() << hist << '\n';
      trusses += p.trusses;
      first += p.first_attempt_successes();
    }
    out << "first-attempt grasps: " << first << '/' << trusses << " ("
        << format_percent(trusses ? static_cast<double>(first) / trusses : 0.0) << ")\n";
  }
  return out.str();
}

std::string csv(const StatsReport& stats) {
  std::ostringstream out;
  out << "section,experiment,strategy,trials,failures,failure_rate,gripper,perception,pile,"
         "trusses,cleared,attempts\n";
  for (const auto& s : stats.strategies) {
    if (s.trials == 0) continue;
    out << "strategy," << s.experiment << ',' << s.strategy << ',' << s.trials << ','
        << s.failures() << ',' << format_percent(s.failure_rate()) << ',' << s.gripper_failures
        << ',' << s.perception_failures << ",,,,\n";
  }
  for (const auto& p : stats.piles) {
    std::string hist;
    for (int a : p.attempts_per_truss) hist += (hist.empty() ? "" : " ") + std::to_string(a);
    out << "pile,pile," << p.strategy << ",,,,,," << p.pile << ',' << p.trusses << ',' << (p.cleared ? 1 : 0) << ','
        << hist << '\n';
  }
  return out.str();
}

}  // namespace

std::string report(const StatsReport& stats, ReportFormat format) {
  stats.validate();
  switch (format) {
    case ReportFormat::Table: return table(stats);
    case ReportFormat::Json: return stats_to_json(stats).dump(2) + "\n";
    case ReportFormat::Csv: return csv(stats);
  }
  fail(ErrorKind::Config, "unknown report format");
}

nlohmann::json stats_to_json(const StatsReport& stats) {
  nlohmann::json j;
  j["strategies"] = nlohmann::json::array();
  for (const auto& s : stats.strategies) {
    if (s.trials == 0) continue;
    j["strategies"].push_back({{"experiment", s.experiment},
                               {"strategy", s.strategy},
                               {"trials", s.trials},
                               {"failures", s.failures()},
                               {"failure_rate", s.failure_rate()},
                               {"gripper_failures", s.gripper_failures},
                               {"perception_failures", s.perception_failures}});
  }
  j["piles"] = nlohmann::json::array();
  for (const auto& p : stats.piles)
    j["piles"].push_back({{"strategy", p.strategy},
                          {"pile", p.pile},
                          {"trusses", p.trusses},
                          {"cleared", p.cleared},
                          {"attempts_per_truss", p.attempts_per_truss},
                          {"max_consecutive_repeats", p.max_consecutive_repeats}});
  return j;
}

StatsReport stats_from_json(const nlohmann::json& j) {
  StatsReport r;
  try {
    for (const auto& s : j.at("strategies")) {
      StrategyStats st;
      st.experiment = s.at("experiment").get<std::string>();
      st.strategy = s.at("strategy").get<std::string>();
      st.trials = s.at("trials").get<std::uint64_t>();
      st.gripper_failures = s.at("gripper_failures").get<std::uint64_t>();
      st.perception_failures = s.at("perception_failures").get<std::uint64_t>();
      if (s.contains("failures") && s.at("failures").get<std::uint64_t>() != st.failures())
        fail(ErrorKind::InvariantViolation, "failures differ from gripper + perception");
      r.strategies.push_back(std::move(st));
    }
    for (const auto& p : j.at("piles")) {
      PileStats ps;
      ps.strategy = p.at("strategy").get<std::string>();
      ps.pile = p.at("pile").get<int>();
      ps.trusses = p.at("trusses").get<int>();
      ps.cleared = p.at("cleared").get<bool>();
      ps.attempts_per_truss = p.at("attempts_per_truss").get<std::vector<int>>();
      ps.max_consecutive_repeats = p.at("max_consecutive_repeats").get<int>();
      r.piles.push_back(std::move(ps));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed stats document: ") + e.what());
  }
  r.validate();
  return r;
}

}  // namespace trussgrasp
