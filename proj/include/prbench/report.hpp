#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prbench/perturbation.hpp"

namespace prb {

struct AttackAccuracy {
  std::string attack;
  double accuracy;
};

struct PrEntry {
  NoiseFamily family;
  double gamma;
  /// Empty when no row was classified correctly.
  std::optional<double> value;
  long correct_rows;
};

struct ProbAccEntry {
  NoiseFamily family;
  double gamma;
  double rho;
  std::optional<double> value;
};

struct GePrEntry {
  double gamma;
  std::optional<double> value;
};

struct NuSummary {
  double gamma;
  long points;
  long samples;
  double mean;
  double max;
};

/// Everything one evaluation measures. Rates are fractions in [0, 1].
struct EvalReport {
  std::string method;
  std::string model;
  std::string dataset;
  std::uint64_t seed = 0;
  std::string config_hash;
  long test_rows = 0;
  long train_rows = 0;
  long pr_samples = 0;

  double clean_accuracy = 0.0;
  std::vector<AttackAccuracy> adversarial;
  std::vector<PrEntry> pr;
  std::vector<ProbAccEntry> prob_acc;

  std::optional<double> ge_clean;
  std::string ge_attack;
  std::optional<double> ge_ar;
  std::vector<GePrEntry> ge_pr;

  std::optional<NuSummary> nu;

  std::string score_attack;
  double score_gamma = 0.0;

  /// Wall-clock training time. Kept out of report.json so that file stays
  /// reproducible; written to timing.json beside it.
  std::optional<double> seconds_per_epoch;
};

/// Field names of report.json, schema "prbench.eval_report/1". Keys are
/// emitted sorted so equal reports serialize to equal bytes.
nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Writes report.json, and timing.json when seconds_per_epoch is known.
void write_report(const std::filesystem::path& dir, const EvalReport& report);
/// Reads report.json and, if present, timing.json from `dir`.
EvalReport read_report(const std::filesystem::path& dir);

const AttackAccuracy* find_attack(const EvalReport& report, const std::string& attack);
const PrEntry* find_pr(const EvalReport& report, NoiseFamily family, double gamma);
const ProbAccEntry* find_prob_acc(const EvalReport& report, NoiseFamily family, double gamma, double rho);
const GePrEntry* find_ge_pr(const EvalReport& report, double gamma);

}  // namespace prb
