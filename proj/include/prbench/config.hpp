#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prbench/perturbation.hpp"
#include "prbench/trainers.hpp"

namespace prb {

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Throws ConfigError for malformed lines and repeated keys.
std::map<std::string, std::string> parse_key_values(std::string_view text);

struct DataConfig {
  /// mnist, two-moons, gaussian-blobs or linear.
  std::string name = "mnist";
  Index train_size = 0;
  Index test_size = 0;
  double noise = 0.05;
  /// Seed of the synthetic generators; independent of the run seed.
  std::uint64_t seed = 0;
  /// Overrides PRBENCH_DATA when set.
  std::optional<std::string> dir;

  bool synthetic() const { return name != "mnist"; }
};

struct EvalConfig {
  /// Attack names: pgd<k>, pgd-kl<k>, cw<k>, auto.
  std::vector<std::string> attacks;
  int restarts = 1;
  bool random_start = true;
  std::vector<double> pr_radii;
  std::vector<NoiseFamily> distributions{NoiseFamily::uniform};
  long pr_samples = 100;
  std::vector<double> probacc_rhos{0.01, 0.05, 0.1};
  /// Radius whose uniform PR, ProbAcc and GE_PR feed the leaderboard.
  double score_gamma = 0.0;
  /// Attack whose accuracy feeds the leaderboard and GE_AR.
  std::string score_attack = "pgd20";
  /// Leading training rows used for GE; 0 skips GE.
  Index train_subset = 0;
  /// Leading test rows probed for nu; 0 skips the probe.
  Index nu_points = 0;
  long nu_samples = 1000;
};

struct ExperimentConfig {
  /// desk or full.
  std::string scale = "desk";
  DataConfig data;
  TrainConfig train;
  EvalConfig eval;
  /// Every resolved key, defaults included, one `key = value` per line in
  /// key order.
  std::string canonical;
  std::uint64_t hash = 0;

  /// 16 lowercase hex digits of `hash`.
  std::string hash_hex() const;
};

/// Resolves a config text against the schema and its defaults. `seed`, when
/// given, replaces the `seed` key. Every problem found is reported in one
/// ConfigError, each entry prefixed with its key.
ExperimentConfig parse_config(std::string_view text, std::optional<std::uint64_t> seed = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt);

/// Attack spec for an evaluation attack name, using the configured radius,
/// step and bounds. Throws ValueError for unknown names.
AttackSpec eval_attack(const ExperimentConfig& cfg, const std::string& name);

}  // namespace prb
