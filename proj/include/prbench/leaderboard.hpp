#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "prbench/report.hpp"

namespace prb {

/// Scored columns, in order: clean accuracy, accuracy under the score attack,
/// uniform PR at the score radius, ProbAcc (rho = 0.05) at that radius, GE of
/// the attack accuracy, GE of the PR, seconds per epoch. The last three are
/// lower-is-better.
inline constexpr std::array<const char*, 7> kLeaderboardColumns{
    "clean_acc", "adv_acc", "pr", "prob_acc", "ge_adv", "ge_pr", "sec_per_epoch"};
inline constexpr std::array<bool, 7> kLowerIsBetter{false, false, false, false, true, true, true};

struct LeaderboardRow {
  std::string method;
  std::string model;
  std::string dataset;
  std::string source;
  std::array<double, 7> metrics{};
  double score = 0.0;
  int rank = 0;
};

struct Leaderboard {
  std::vector<LeaderboardRow> rows;
  std::vector<std::string> warnings;
};

/// Pulls the seven scored values out of a report. Throws DataError naming the
/// first missing value.
std::array<double, 7> leaderboard_metrics(const EvalReport& report);

/// Scores rows per (dataset, model) group. Groups with a single row are
/// dropped with a warning.
Leaderboard rank_rows(std::vector<LeaderboardRow> rows, const std::array<double, 7>& weights);

/// Collects every report.json below `in_dir`, ranks them and writes
/// leaderboard.csv, leaderboard.json and leaderboard.html into `out_dir`.
/// Throws DataError when no report is found.
Leaderboard export_leaderboard(const std::filesystem::path& in_dir, const std::array<double, 7>& weights,
                               const std::filesystem::path& out_dir);

std::string leaderboard_csv(const Leaderboard& board);
std::string leaderboard_html(const Leaderboard& board);

}  // namespace prb
