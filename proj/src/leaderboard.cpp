#include "prbench/leaderboard.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include "prbench/error.hpp"
#include "prbench/score.hpp"

namespace prb {

namespace fs = std::filesystem;

namespace {

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::missing_file, "cannot write " + path.string());
  f << text;
}

}  // namespace

std::array<double, 7> leaderboard_metrics(const EvalReport& r) {
  auto missing = [&](const std::string& what) {
    return DataError(DataError::Kind::bad_format, r.method + " report lacks " + what);
  };
  const AttackAccuracy* adv = find_attack(r, r.score_attack);
  if (!adv) throw missing("accuracy under " + r.score_attack);
  const PrEntry* pr = find_pr(r, NoiseFamily::uniform, r.score_gamma);
  if (!pr || !pr->value) throw missing("uniform PR at gamma " + number(r.score_gamma));
  const ProbAccEntry* pa = find_prob_acc(r, NoiseFamily::uniform, r.score_gamma, 0.05);
  if (!pa || !pa->value) throw missing("ProbAcc(0.05) at gamma " + number(r.score_gamma));
  if (!r.ge_ar) throw missing("GE of the attack accuracy");
  const GePrEntry* ge_pr = find_ge_pr(r, r.score_gamma);
  if (!ge_pr || !ge_pr->value) throw missing("GE of PR at gamma " + number(r.score_gamma));
  if (!r.seconds_per_epoch) throw missing("timing.json");
  return {r.clean_accuracy, adv->accuracy, *pr->value, *pa->value, *r.ge_ar, *ge_pr->value, *r.seconds_per_epoch};
}

Leaderboard rank_rows(std::vector<LeaderboardRow> rows, const std::array<double, 7>& weights) {
  std::map<std::pair<std::string, std::string>, std::vector<LeaderboardRow>> groups;
  for (auto& row : rows) groups[{row.dataset, row.model}].push_back(std::move(row));
  Leaderboard board;
  for (auto& [key, members] : groups) {
    if (members.size() < 2) {
      board.warnings.push_back("group " + key.first + "/" + key.second + " has a single report; skipped");
      continue;
    }
    std::vector<ScoreRow> input;
    for (const auto& m : members) input.push_back({m.method, std::vector<double>(m.metrics.begin(), m.metrics.end())});
    const auto scored = composite_score(input, weights, kLowerIsBetter);
    std::vector<bool> used(members.size(), false);
    for (const auto& s : scored) {
      // Rows are matched back by method and metrics; duplicates pair in order.
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (used[i] || members[i].method != s.method ||
            !std::equal(s.metrics.begin(), s.metrics.end(), members[i].metrics.begin())) {
          continue;
        }
        used[i] = true;
        LeaderboardRow row = members[i];
        row.score = s.score;
        row.rank = s.rank;
        board.rows.push_back(std::move(row));
        break;
      }
    }
  }
  return board;
}

Leaderboard export_leaderboard(const fs::path& in_dir, const std::array<double, 7>& weights, const fs::path& out_dir) {
  if (!fs::is_directory(in_dir)) throw DataError(DataError::Kind::missing_file, in_dir.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "report.json") dirs.push_back(entry.path().parent_path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError(DataError::Kind::missing_file, "no report.json below " + in_dir.string());

  std::vector<LeaderboardRow> rows;
  std::vector<std::string> warnings;
  for (const auto& dir : dirs) {
    try {
      const EvalReport r = read_report(dir);
      rows.push_back({r.method, r.model, r.dataset, fs::relative(dir, in_dir).string(), leaderboard_metrics(r), 0.0, 0});
    } catch (const DataError& e) {
      warnings.push_back(dir.string() + ": " + e.what() + "; skipped");
    }
  }
  Leaderboard board = rank_rows(std::move(rows), weights);
  board.warnings.insert(board.warnings.begin(), warnings.begin(), warnings.end());

  fs::create_directories(out_dir);
  write_file(out_dir / "leaderboard.csv", leaderboard_csv(board));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : board.rows) {
    nlohmann::json m;
    for (std::size_t c = 0; c < kLeaderboardColumns.size(); ++c) m[kLeaderboardColumns[c]] = row.metrics[c];
    j.push_back({{"dataset", row.dataset},
                 {"model", row.model},
                 {"method", row.method},
                 {"source", row.source},
                 {"metrics", m},
                 {"score", row.score},
                 {"rank", row.rank}});
  }
  write_file(out_dir / "leaderboard.json", j.dump(2) + "\n");
  write_file(out_dir / "leaderboard.html", leaderboard_html(board));
  return board;
}

std::string leaderboard_csv(const Leaderboard& board) {
  std::string out = "dataset,model,rank,method,score";
  for (const char* c : kLeaderboardColumns) out += std::string(",") + c;
  out += ",source\n";
  for (const auto& row : board.rows) {
    out += csv_field(row.dataset) + "," + csv_field(row.model) + "," + std::to_string(row.rank) + "," +
           csv_field(row.method) + "," + number(row.score);
    for (double v : row.metrics) out += "," + number(v);
    out += "," + csv_field(row.source) + "\n";
  }
  return out;
}

std::string leaderboard_html(const Leaderboard& board) {
  std::string out =
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>prbench leaderboard</title>\n"
      "<style>body{font-family:sans-serif}table{border-collapse:collapse;margin-bottom:2em}"
      "td,th{border:1px solid #999;padding:4px 8px;text-align:right}td.t,th.t{text-align:left}</style>\n"
      "</head>\n<body>\n<h1>prbench leaderboard</h1>\n";
  std::string group;
  for (const auto& row : board.rows) {
    const std::string g = row.dataset + " / " + row.model;
    if (g != group) {
      if (!group.empty()) out += "</table>\n";
      group = g;
      out += "<h2>" + html_escape(g) + "</h2>\n<table>\n<tr><th>rank</th><th class=\"t\">method</th><th>score</th>";
      for (const char* c : kLeaderboardColumns) out += std::string("<th>") + c + "</th>";
      out += "</tr>\n";
    }
    out += "<tr><td>" + std::to_string(row.rank) + "</td><td class=\"t\">" + html_escape(row.method) + "</td><td>" +
           number(row.score) + "</td>";
    for (double v : row.metrics) out += "<td>" + number(v) + "</td>";
    out += "</tr>\n";
  }
  if (!group.empty()) out += "</table>\n";
  for (const auto& w : board.warnings) out += "<p>" + html_escape(w) + "</p>\n";
  out += "</body>\n</html>\n";
  return out;
}

}  // namespace prb
