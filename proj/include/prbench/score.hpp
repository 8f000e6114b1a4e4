#pragma once

#include <span>
#include <string>
#include <vector>

namespace prb {

/// One method's metric values, in the column order of the table being scored.
struct ScoreRow {
  std::string method;
  std::vector<double> metrics;
};

struct ScoredRow {
  std::string method;
  std::vector<double> metrics;
  /// Min-max normalized values, lower-is-better columns already reversed.
  std::vector<double> normalized;
  double score = 0.0;
  int rank = 0;
};

/// Min-max normalizes every column across rows (a constant column maps to
/// 0.5), reverses lower-is-better columns with v -> 1 - v, and scores each row
/// by the weighted sum. Output is sorted by descending score, ties by method
/// tag; ranks start at 1. Throws ValueError for fewer than two rows, ragged
/// rows, non-finite values, negative weights or all-zero weights.
std::vector<ScoredRow> composite_score(std::span<const ScoreRow> rows, std::span<const double> weights,
                                       std::span<const bool> lower_is_better);

}  // namespace prb
