#include "prbench/score.hpp"

#include <algorithm>
#include <cmath>

#include "prbench/error.hpp"

namespace prb {

std::vector<ScoredRow> composite_score(std::span<const ScoreRow> rows, std::span<const double> weights,
                                       std::span<const bool> lower_is_better) {
  if (rows.size() < 2) throw ValueError("composite_score: need at least two rows to normalize");
  const std::size_t cols = weights.size();
  if (lower_is_better.size() != cols) throw ValueError("composite_score: one direction flag per weight required");
  if (std::any_of(weights.begin(), weights.end(), [](double w) { return !(w >= 0.0) || !std::isfinite(w); })) {
    throw ValueError("composite_score: weights must be finite and >= 0");
  }
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
    throw ValueError("composite_score: all weights are zero");
  }
  for (const auto& r : rows) {
    if (r.metrics.size() != cols) {
      throw ValueError("composite_score: row " + r.method + " has " + std::to_string(r.metrics.size()) +
                       " metrics, expected " + std::to_string(cols));
    }
    for (double v : r.metrics) {
      if (!std::isfinite(v)) throw ValueError("composite_score: row " + r.method + " has a non-finite metric");
    }
  }

  std::vector<ScoredRow> out;
  for (const auto& r : rows) out.push_back({r.method, r.metrics, std::vector<double>(cols), 0.0, 0});
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = rows[0].metrics[c], hi = lo;
    for (const auto& r : rows) {
      lo = std::min(lo, r.metrics[c]);
      hi = std::max(hi, r.metrics[c]);
    }
    for (auto& r : out) {
      double v = hi > lo ? (r.metrics[c] - lo) / (hi - lo) : 0.5;
      if (lower_is_better[c]) v = 1.0 - v;
      r.normalized[c] = v;
      r.score += weights[c] * v;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredRow& a, const ScoredRow& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.method < b.method;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
  return out;
}

}  // namespace prb
