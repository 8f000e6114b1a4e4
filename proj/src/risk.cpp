#include "prbench/risk.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "prbench/error.hpp"

namespace prb {

namespace {

void check(std::span<const double> losses, double rho, const char* op) {
  if (losses.empty()) throw ValueError(std::string(op) + ": no samples");
  if (!(rho > 0.0 && rho <= 1.0)) throw ValueError(std::string(op) + ": rho must lie in (0, 1]");
  for (double l : losses) {
    if (!std::isfinite(l)) throw NumericError(std::string(op) + ": non-finite loss");
  }
}

}  // namespace

double cvar_objective(std::span<const double> losses, double alpha, double rho) {
  check(losses, rho, "cvar_objective");
  double excess = 0.0;
  for (double l : losses) excess += std::max(l - alpha, 0.0);
  return alpha + excess / (rho * static_cast<double>(losses.size()));
}

double empirical_cvar(std::span<const double> losses, double rho) {
  check(losses, rho, "empirical_cvar");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double denom = rho * static_cast<double>(sorted.size());
  // Threshold at sorted[k]: alpha + (sum_{i<k} sorted[i] - k * alpha) / denom.
  double best = std::numeric_limits<double>::infinity();
  double prefix = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double alpha = sorted[k];
    const double value = alpha + (prefix - static_cast<double>(k) * alpha) / denom;
    best = std::min(best, value);
    prefix += sorted[k];
  }
  return best;
}

double cvar_threshold_gradient(std::span<const double> losses, double alpha, double rho) {
  check(losses, rho, "cvar_threshold_gradient");
  const auto above = std::count_if(losses.begin(), losses.end(), [alpha](double l) { return l >= alpha; });
  return 1.0 - static_cast<double>(above) / (rho * static_cast<double>(losses.size()));
}

double evar_bound(std::span<const double> losses, double a, double rho) {
  check(losses, rho, "evar_bound");
  if (!(a > 0.0)) throw ValueError("evar_bound: a must be > 0");
  double m = -std::numeric_limits<double>::infinity();
  for (double l : losses) m = std::max(m, a * l);
  double s = 0.0;
  for (double l : losses) s += std::exp(a * l - m);
  const double log_mean = m + std::log(s / static_cast<double>(losses.size()));
  return (log_mean - std::log(rho)) / a;
}

EvarMinimum evar_minimize(std::span<const double> losses, double rho) {
  check(losses, rho, "evar_minimize");
  constexpr double kLo = -6.0;
  constexpr double kHi = 6.0;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto g = [&](double u) { return evar_bound(losses, std::exp(u), rho); };

  double lo = kLo, hi = kHi;
  double u1 = hi - inv_phi * (hi - lo);
  double u2 = lo + inv_phi * (hi - lo);
  double g1 = g(u1), g2 = g(u2);
  while (hi - lo > 1e-10) {
    if (g1 <= g2) {
      hi = u2;
      u2 = u1;
      g2 = g1;
      u1 = hi - inv_phi * (hi - lo);
      g1 = g(u1);
    } else {
      lo = u1;
      u1 = u2;
      g1 = g2;
      u2 = lo + inv_phi * (hi - lo);
      g2 = g(u2);
    }
  }
  EvarMinimum best{g1 <= g2 ? g1 : g2, std::exp(g1 <= g2 ? u1 : u2)};
  for (double edge : {kLo, kHi}) {
    const double v = g(edge);
    if (v < best.value) best = {v, std::exp(edge)};
  }
  return best;
}

}  // namespace prb
