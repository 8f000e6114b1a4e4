#pragma once

#include <span>

namespace prb {

/// alpha + (1 / (rho n)) * sum_i [loss_i - alpha]_+
double cvar_objective(std::span<const double> losses, double alpha, double rho);

/// Exact minimum of `cvar_objective` over alpha, i.e. the mean of the worst
/// rho-fraction of `losses` (fractional tail mass included). The objective is
/// convex and piecewise linear with kinks at the samples, so the minimum is
/// found by evaluating every sample as a threshold.
double empirical_cvar(std::span<const double> losses, double rho);

/// Subgradient of the objective in alpha, as the threshold update uses it:
/// 1 - (1 / (rho n)) * #{loss_i >= alpha}.
double cvar_threshold_gradient(std::span<const double> losses, double alpha, double rho);

/// (1 / a) * log(mean(exp(a * loss)) / rho), evaluated with log-sum-exp.
double evar_bound(std::span<const double> losses, double a, double rho);

struct EvarMinimum {
  double value;
  /// Minimizing a, in (e^-6, e^6).
  double a;
};

/// Minimizes `evar_bound` over a = exp(u), u in [-6, 6], by golden-section
/// search in u. The bound is quasi-convex in u so the search is exact up to
/// the bracket tolerance.
EvarMinimum evar_minimize(std::span<const double> losses, double rho);

inline double evar_objective(std::span<const double> losses, double rho) { return evar_minimize(losses, rho).value; }

}  // namespace prb
