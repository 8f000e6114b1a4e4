#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prbench/attacks.hpp"
#include "prbench/dataset.hpp"
#include "prbench/model.hpp"
#include "prbench/perturbation.hpp"
#include "prbench/rng.hpp"

namespace prb {

/// Monte Carlo estimate of a binomial proportion with its two-sided
/// Clopper-Pearson interval.
struct PrEstimate {
  double p_hat = 0.0;
  long successes = 0;
  long n = 0;
  double lower = 0.0;
  double upper = 1.0;
};

/// Exact (Clopper-Pearson) interval from beta quantiles; `confidence` in (0, 1).
PrEstimate clopper_pearson(long successes, long n, double confidence = 0.95);

/// Fraction of N perturbations of `x` (one input, no batch axis) under which
/// the prediction stays `y`. Draws come from `rng` in sequence.
PrEstimate estimate_pr(const ModelParams& params, const ModelSpec& spec, const Tensor& x, int y,
                       const PerturbationSpec& pert, long n, RngStream& rng, Index chunk = 512);

/// Per-point PR over the clean-correct rows of a test set. Point i draws from
/// rng.child("point", i).
struct PrProfile {
  Index total = 0;
  std::vector<Index> correct_rows;
  std::vector<PrEstimate> estimates;
};

PrProfile pr_profile(const ModelParams& params, const ModelSpec& spec, const Dataset& data,
                     const PerturbationSpec& pert, long n, const RngStream& rng);

/// Mean PR over the clean-correct rows; empty when no row is correct.
std::optional<double> pr_rate(const PrProfile& profile);
/// Share of clean-correct rows with PR >= 1 - rho; empty when no row is correct.
std::optional<double> prob_acc_rate(const PrProfile& profile, double rho);

std::optional<double> pr_dataset(const ModelParams& params, const ModelSpec& spec, const Dataset& data,
                                 const PerturbationSpec& pert, long n, const RngStream& rng);
std::optional<double> prob_acc(const ModelParams& params, const ModelSpec& spec, const Dataset& data, double rho,
                               const PerturbationSpec& pert, long n, const RngStream& rng);

double clean_accuracy(const ModelParams& params, const ModelSpec& spec, const Dataset& data);

/// Accuracy on perturbed inputs over all rows; rows are attacked in chunks,
/// each seeded by its global row index.
double adversarial_accuracy(const ModelParams& params, const ModelSpec& spec, const Dataset& data,
                            const AttackSpec& atk, const RngStream& rng, Index chunk = 256);

/// Accuracy under `auto_proxy` with the gamma, step and bounds of `base`.
double proxy_accuracy(const ModelParams& params, const ModelSpec& spec, const Dataset& data, const AttackSpec& base,
                      const RngStream& rng, Index chunk = 256);

/// train - test. Both rates must lie in [0, 1].
double generalization_error(double train_metric, double test_metric);

/// Sampled max over `samples` uniform draws in the gamma ball (clipped to the
/// bounds) of ||softmax(f(x + delta)) - softmax(f(x))||_2 for one input.
double estimate_nu(const ModelParams& params, const ModelSpec& spec, const Tensor& x, const PerturbationSpec& pert,
                   long samples, RngStream& rng, Index chunk = 512);

}  // namespace prb
