#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prbench/attacks.hpp"
#include "prbench/dataset.hpp"
#include "prbench/model.hpp"
#include "prbench/optim.hpp"
#include "prbench/perturbation.hpp"

namespace prb {

enum class Method { erm, pgd, trades, mart, alp, clp, kl_pgd, corruption, cvar, evar, at_pr };

std::string_view to_string(Method method);
/// Accepts the tags erm, pgd, trades, mart, alp, clp, kl-pgd, corruption,
/// cvar, evar, at-pr.
Method parse_method(std::string_view tag);
/// Methods that train on attack-generated inputs.
bool is_adversarial(Method method);

struct TrainConfig {
  Method method = Method::erm;
  ModelSpec model;
  /// Random perturbations for corruption, cvar and evar.
  PerturbationSpec perturbation;
  /// Attack generating training inputs. Its loss is overridden per method:
  /// KL for trades and kl-pgd, CE otherwise.
  AttackSpec attack;
  /// Penalty weight of trades, mart, alp and clp.
  std::optional<double> lambda;

  double rho = 0.1;
  int samples = 20;
  int alpha_steps = 10;
  double alpha_step_size = 0.05;

  int candidates = 5;
  int walk_cap = 50;
  std::optional<double> candidate_step_min;
  std::optional<double> candidate_step_max;
  int candidate_steps_min = 5;
  int candidate_steps_max = 15;
  /// Boundary-walk step; the candidate's own PGD step when unset.
  std::optional<double> walk_step;

  int epochs = 20;
  int batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 3.5e-3;
  std::uint64_t seed = 0;

  /// Training rows scored for the per-epoch accuracy log entry.
  Index log_accuracy_rows = 2000;

  /// Fills unset method-dependent values: penalty weights (trades 6, mart 5,
  /// alp 0.01, clp 0.3, otherwise 0) and the candidate step range
  /// [gamma / 10, gamma / 4].
  TrainConfig& complete_defaults();
  /// Throws ConfigError listing every violated constraint.
  void validate() const;
};

/// Batch-mean training loss for the methods with a closed objective
/// (everything except cvar, evar and at-pr). Attack inputs are generated from
/// `rng` against the current parameters.
Tensor training_objective(Method method, const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                          std::span<const int> y, const TrainConfig& cfg, const RngStream& rng);

/// The same objective evaluated on a given perturbation of the batch.
Tensor objective_with_delta(Method method, const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                            std::span<const int> y, const Tensor& delta, const TrainConfig& cfg);

/// Perturbation each method trains on.
Tensor method_delta(Method method, const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                    std::span<const int> y, const TrainConfig& cfg, const RngStream& rng);

/// Per-example thresholds alpha_j of one batch.
struct CvarState {
  Vector alpha;
};

struct CvarStep {
  std::vector<Tensor> grads;
  /// Hinge objective alpha_j + (1/(rho M B)) sum [l - alpha_j]_+ on the
  /// draws used for the gradient, batch-averaged.
  double objective;
  /// Mean loss over the draws of the last threshold update.
  double threshold_loss;
};

/// Clean loss of every example, the threshold starting point.
CvarState cvar_init(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y);

/// `alpha_steps` threshold updates on fresh draws, then the parameter
/// gradient of (1/(rho M B)) sum_{j,k} [l(x_j + delta_jk) - alpha_j]_+ on
/// another fresh set of M draws per example.
CvarStep cvar_batch_step(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                         const TrainConfig& cfg, CvarState& state, const RngStream& rng);

/// Losses of M perturbed copies of each row, laid out (B, M).
Tensor perturbed_losses(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                        const PerturbationSpec& pert, int samples, const RngStream& rng);

/// Batch mean of the entropic bound over M perturbed losses per example,
/// differentiable with a_j held at each example's minimizer.
Tensor evar_training_objective(const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                               std::span<const int> y, const TrainConfig& cfg, const RngStream& rng);

/// One PGD candidate per generation setting.
struct AtprCandidates {
  std::vector<Tensor> inputs;
  std::vector<double> step_sizes;
  std::vector<int> steps;
};

AtprCandidates atpr_candidates(const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                               std::span<const int> y, const TrainConfig& cfg, const RngStream& rng);

/// Length of the gradient-descent walk from each row of `candidate` until it
/// is classified as y, at most `cap` steps of size `step`; 0 for rows already
/// classified correctly.
Vector boundary_walk_distance(const ModelParams& params, const ModelSpec& spec, const Tensor& candidate,
                              std::span<const int> y, int cap, double step);

struct AtprSelection {
  Tensor inputs;
  std::vector<int> chosen;
  /// (candidates, B) walk distances.
  RowMatrix distances;
};

/// Per row, the candidate with the longest walk back to the correct class;
/// ties pick the lowest index.
AtprSelection atpr_select(const ModelParams& params, const ModelSpec& spec, const AtprCandidates& candidates,
                          std::span<const int> y, const TrainConfig& cfg);

Tensor atpr_select_ae(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                      const TrainConfig& cfg, const RngStream& rng);

struct EpochLog {
  int epoch;
  double loss;
  double train_accuracy;
  double seconds;
  double lr;
  /// cvar only: mean loss seen by the threshold updates.
  std::optional<double> threshold_loss;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  double seconds_per_epoch = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Seeded training loop: shuffled mini-batches, the method objective, SGD
/// with momentum and the step-decay schedule. Throws NumericError when a loss
/// or gradient stops being finite.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch = {});

}  // namespace prb
