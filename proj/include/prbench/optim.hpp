#pragma once

#include <vector>

#include "prbench/model.hpp"

namespace prb {

/// Step-decay learning-rate schedule: base_lr * decay^(milestones passed).
struct LrSchedule {
  double base_lr = 0.01;
  double decay = 0.1;
  std::vector<int> milestones{75, 90};

  /// Milestones at 75% and 90% of `total_epochs` (75 and 90 for 100 epochs).
  static LrSchedule scaled(double base_lr, int total_epochs);
  double rate(int epoch) const;
};

/// SGD with heavy-ball momentum and coupled weight decay:
///   v <- mu * v + g + wd * theta;  theta <- theta - lr(epoch) * v
struct OptimState {
  std::vector<Vector> momentum;
  long step = 0;
  double momentum_coef = 0.9;
  double weight_decay = 3.5e-3;
  LrSchedule schedule;

  static OptimState for_params(const ModelParams& params, double momentum_coef, double weight_decay,
                               LrSchedule schedule);
};

/// Applies one update in place. Throws ShapeError when `grads` do not line up
/// with `params`.
void sgd_step(ModelParams& params, const std::vector<Tensor>& grads, OptimState& opt, int epoch);

}  // namespace prb
