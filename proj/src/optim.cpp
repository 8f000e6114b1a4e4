#include "prbench/optim.hpp"

#include <cmath>

#include "prbench/error.hpp"

namespace prb {

LrSchedule LrSchedule::scaled(double base_lr, int total_epochs) {
  LrSchedule s;
  s.base_lr = base_lr;
  s.milestones = {static_cast<int>(std::lround(0.75 * total_epochs)),
                  static_cast<int>(std::lround(0.90 * total_epochs))};
  return s;
}

double LrSchedule::rate(int epoch) const {
  double lr = base_lr;
  for (int m : milestones) {
    if (epoch >= m) lr *= decay;
  }
  return lr;
}

OptimState OptimState::for_params(const ModelParams& params, double momentum_coef, double weight_decay,
                                  LrSchedule schedule) {
  OptimState s;
  s.momentum_coef = momentum_coef;
  s.weight_decay = weight_decay;
  s.schedule = std::move(schedule);
  for (const auto& t : params.tensors) s.momentum.push_back(Vector::Zero(t.value.size()));
  return s;
}

void sgd_step(ModelParams& params, const std::vector<Tensor>& grads, OptimState& opt, int epoch) {
  if (grads.size() != params.size() || opt.momentum.size() != params.size()) {
    throw ShapeError("sgd_step: " + std::to_string(grads.size()) + " gradients and " +
                     std::to_string(opt.momentum.size()) + " momentum buffers for " + std::to_string(params.size()) +
                     " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape()) {
      throw ShapeError("sgd_step: gradient for " + params.tensors[i].name + " has shape " +
                       shape_string(grads[i].shape()) + ", expected " + shape_string(params[i].shape()));
    }
  }
  const double lr = opt.schedule.rate(epoch);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Vector& v = opt.momentum[i];
    Vector& theta = params[i].mutable_values();
    v = opt.momentum_coef * v + grads[i].values() + opt.weight_decay * theta;
    theta -= lr * v;
  }
  ++opt.step;
}

}  // namespace prb
