#include "prbench/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "prbench/error.hpp"
#include "prbench/ops.hpp"
#include "prbench/risk.hpp"

namespace prb {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::erm: return "erm";
    case Method::pgd: return "pgd";
    case Method::trades: return "trades";
    case Method::mart: return "mart";
    case Method::alp: return "alp";
    case Method::clp: return "clp";
    case Method::kl_pgd: return "kl-pgd";
    case Method::corruption: return "corruption";
    case Method::cvar: return "cvar";
    case Method::evar: return "evar";
    case Method::at_pr: return "at-pr";
  }
  return "erm";
}

Method parse_method(std::string_view tag) {
  for (Method m : {Method::erm, Method::pgd, Method::trades, Method::mart, Method::alp, Method::clp, Method::kl_pgd,
                   Method::corruption, Method::cvar, Method::evar, Method::at_pr}) {
    if (to_string(m) == tag) return m;
  }
  throw ValueError("unknown method tag '" + std::string(tag) + "'");
}

bool is_adversarial(Method method) {
  switch (method) {
    case Method::pgd:
    case Method::trades:
    case Method::mart:
    case Method::alp:
    case Method::clp:
    case Method::kl_pgd:
    case Method::at_pr: return true;
    default: return false;
  }
}

TrainConfig& TrainConfig::complete_defaults() {
  if (!lambda) {
    switch (method) {
      case Method::trades: lambda = 6.0; break;
      case Method::mart: lambda = 5.0; break;
      case Method::alp: lambda = 0.01; break;
      case Method::clp: lambda = 0.3; break;
      default: lambda = 0.0; break;
    }
  }
  if (!candidate_step_min) candidate_step_min = attack.gamma / 10.0;
  if (!candidate_step_max) candidate_step_max = attack.gamma / 4.0;
  return *this;
}

void TrainConfig::validate() const {
  std::vector<std::string> issues;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) issues.push_back(what);
  };
  auto wrap = [&](const std::string& prefix, const auto& fn) {
    try {
      fn();
    } catch (const ValueError& e) {
      issues.push_back(prefix + ": " + e.what());
    }
  };
  wrap("model", [&] { model.validate(); });
  wrap("attack", [&] { attack.validate(); });
  if (method == Method::corruption || method == Method::cvar || method == Method::evar) {
    wrap("perturbation", [&] { perturbation.validate(); });
  }
  need(!lambda || *lambda >= 0.0, "train.lambda: must be >= 0");
  need(rho > 0.0 && rho <= 1.0, "cvar.rho: must lie in (0, 1]");
  need(samples >= 1, "cvar.samples: must be >= 1");
  need(alpha_steps >= 0, "cvar.inner_steps: must be >= 0");
  need(alpha_step_size > 0.0, "cvar.alpha_step: must be > 0");
  need(candidates >= 1, "atpr.candidates: must be >= 1");
  need(walk_cap >= 0, "atpr.walk_cap: must be >= 0");
  if (candidate_step_min && candidate_step_max) {
    need(*candidate_step_min > 0.0 && *candidate_step_min <= *candidate_step_max,
         "atpr.alpha_min/alpha_max: need 0 < alpha_min <= alpha_max");
  }
  need(candidate_steps_min >= 1 && candidate_steps_min <= candidate_steps_max,
       "atpr.steps_min/steps_max: need 1 <= steps_min <= steps_max");
  need(!walk_step || *walk_step > 0.0, "atpr.walk_step: must be > 0");
  need(epochs >= 1, "train.epochs: must be >= 1");
  need(batch_size >= 1, "train.batch_size: must be >= 1");
  need(lr > 0.0, "train.lr: must be > 0");
  need(momentum >= 0.0 && momentum < 1.0, "train.momentum: must lie in [0, 1)");
  need(weight_decay >= 0.0, "train.weight_decay: must be >= 0");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

namespace {

double penalty(const TrainConfig& cfg) { return cfg.lambda.value_or(0.0); }

AttackSpec training_attack(Method method, const TrainConfig& cfg) {
  AttackSpec atk = cfg.attack;
  atk.loss = method == Method::trades || method == Method::kl_pgd ? AttackLoss::kl : AttackLoss::ce;
  return atk;
}

Tensor mean_ce(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y) {
  return mean(ce_loss(forward(params, spec, x), y));
}

// Squared L2 distance between the two softmax outputs, per row.
Tensor softmax_gap(const Tensor& za, const Tensor& zc) {
  const Tensor d = sub(softmax(za), softmax(zc));
  return row_sum(mul(d, d));
}

// Constant (rows, cols) tensor repeating one value per row.
Tensor row_constant(const Vector& per_row, Index cols) {
  Vector v(per_row.size() * cols);
  for (Index j = 0; j < per_row.size(); ++j) v.segment(j * cols, cols).setConstant(per_row[j]);
  return Tensor({per_row.size(), cols}, std::move(v));
}

void require_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError(what + " is not finite");
}

}  // namespace

Tensor method_delta(Method method, const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                    std::span<const int> y, const TrainConfig& cfg, const RngStream& rng) {
  switch (method) {
    case Method::erm: return Tensor(x.shape());
    case Method::corruption: {
      const Index rows = x.dim(0);
      const Index row_size = rows == 0 ? 0 : x.size() / rows;
      Shape one = x.shape();
      one.erase(one.begin());
      Vector d(x.size());
      for (Index i = 0; i < rows; ++i) {
        RngStream r = rng.child("noise", static_cast<std::uint64_t>(i));
        d.segment(i * row_size, row_size) = sample_delta(cfg.perturbation, one, r).values();
      }
      return Tensor(x.shape(), std::move(d));
    }
    case Method::pgd:
    case Method::trades:
    case Method::mart:
    case Method::alp:
    case Method::clp:
    case Method::kl_pgd: return pgd_attack(params, spec, x, y, training_attack(method, cfg), rng.child("ae", 0));
    default: throw ValueError("method " + std::string(to_string(method)) + " has no single training perturbation");
  }
}

Tensor objective_with_delta(Method method, const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                            std::span<const int> y, const Tensor& delta, const TrainConfig& cfg) {
  const Bounds bounds = method == Method::corruption ? cfg.perturbation.bounds : cfg.attack.bounds;
  const double lambda = penalty(cfg);
  switch (method) {
    case Method::erm: return mean_ce(params, spec, x, y);
    case Method::pgd:
    case Method::kl_pgd:
    case Method::corruption: return mean_ce(params, spec, apply_and_clip(x, delta, bounds), y);
    case Method::trades: {
      const Tensor zc = forward(params, spec, x);
      const Tensor za = forward(params, spec, apply_and_clip(x, delta, bounds));
      return mean(add(ce_loss(zc, y), scale(kl_loss(zc, za), lambda)));
    }
    case Method::mart: {
      const Tensor zc = forward(params, spec, x);
      const Tensor za = forward(params, spec, apply_and_clip(x, delta, bounds));
      const Tensor weight = add_scalar(scale(gather(softmax(zc), y), -1.0), 1.0);
      return mean(add(ce_loss(za, y), scale(mul(weight, kl_loss(zc, za)), lambda)));
    }
    case Method::alp: {
      const Tensor zc = forward(params, spec, x);
      const Tensor za = forward(params, spec, apply_and_clip(x, delta, bounds));
      return mean(add(ce_loss(za, y), scale(softmax_gap(za, zc), lambda)));
    }
    case Method::clp: {
      const Tensor zc = forward(params, spec, x);
      const Tensor za = forward(params, spec, apply_and_clip(x, delta, bounds));
      return mean(add(ce_loss(zc, y), scale(softmax_gap(za, zc), lambda)));
    }
    default: throw ValueError("method " + std::string(to_string(method)) + " has a dedicated training step");
  }
}

Tensor training_objective(Method method, const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                          std::span<const int> y, const TrainConfig& cfg, const RngStream& rng) {
  const Tensor delta = method_delta(method, params, spec, x, y, cfg, rng);
  return objective_with_delta(method, params, spec, x, y, delta, cfg);
}

Tensor perturbed_losses(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                        const PerturbationSpec& pert, int samples, const RngStream& rng) {
  const Index rows = x.dim(0);
  const Index row_size = rows == 0 ? 0 : x.size() / rows;
  Shape one = x.shape();
  one.erase(one.begin());
  Shape stacked = x.shape();
  stacked[0] = rows * samples;
  Vector xs(rows * samples * row_size);
  std::vector<int> ys(static_cast<std::size_t>(rows * samples));
  for (Index j = 0; j < rows; ++j) {
    RngStream r = rng.child("draws", static_cast<std::uint64_t>(j));
    for (Index k = 0; k < samples; ++k) {
      const Index at = j * samples + k;
      xs.segment(at * row_size, row_size) = x.values().segment(j * row_size, row_size) + sample_delta(pert, one, r).values();
      ys[static_cast<std::size_t>(at)] = y[static_cast<std::size_t>(j)];
    }
  }
  xs = xs.cwiseMax(pert.bounds.lo).cwiseMin(pert.bounds.hi);
  const Tensor losses = ce_loss(forward(params, spec, Tensor(stacked, std::move(xs))), ys);
  return reshape(losses, {rows, static_cast<Index>(samples)});
}

CvarState cvar_init(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y) {
  return {ce_loss(forward(params.detached(), spec, x.detached()), y).values()};
}

CvarStep cvar_batch_step(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                         const TrainConfig& cfg, CvarState& state, const RngStream& rng) {
  if (!(cfg.rho > 0.0 && cfg.rho <= 1.0)) throw ValueError("cvar: rho must lie in (0, 1]");
  const Index rows = x.dim(0);
  const int m = cfg.samples;
  if (state.alpha.size() != rows) throw ShapeError("cvar: state holds " + std::to_string(state.alpha.size()) +
                                                   " thresholds for " + std::to_string(rows) + " rows");
  const ModelParams frozen = params.detached();
  CvarStep out{{}, 0.0, 0.0};
  for (int t = 0; t < cfg.alpha_steps; ++t) {
    const Tensor l = perturbed_losses(frozen, spec, x, y, cfg.perturbation, m, rng.child("alpha", t));
    const auto lm = l.matrix();
    for (Index j = 0; j < rows; ++j) {
      const auto above = (lm.row(j).array() >= state.alpha[j]).count();
      state.alpha[j] -= cfg.alpha_step_size * (1.0 - static_cast<double>(above) / (cfg.rho * m));
    }
    out.threshold_loss = lm.mean();
  }
  if (!state.alpha.allFinite()) throw NumericError("cvar: threshold diverged");

  GradTape tape;
  TapeScope scope(tape);
  const ModelParams watched = params.watched(tape);
  const Tensor l = perturbed_losses(watched, spec, x, y, cfg.perturbation, m, rng.child("theta"));
  const Tensor hinge = relu(sub(l, row_constant(state.alpha, m)));
  const Tensor obj = scale(sum(hinge), 1.0 / (cfg.rho * m * static_cast<double>(rows)));
  out.objective = state.alpha.mean() + obj.item();
  if (cfg.alpha_steps == 0) out.threshold_loss = l.values().mean();
  std::vector<Tensor> wrt;
  for (const auto& t : watched.tensors) wrt.push_back(t.value);
  out.grads = tape.backward(obj, wrt);
  return out;
}

Tensor evar_training_objective(const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                               std::span<const int> y, const TrainConfig& cfg, const RngStream& rng) {
  const Index rows = x.dim(0);
  const int m = cfg.samples;
  const Tensor l = perturbed_losses(params, spec, x, y, cfg.perturbation, m, rng.child("evar"));
  const auto lm = l.matrix();
  Vector a(rows), shift(rows), inv_a(rows), offset(rows);
  for (Index j = 0; j < rows; ++j) {
    const Vector row = lm.row(j).transpose();
    a[j] = evar_minimize(std::span<const double>(row.data(), static_cast<std::size_t>(m)), cfg.rho).a;
    shift[j] = row.maxCoeff();
    inv_a[j] = 1.0 / a[j];
    offset[j] = shift[j] - std::log(cfg.rho) / a[j];
  }
  // (1/a) (log mean exp(a (l - s)) + a s - log rho), a held fixed.
  const Tensor z = mul(sub(l, row_constant(shift, m)), row_constant(a, m));
  const Tensor log_mean = add_scalar(log(row_sum(exp(z))), -std::log(static_cast<double>(m)));
  const Tensor bound = add(mul(log_mean, Tensor({rows}, inv_a)), Tensor({rows}, offset));
  return mean(bound);
}

AtprCandidates atpr_candidates(const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                               std::span<const int> y, const TrainConfig& cfg, const RngStream& rng) {
  TrainConfig c = cfg;
  c.complete_defaults();
  RngStream hyper = rng.child("atpr-hyper");
  AtprCandidates out;
  for (int i = 0; i < c.candidates; ++i) {
    AttackSpec atk = c.attack;
    atk.loss = AttackLoss::ce;
    atk.random_start = true;
    atk.step_size = hyper.uniform(*c.candidate_step_min, *c.candidate_step_max);
    atk.steps = static_cast<int>(hyper.uniform_int(c.candidate_steps_min, c.candidate_steps_max));
    const Tensor delta = pgd_attack(params, spec, x, y, atk, rng.child("ae", static_cast<std::uint64_t>(i)));
    out.inputs.push_back(apply_and_clip(x.detached(), delta, atk.bounds));
    out.step_sizes.push_back(atk.step_size);
    out.steps.push_back(atk.steps);
  }
  return out;
}

Vector boundary_walk_distance(const ModelParams& params, const ModelSpec& spec, const Tensor& candidate,
                              std::span<const int> y, int cap, double step) {
  const ModelParams frozen = params.detached();
  const Index rows = candidate.dim(0);
  const Index row_size = rows == 0 ? 0 : candidate.size() / rows;
  Tensor cur = candidate.detached();
  std::vector<bool> active(static_cast<std::size_t>(rows), true);
  for (int c = 0; c < cap; ++c) {
    GradTape tape;
    TapeScope scope(tape);
    const Tensor xw = tape.watch(cur);
    const Tensor logits = forward(frozen, spec, xw);
    const auto pred = argmax_rows(logits);
    bool any = false;
    for (Index i = 0; i < rows; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (pred[ui] == y[ui]) active[ui] = false;
      any = any || active[ui];
    }
    if (!any) break;
    const Tensor grad = tape.gradient(sum(ce_loss(logits, y)), xw);
    Vector& v = cur.mutable_values();
    for (Index i = 0; i < rows; ++i) {
      if (active[static_cast<std::size_t>(i)]) {
        v.segment(i * row_size, row_size) -= step * grad.values().segment(i * row_size, row_size);
      }
    }
  }
  Vector d(rows);
  for (Index i = 0; i < rows; ++i) {
    d[i] = (cur.values().segment(i * row_size, row_size) - candidate.values().segment(i * row_size, row_size)).norm();
  }
  return d;
}

AtprSelection atpr_select(const ModelParams& params, const ModelSpec& spec, const AtprCandidates& candidates,
                          std::span<const int> y, const TrainConfig& cfg) {
  const auto n = static_cast<Index>(candidates.inputs.size());
  if (n < 1) throw ValueError("atpr_select: no candidates");
  const Index rows = candidates.inputs[0].dim(0);
  const Index row_size = rows == 0 ? 0 : candidates.inputs[0].size() / rows;
  AtprSelection out{candidates.inputs[0], std::vector<int>(static_cast<std::size_t>(rows), 0), RowMatrix(n, rows)};
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double step = cfg.walk_step.value_or(candidates.step_sizes.at(ui));
    out.distances.row(i) =
        boundary_walk_distance(params, spec, candidates.inputs[ui], y, cfg.walk_cap, step).transpose();
  }
  Vector& v = out.inputs.mutable_values();
  for (Index r = 0; r < rows; ++r) {
    Index best = 0;
    for (Index i = 1; i < n; ++i) {
      if (out.distances(i, r) > out.distances(best, r)) best = i;
    }
    out.chosen[static_cast<std::size_t>(r)] = static_cast<int>(best);
    if (best != 0) {
      v.segment(r * row_size, row_size) =
          candidates.inputs[static_cast<std::size_t>(best)].values().segment(r * row_size, row_size);
    }
  }
  return out;
}

Tensor atpr_select_ae(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                      const TrainConfig& cfg, const RngStream& rng) {
  return atpr_select(params, spec, atpr_candidates(params, spec, x, y, cfg, rng), y, cfg).inputs;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
  TrainConfig cfg = config;
  cfg.complete_defaults();
  cfg.validate();
  if (data.size() == 0) throw ValueError("train: empty dataset");
  data.validate();
  if (data.input_shape() != cfg.model.input_shape) {
    throw ShapeError("train: data rows " + shape_string(data.input_shape()) + " do not match model input " +
                     shape_string(cfg.model.input_shape));
  }
  const ModelSpec& spec = cfg.model;
  RngStream init_rng(cfg.seed, "init");
  TrainResult result{init_params(spec, init_rng), {}, 0.0};
  ModelParams& params = result.params;
  OptimState opt = OptimState::for_params(params, cfg.momentum, cfg.weight_decay,
                                          LrSchedule::scaled(cfg.lr, cfg.epochs));

  const Index n = data.size();
  const Dataset probe = data.head(std::min(n, cfg.log_accuracy_rows));
  std::vector<Index> order(static_cast<std::size_t>(n));
  long step = 0;
  double total_seconds = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), Index{0});
    RngStream shuffle(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (Index i = n - 1; i > 0; --i) {
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(shuffle.uniform_int(0, i))]);
    }
    double loss_sum = 0.0;
    double threshold_sum = 0.0;
    for (Index begin = 0; begin < n; begin += cfg.batch_size, ++step) {
      const Index count = std::min<Index>(cfg.batch_size, n - begin);
      const std::span<const Index> rows(order.data() + begin, static_cast<std::size_t>(count));
      const Tensor xb = gather_rows(data.inputs, rows);
      std::vector<int> yb(static_cast<std::size_t>(count));
      for (Index i = 0; i < count; ++i) {
        yb[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
      }
      const RngStream step_rng(cfg.seed, "step", static_cast<std::uint64_t>(step));

      std::vector<Tensor> grads;
      double loss = 0.0;
      if (cfg.method == Method::cvar) {
        CvarState state = cvar_init(params, spec, xb, yb);
        CvarStep s = cvar_batch_step(params, spec, xb, yb, cfg, state, step_rng);
        grads = std::move(s.grads);
        loss = s.objective;
        threshold_sum += s.threshold_loss * static_cast<double>(count);
      } else {
        GradTape tape;
        TapeScope scope(tape);
        const ModelParams watched = params.watched(tape);
        Tensor objective;
        if (cfg.method == Method::evar) {
          objective = evar_training_objective(watched, spec, xb, yb, cfg, step_rng);
        } else if (cfg.method == Method::at_pr) {
          objective = mean_ce(watched, spec, atpr_select_ae(params, spec, xb, yb, cfg, step_rng), yb);
        } else {
          objective = training_objective(cfg.method, watched, spec, xb, yb, cfg, step_rng);
        }
        loss = objective.item();
        std::vector<Tensor> wrt;
        for (const auto& t : watched.tensors) wrt.push_back(t.value);
        if (std::isfinite(loss)) grads = tape.backward(objective, wrt);
      }
      if (!std::isfinite(loss)) {
        throw NumericError("training loss became " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step));
      }
      for (std::size_t i = 0; i < grads.size(); ++i) require_finite(grads[i], "gradient of " + params.tensors[i].name);
      sgd_step(params, grads, opt, epoch);
      loss_sum += loss * static_cast<double>(count);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total_seconds += seconds;

    const auto pred = predict(params, spec, probe.inputs);
    Index correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == probe.labels[i];
    EpochLog entry{epoch, loss_sum / static_cast<double>(n),
                   static_cast<double>(correct) / static_cast<double>(probe.size()), seconds,
                   opt.schedule.rate(epoch), std::nullopt};
    if (cfg.method == Method::cvar) entry.threshold_loss = threshold_sum / static_cast<double>(n);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.seconds_per_epoch = total_seconds / cfg.epochs;
  return result;
}

}  // namespace prb
