#include "prbench/attacks.hpp"

#include <cmath>

#include "prbench/error.hpp"
#include "prbench/ops.hpp"

namespace prb {

std::string_view to_string(AttackLoss loss) {
  switch (loss) {
    case AttackLoss::ce: return "ce";
    case AttackLoss::kl: return "kl";
    case AttackLoss::cw_margin: return "cw-margin";
  }
  return "ce";
}

void AttackSpec::validate() const {
  if (steps < 1) throw ValueError("attack: steps must be >= 1");
  if (!(step_size > 0.0)) throw ValueError("attack: step size must be > 0");
  if (!(gamma >= 0.0)) throw ValueError("attack: gamma must be >= 0");
  if (restarts < 1) throw ValueError("attack: restarts must be >= 1");
  if (!(bounds.lo < bounds.hi)) throw ValueError("attack: bounds need lo < hi");
}

std::string AttackSpec::name() const {
  switch (loss) {
    case AttackLoss::ce: return "pgd" + std::to_string(steps);
    case AttackLoss::kl: return "pgd-kl" + std::to_string(steps);
    case AttackLoss::cw_margin: return "pgd-cw" + std::to_string(steps);
  }
  return "pgd";
}

Tensor attack_objective(AttackLoss kind, const Tensor& logits, const Tensor& clean_logits, std::span<const int> y) {
  switch (kind) {
    case AttackLoss::ce: return ce_loss(logits, y);
    case AttackLoss::kl: return kl_loss(clean_logits, logits);
    case AttackLoss::cw_margin: return margin_loss(logits, y);
  }
  throw ValueError("attack: unknown loss");
}

Tensor cw_margin_loss(const Tensor& logits, std::span<const int> y) { return margin_loss(logits, y); }

namespace {

AttackResult run_pgd(const ModelParams& live_params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                     const AttackSpec& atk, const RngStream& rng, Index row_offset, bool want_loss);

Tensor random_start(const Tensor& x, const AttackSpec& atk, const RngStream& restart_rng, Index row_offset) {
  const Index rows = x.dim(0);
  const Index row_size = rows == 0 ? 0 : x.size() / rows;
  Vector d(x.size());
  for (Index i = 0; i < rows; ++i) {
    RngStream r = restart_rng.child("row", static_cast<std::uint64_t>(row_offset + i));
    for (Index k = 0; k < row_size; ++k) d[i * row_size + k] = r.uniform(-atk.gamma, atk.gamma);
  }
  return Tensor(x.shape(), std::move(d));
}

AttackResult run_pgd(const ModelParams& live_params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                     const AttackSpec& atk, const RngStream& rng, Index row_offset, bool want_loss) {
  atk.validate();
  const ModelParams params = live_params.detached();
  const Index rows = x.dim(0);
  const Index row_size = rows == 0 ? 0 : x.size() / rows;
  const Tensor xc = x.detached();
  const Tensor clean_logits = atk.loss == AttackLoss::kl ? forward(params, spec, xc).detached() : Tensor();

  struct Scored {
    Vector loss;
    std::vector<int> pred;
  };
  auto score = [&](const Tensor& delta) {
    const Tensor logits = forward(params, spec, apply_and_clip(xc, delta, atk.bounds));
    return Scored{Vector(attack_objective(atk.loss, logits, clean_logits, y).values()), argmax_rows(logits)};
  };

  Tensor zero(x.shape());
  if (atk.gamma == 0.0) return {zero, want_loss ? score(zero).loss : Vector()};

  const bool single = atk.restarts == 1 && !atk.zero_candidate;
  Tensor best;
  Scored best_score;
  auto offer = [&](const Tensor& delta, Scored cand) {
    if (!best_score.loss.size()) {
      best = delta;
      best_score = std::move(cand);
      return;
    }
    Vector& bv = best.mutable_values();
    for (Index i = 0; i < rows; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const bool cand_flip = cand.pred[ui] != y[ui];
      const bool best_flip = best_score.pred[ui] != y[ui];
      const bool take = cand_flip != best_flip ? cand_flip : cand.loss[i] > best_score.loss[i];
      if (take) {
        best_score.loss[i] = cand.loss[i];
        best_score.pred[ui] = cand.pred[ui];
        bv.segment(i * row_size, row_size) = delta.values().segment(i * row_size, row_size);
      }
    }
  };

  if (atk.zero_candidate) offer(zero, score(zero));
  for (int r = 0; r < atk.restarts; ++r) {
    const RngStream restart_rng = rng.child("restart", static_cast<std::uint64_t>(r));
    Tensor delta = atk.random_start ? random_start(xc, atk, restart_rng, row_offset) : Tensor(x.shape());
    delta = feasible_delta(xc, delta, atk.gamma, atk.bounds);
    for (int t = 0; t < atk.steps; ++t) {
      GradTape tape;
      TapeScope scope(tape);
      const Tensor xa = tape.watch(apply_and_clip(xc, delta, atk.bounds));
      const Tensor loss = sum(attack_objective(atk.loss, forward(params, spec, xa), clean_logits, y));
      const Tensor grad = tape.gradient(loss, xa);
      Vector stepped = delta.values() + atk.step_size * sign(grad).values();
      delta = feasible_delta(xc, project_linf(Tensor(x.shape(), std::move(stepped)), atk.gamma), atk.gamma,
                             atk.bounds);
    }
    if (single && !want_loss) return {delta, Vector()};
    offer(delta, score(delta));
  }
  return {best, best_score.loss};
}

}  // namespace

AttackResult pgd_attack_detailed(const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                                 std::span<const int> y, const AttackSpec& atk, const RngStream& rng,
                                 Index row_offset) {
  return run_pgd(params, spec, x, y, atk, rng, row_offset, true);
}

Tensor pgd_attack(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                  const AttackSpec& atk, const RngStream& rng, Index row_offset) {
  return run_pgd(params, spec, x, y, atk, rng, row_offset, false).delta;
}

ProxyResult auto_proxy(const ModelParams& live_params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                       const AttackSpec& base, const RngStream& rng, Index row_offset) {
  const ModelParams params = live_params.detached();
  AttackSpec ce = base;
  ce.loss = AttackLoss::ce;
  ce.steps = 20;
  ce.restarts = 2;
  ce.random_start = true;
  AttackSpec cw = ce;
  cw.loss = AttackLoss::cw_margin;

  const Tensor d_ce = pgd_attack(params, spec, x, y, ce, rng.child("proxy-ce"), row_offset);
  const Tensor d_cw = pgd_attack(params, spec, x, y, cw, rng.child("proxy-cw"), row_offset);

  const Tensor logits_ce = forward(params, spec, apply_and_clip(x, d_ce, base.bounds));
  const Tensor logits_cw = forward(params, spec, apply_and_clip(x, d_cw, base.bounds));
  const auto pred_ce = argmax_rows(logits_ce);
  const auto pred_cw = argmax_rows(logits_cw);
  const Tensor loss_ce = ce_loss(logits_ce, y);
  const Tensor loss_cw = ce_loss(logits_cw, y);

  const Index rows = x.dim(0);
  const Index row_size = rows == 0 ? 0 : x.size() / rows;
  ProxyResult out{d_ce, std::vector<bool>(static_cast<std::size_t>(rows)),
                  std::vector<AttackLoss>(static_cast<std::size_t>(rows), AttackLoss::ce)};
  Vector& dv = out.delta.mutable_values();
  for (Index i = 0; i < rows; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const bool flip_ce = pred_ce[ui] != y[ui];
    const bool flip_cw = pred_cw[ui] != y[ui];
    out.broken[ui] = flip_ce || flip_cw;
    bool take_cw = false;
    if (flip_cw && !flip_ce) {
      take_cw = true;
    } else if (flip_cw == flip_ce) {
      take_cw = loss_cw[i] > loss_ce[i];
    }
    if (take_cw) {
      out.source[ui] = AttackLoss::cw_margin;
      dv.segment(i * row_size, row_size) = d_cw.values().segment(i * row_size, row_size);
    }
  }
  return out;
}

}  // namespace prb
