#pragma once

#include <span>
#include <string>
#include <vector>

#include "prbench/model.hpp"
#include "prbench/perturbation.hpp"
#include "prbench/rng.hpp"

namespace prb {

enum class AttackLoss { ce, kl, cw_margin };

std::string_view to_string(AttackLoss loss);

/// L-infinity sign-gradient ascent on one of three inner losses.
struct AttackSpec {
  AttackLoss loss = AttackLoss::ce;
  int steps = 10;
  double step_size = 0.1;
  double gamma = 0.3;
  int restarts = 1;
  bool random_start = true;
  /// Also offers delta = 0 as a candidate, ahead of the restarts.
  bool zero_candidate = false;
  Bounds bounds;

  void validate() const;
  /// Display name: "pgd20", "pgd-kl10", "pgd-cw20".
  std::string name() const;
};

struct AttackResult {
  Tensor delta;
  /// Inner loss at x + delta, one entry per row.
  Vector loss;
};

/// Per-row attack loss on logits of the perturbed batch. `clean_logits` is
/// only read by the KL loss.
Tensor attack_objective(AttackLoss kind, const Tensor& logits, const Tensor& clean_logits, std::span<const int> y);

/// PGD: delta <- project(delta + step * sign(grad_x loss)), then x + delta is
/// kept inside the bounds. With several candidates each row keeps one that
/// misclassifies if any does, otherwise the one of highest final loss; ties
/// keep the earliest. Row `i` draws its random start from
/// rng.child("restart", r).child("row", row_offset + i).
AttackResult pgd_attack_detailed(const ModelParams& params, const ModelSpec& spec, const Tensor& x,
                                 std::span<const int> y, const AttackSpec& atk, const RngStream& rng,
                                 Index row_offset = 0);

Tensor pgd_attack(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                  const AttackSpec& atk, const RngStream& rng, Index row_offset = 0);

/// max_{j != y} z_j - z_y for each row.
Tensor cw_margin_loss(const Tensor& logits, std::span<const int> y);

struct ProxyResult {
  Tensor delta;
  /// Per row: some candidate changed the prediction away from y.
  std::vector<bool> broken;
  /// Per row: the attack whose delta was kept.
  std::vector<AttackLoss> source;
};

/// Stand-in for a full AutoAttack run: 20-step PGD on cross-entropy and on the
/// CW margin, two restarts each. A flipping delta is preferred; between two
/// flipping (or two non-flipping) deltas the one with larger cross-entropy at
/// x + delta wins, CE first on ties. Uses gamma, step_size and bounds of `base`.
ProxyResult auto_proxy(const ModelParams& params, const ModelSpec& spec, const Tensor& x, std::span<const int> y,
                       const AttackSpec& base, const RngStream& rng, Index row_offset = 0);

}  // namespace prb
