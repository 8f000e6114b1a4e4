#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "prbench/error.hpp"
#include "prbench/ops.hpp"
#include "prbench/risk.hpp"
#include "prbench/trainers.hpp"

using namespace prb;

namespace {

// Mean of the worst rho-fraction, counting a fractional share of the
// boundary sample.
double tail_mean(std::vector<double> v, double rho) {
  std::sort(v.begin(), v.end(), std::greater<>());
  double mass = rho * static_cast<double>(v.size());
  double total = 0.0;
  const double denom = mass;
  for (double x : v) {
    const double w = std::min(1.0, mass);
    if (w <= 0.0) break;
    total += w * x;
    mass -= w;
  }
  return total / denom;
}

double grid_evar(const std::vector<double>& v, double rho) {
  double best = std::numeric_limits<double>::infinity();
  const int n = 240000;
  for (int i = 0; i <= n; ++i) {
    const double u = -6.0 + 12.0 * i / n;
    best = std::min(best, evar_bound(v, std::exp(u), rho));
  }
  return best;
}

std::vector<double> random_losses(RngStream& rng) {
  std::vector<double> v(static_cast<std::size_t>(rng.uniform_int(1, 60)));
  const int shape = static_cast<int>(rng.uniform_int(0, 2));
  for (auto& x : v) {
    const double u = rng.uniform01();
    x = shape == 0 ? 3.0 * u : shape == 1 ? -std::log1p(-u) : std::abs(rng.normal()) * 2.0;
  }
  return v;
}

}  // namespace

TEST_CASE("empirical cvar equals the sort-and-average oracle") {
  RngStream rng(1, "cvar");
  for (int trial = 0; trial < 300; ++trial) {
    const auto v = random_losses(rng);
    const double rho = trial % 3 == 0 ? 1.0 / static_cast<double>(v.size()) * rng.uniform_int(1, static_cast<std::int64_t>(v.size()))
                                      : rng.uniform(0.01, 1.0);
    CHECK(std::abs(empirical_cvar(v, rho) - tail_mean(v, rho)) <= 1e-12);
  }
}

TEST_CASE("cvar at rho one is the mean") {
  const std::vector<double> v{0.5, 2.0, 1.0, 4.5};
  CHECK(empirical_cvar(v, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cvar_objective(v, 0.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("threshold updates on fixed losses reach the tail mean") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  double alpha = 0.0;
  for (int t = 0; t < 400; ++t) alpha -= 0.05 * cvar_threshold_gradient(v, alpha, 0.5);
  CHECK(cvar_objective(v, alpha, 0.5) == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(empirical_cvar(v, 0.5) == 3.5);
}

TEST_CASE("evar examples") {
  for (double c : {-2.0, 0.0, 0.7, 5.0}) {
    const std::vector<double> v(7, c);
    CHECK(evar_objective(v, 1.0) == doctest::Approx(c).epsilon(1e-12));
  }
  const std::vector<double> two{0.0, 1.0};
  const double e = evar_objective(two, 1.0);
  CHECK(e >= 0.5);
  CHECK(e <= 1.0);
  CHECK(std::abs(e - grid_evar(two, 1.0)) <= 1e-6);
}

TEST_CASE("evar matches dense grid minimisation and orders the risks") {
  RngStream rng(2, "evar");
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = random_losses(rng);
    const double rho = rng.uniform(0.02, 1.0);
    const double evar = evar_objective(v, rho);
    if (trial < 25) CHECK(std::abs(evar - grid_evar(v, rho)) <= 1e-6);
    const double cvar = empirical_cvar(v, rho);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    CHECK(evar >= cvar - 1e-9);
    CHECK(cvar >= mean - 1e-9);
  }
}

TEST_CASE("evar stays finite for large losses") {
  const std::vector<double> v{800.0, 900.0, 1000.0};
  const auto r = evar_minimize(v, 0.1);
  CHECK(std::isfinite(r.value));
  CHECK(r.value >= 1000.0 - 1e-9);
}

TEST_CASE("risk functions reject bad input") {
  const std::vector<double> empty;
  const std::vector<double> v{1.0};
  const std::vector<double> nan{std::nan("")};
  CHECK_THROWS_AS(empirical_cvar(empty, 0.5), ValueError);
  CHECK_THROWS_AS(empirical_cvar(v, 0.0), ValueError);
  CHECK_THROWS_AS(evar_objective(v, 1.5), ValueError);
  CHECK_THROWS_AS(evar_objective(nan, 0.5), NumericError);
}

namespace {

struct Batch {
  TrainConfig cfg;
  ModelParams params;
  Tensor x;
  std::vector<int> y;
};

Batch small_batch() {
  Batch b;
  b.cfg.method = Method::cvar;
  b.cfg.model = ModelSpec::mlp(2, {4}, 3);
  b.cfg.perturbation.gamma = 0.1;
  b.cfg.samples = 6;
  RngStream rng(3, "init");
  b.params = init_params(b.cfg.model, rng);
  Vector xv(10);
  for (Index i = 0; i < 10; ++i) xv[i] = rng.uniform01();
  b.x = Tensor({5, 2}, xv);
  b.y = {0, 1, 2, 1, 0};
  return b;
}

}  // namespace

TEST_CASE("cvar step at rho one with zero thresholds is the mean loss") {
  Batch b = small_batch();
  b.cfg.rho = 1.0;
  b.cfg.alpha_steps = 0;
  CvarState state{Vector::Zero(5)};
  const RngStream rng(4, "step");
  const CvarStep step = cvar_batch_step(b.params, b.cfg.model, b.x, b.y, b.cfg, state, rng);
  const Tensor l = perturbed_losses(b.params, b.cfg.model, b.x, b.y, b.cfg.perturbation, 6, rng.child("theta"));
  CHECK(step.objective == doctest::Approx(l.values().mean()).epsilon(1e-13));

  GradTape tape;
  TapeScope scope(tape);
  const ModelParams w = b.params.watched(tape);
  const Tensor mean_loss =
      mean(perturbed_losses(w, b.cfg.model, b.x, b.y, b.cfg.perturbation, 6, rng.child("theta")));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vector g = tape.gradient(mean_loss, w[i]).values();
    CHECK((step.grads[i].values() - g).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("losses below every threshold give no parameter gradient") {
  Batch b = small_batch();
  b.cfg.alpha_steps = 0;
  CvarState state{Vector::Constant(5, 1e6)};
  const CvarStep step = cvar_batch_step(b.params, b.cfg.model, b.x, b.y, b.cfg, state, RngStream(5, "step"));
  for (const auto& g : step.grads) CHECK(g.values().isZero());
}

TEST_CASE("cvar init starts thresholds at the clean loss") {
  const Batch b = small_batch();
  const CvarState s = cvar_init(b.params, b.cfg.model, b.x, b.y);
  const Tensor clean = ce_loss(forward(b.params, b.cfg.model, b.x), b.y);
  CHECK(s.alpha == clean.values());
}

TEST_CASE("evar training objective equals the bound at the minimiser") {
  Batch b = small_batch();
  b.cfg.method = Method::evar;
  b.cfg.rho = 0.2;
  const RngStream rng(6, "evar-step");
  const double value = evar_training_objective(b.params, b.cfg.model, b.x, b.y, b.cfg, rng).item();
  const Tensor l = perturbed_losses(b.params, b.cfg.model, b.x, b.y, b.cfg.perturbation, 6, rng.child("evar"));
  double expected = 0.0;
  for (Index j = 0; j < 5; ++j) {
    const Vector row = l.matrix().row(j).transpose();
    expected += evar_objective(std::span<const double>(row.data(), 6), 0.2);
  }
  CHECK(value == doctest::Approx(expected / 5.0).epsilon(1e-12));
}
