#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "prbench/attacks.hpp"
#include "prbench/error.hpp"
#include "prbench/ops.hpp"

using namespace prb;

namespace {

struct Linear {
  ModelSpec spec;
  ModelParams params;
};

Linear random_linear(Index features, Index classes, RngStream& rng) {
  Linear m{ModelSpec::mlp(features, {}, classes), {}};
  m.params = zero_params(m.spec);
  Vector w(features * classes), b(classes);
  for (Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
  for (Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.2, 0.2);
  m.params[0] = Tensor({features, classes}, w);
  m.params[1] = Tensor({classes}, b);
  return m;
}

Tensor random_points(Index rows, Index features, RngStream& rng, double lo = 0.0, double hi = 1.0) {
  Vector v(rows * features);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
  return Tensor({rows, features}, v);
}

double ce_at(const Linear& m, const Tensor& x, std::span<const int> y) {
  return sum(ce_loss(forward(m.params, m.spec, x), y)).item();
}

}  // namespace

TEST_CASE("zero radius leaves inputs untouched") {
  RngStream rng(1, "attack");
  const Linear m = random_linear(4, 3, rng);
  const Tensor x = random_points(6, 4, rng);
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  AttackSpec atk;
  atk.gamma = 0.0;
  atk.step_size = 0.1;
  const Tensor d = pgd_attack(m.params, m.spec, x, y, atk, RngStream(1, "a"));
  CHECK(d.values().isZero());
  CHECK(predict(m.params, m.spec, apply_and_clip(x, d, atk.bounds)) == predict(m.params, m.spec, x));
}

TEST_CASE("one full step on a binary linear model is the signed weight difference") {
  RngStream rng(2, "fgsm");
  for (int trial = 0; trial < 100; ++trial) {
    const Index f = rng.uniform_int(1, 6);
    const Linear m = random_linear(f, 2, rng);
    const Tensor x = random_points(1, f, rng, -1.0, 1.0);
    const std::vector<int> y{static_cast<int>(rng.uniform_int(0, 1))};
    AttackSpec atk;
    atk.steps = 1;
    atk.gamma = 0.25;
    atk.step_size = 0.3;
    atk.random_start = false;
    atk.bounds = {-10.0, 10.0};
    const Tensor d = pgd_attack(m.params, m.spec, x, y, atk, RngStream(2, "a"));
    // The loss grows along w_other - w_y.
    const int other = 1 - y[0];
    for (Index k = 0; k < f; ++k) {
      const double dir = m.params[0].matrix()(k, other) - m.params[0].matrix()(k, y[0]);
      CHECK(d[k] == (dir > 0 ? atk.gamma : dir < 0 ? -atk.gamma : 0.0));
    }
    CHECK(ce_at(m, add(x, d), y) >= ce_at(m, x, y));
  }
}

TEST_CASE("more restarts never lower the final loss on binary models") {
  RngStream rng(3, "restarts");
  for (int trial = 0; trial < 50; ++trial) {
    const Linear m = random_linear(3, 2, rng);
    const Tensor x = random_points(8, 3, rng);
    std::vector<int> y(8);
    for (auto& v : y) v = static_cast<int>(rng.uniform_int(0, 1));
    AttackSpec one;
    one.gamma = 0.2;
    one.step_size = 0.05;
    one.steps = 5;
    AttackSpec five = one;
    five.restarts = 5;
    const RngStream seed(3, "seed", static_cast<std::uint64_t>(trial));
    const auto r1 = pgd_attack_detailed(m.params, m.spec, x, y, one, seed);
    const auto r5 = pgd_attack_detailed(m.params, m.spec, x, y, five, seed);
    for (Index i = 0; i < 8; ++i) CHECK(r5.loss[i] >= r1.loss[i]);
  }
}

TEST_CASE("attacked inputs respect the ball and the domain") {
  RngStream rng(4, "domain");
  const Linear m = random_linear(5, 4, rng);
  const Tensor x = random_points(20, 5, rng);
  std::vector<int> y(20);
  for (auto& v : y) v = static_cast<int>(rng.uniform_int(0, 3));
  for (AttackLoss loss : {AttackLoss::ce, AttackLoss::kl, AttackLoss::cw_margin}) {
    AttackSpec atk;
    atk.loss = loss;
    atk.gamma = 0.3;
    atk.step_size = 0.1;
    atk.steps = 7;
    atk.restarts = 2;
    const Tensor d = pgd_attack(m.params, m.spec, x, y, atk, RngStream(4, "a"));
    for (Index i = 0; i < d.size(); ++i) {
      CHECK(std::abs(d[i]) <= atk.gamma);
      CHECK(x[i] + d[i] >= 0.0);
      CHECK(x[i] + d[i] <= 1.0);
    }
  }
}

TEST_CASE("attack rows are independent of batch composition") {
  RngStream rng(5, "rows");
  const Linear m = random_linear(3, 3, rng);
  const Tensor x = random_points(10, 3, rng);
  std::vector<int> y(10);
  for (auto& v : y) v = static_cast<int>(rng.uniform_int(0, 2));
  AttackSpec atk;
  atk.gamma = 0.2;
  atk.step_size = 0.05;
  const RngStream seed(5, "a");
  const Tensor all = pgd_attack(m.params, m.spec, x, y, atk, seed);
  const Tensor tail = pgd_attack(m.params, m.spec, slice_rows(x, 6, 4), std::span(y).subspan(6), atk, seed, 6);
  CHECK(identical(tail, slice_rows(all, 6, 4)));
}

TEST_CASE("zero candidate keeps correct rows when nothing flips") {
  RngStream rng(6, "zero");
  const Linear m = random_linear(2, 2, rng);
  const Tensor x = random_points(30, 2, rng);
  const std::vector<int> y = predict(m.params, m.spec, x);
  AttackSpec atk;
  atk.gamma = 1e-9;
  atk.step_size = 1e-9;
  atk.zero_candidate = true;
  atk.restarts = 2;
  const auto res = pgd_attack_detailed(m.params, m.spec, x, y, atk, RngStream(6, "a"));
  CHECK(predict(m.params, m.spec, apply_and_clip(x, res.delta, atk.bounds)) == y);
}

TEST_CASE("cw margin examples") {
  const std::vector<int> y0{0};
  CHECK(cw_margin_loss(Tensor({1, 2}, {3.0, 5.0}), y0)[0] == 2.0);
  const std::vector<int> y1{1};
  CHECK(cw_margin_loss(Tensor({1, 3}, {0.0, 4.0, 1.5}), y1)[0] == -2.5);

  RngStream rng(7, "cw");
  for (int trial = 0; trial < 20; ++trial) {
    const Linear m = random_linear(4, 3, rng);
    const Tensor x = random_points(1, 4, rng);
    const std::vector<int> y{static_cast<int>(rng.uniform_int(0, 2))};
    const Tensor z = forward(m.params, m.spec, x);
    int best = -1;
    for (int j = 0; j < 3; ++j) {
      if (j != y[0] && (best < 0 || z[j] > z[best])) best = j;
    }
    const Vector g =
        prbtest::tape_gradient([&](const Tensor& t) { return sum(cw_margin_loss(forward(m.params, m.spec, t), y)); }, x);
    for (Index k = 0; k < 4; ++k) {
      const double expected = m.params[0].matrix()(k, best) - m.params[0].matrix()(k, y[0]);
      CHECK(g[k] == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("auto proxy selection rule") {
  RngStream rng(8, "proxy");
  AttackSpec base;
  base.gamma = 0.15;
  base.step_size = 0.03;
  AttackSpec ce = base;
  ce.steps = 20;
  ce.restarts = 2;
  AttackSpec cw = ce;
  cw.loss = AttackLoss::cw_margin;

  long proxy_broken = 0, ce_broken = 0, cw_only = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Linear m = random_linear(3, 4, rng);
    const Tensor x = random_points(10, 3, rng);
    std::vector<int> y = predict(m.params, m.spec, x);
    const RngStream seed(8, "seed", static_cast<std::uint64_t>(trial));
    const ProxyResult res = auto_proxy(m.params, m.spec, x, y, base, seed);
    const Tensor d_ce = pgd_attack(m.params, m.spec, x, y, ce, seed.child("proxy-ce"));
    const Tensor d_cw = pgd_attack(m.params, m.spec, x, y, cw, seed.child("proxy-cw"));
    const auto p_ce = predict(m.params, m.spec, apply_and_clip(x, d_ce, base.bounds));
    const auto p_cw = predict(m.params, m.spec, apply_and_clip(x, d_cw, base.bounds));
    const auto p_proxy = predict(m.params, m.spec, apply_and_clip(x, res.delta, base.bounds));
    for (Index i = 0; i < 10; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const bool f_ce = p_ce[u] != y[u], f_cw = p_cw[u] != y[u];
      CHECK(res.broken[u] == (f_ce || f_cw));
      CHECK((p_proxy[u] != y[u]) == res.broken[u]);
      if (f_cw && !f_ce) {
        ++cw_only;
        CHECK(res.source[u] == AttackLoss::cw_margin);
        CHECK(identical(slice_rows(res.delta, i, 1), slice_rows(d_cw, i, 1)));
      }
      if (!res.broken[u]) {
        // Unbroken rows keep whichever delta has the larger cross-entropy.
        const std::vector<int> yi{y[u]};
        const double l_ce = ce_at(m, apply_and_clip(slice_rows(x, i, 1), slice_rows(d_ce, i, 1), base.bounds), yi);
        const double l_cw = ce_at(m, apply_and_clip(slice_rows(x, i, 1), slice_rows(d_cw, i, 1), base.bounds), yi);
        CHECK(res.source[u] == (l_cw > l_ce ? AttackLoss::cw_margin : AttackLoss::ce));
      }
      proxy_broken += res.broken[u];
      ce_broken += f_ce;
    }
  }
  CHECK(proxy_broken >= ce_broken);
  CHECK(cw_only > 0);
}

TEST_CASE("attack spec validation and names") {
  AttackSpec atk;
  atk.steps = 20;
  CHECK(atk.name() == "pgd20");
  atk.loss = AttackLoss::kl;
  CHECK(atk.name() == "pgd-kl20");
  atk.gamma = -1.0;
  CHECK_THROWS_AS(atk.validate(), ValueError);
}
