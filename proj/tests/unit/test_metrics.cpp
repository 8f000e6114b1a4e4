#include <doctest.h>

#include <cmath>
#include <vector>

#include "prbench/error.hpp"
#include "prbench/metrics.hpp"

using namespace prb;

namespace {

struct Net {
  ModelSpec spec;
  ModelParams params;
};

// Class 1 exactly when x > 0.
Net threshold_model() {
  Net n{ModelSpec::mlp(1, {}, 2), {}};
  n.params = zero_params(n.spec);
  n.params[0] = Tensor({1, 2}, {0.0, 1.0});
  return n;
}

// Class 1 exactly when 0 < x < 0.5: z1 = relu(x) - 2 relu(x - 0.25) + relu(x - 0.5).
Net band_model() {
  Net n{ModelSpec::mlp(1, {3}, 2), {}};
  n.params = zero_params(n.spec);
  n.params[0] = Tensor({1, 3}, {1.0, 1.0, 1.0});
  n.params[1] = Tensor({3}, {0.0, -0.25, -0.5});
  n.params[2] = Tensor({3, 2}, {0.0, 1.0, 0.0, -2.0, 0.0, 1.0});
  return n;
}

Dataset line_data(std::vector<double> xs, std::vector<int> ys, Bounds b) {
  Dataset d;
  d.name = "line";
  d.inputs = Tensor({static_cast<Index>(xs.size()), 1}, Vector(Eigen::Map<Vector>(xs.data(), xs.size())));
  d.labels = std::move(ys);
  d.classes = 2;
  d.bounds = b;
  return d;
}

PerturbationSpec uniform(double gamma, Bounds b) {
  PerturbationSpec p;
  p.gamma = gamma;
  p.bounds = b;
  return p;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

constexpr Bounds kWide{-10.0, 10.0};

}  // namespace

TEST_CASE("Clopper-Pearson interval matches closed forms and tabulated values") {
  const PrEstimate zero = clopper_pearson(0, 10);
  CHECK(zero.lower == 0.0);
  CHECK(zero.upper == doctest::Approx(1.0 - std::pow(0.025, 0.1)).epsilon(1e-10));
  const PrEstimate all = clopper_pearson(10, 10);
  CHECK(all.upper == 1.0);
  CHECK(all.lower == doctest::Approx(std::pow(0.025, 0.1)).epsilon(1e-10));
  const PrEstimate half = clopper_pearson(5, 10);
  CHECK(half.p_hat == 0.5);
  CHECK(half.lower == doctest::Approx(0.187086).epsilon(1e-5));
  CHECK(half.upper == doctest::Approx(0.812914).epsilon(1e-5));
  const PrEstimate one = clopper_pearson(1, 1, 0.9);
  CHECK(one.lower == doctest::Approx(0.05).epsilon(1e-10));
  CHECK_THROWS_AS(clopper_pearson(3, 2), ValueError);
  CHECK_THROWS_AS(clopper_pearson(1, 0), ValueError);
  CHECK_THROWS_AS(clopper_pearson(1, 2, 1.0), ValueError);
}

TEST_CASE("PR of a threshold classifier is the surviving share of the ball") {
  const Net n = threshold_model();
  RngStream rng(1, "pr");
  const PrEstimate e = estimate_pr(n.params, n.spec, Tensor({1}, {0.5}), 1, uniform(1.0, kWide), 40000, rng);
  CHECK(std::abs(e.p_hat - 0.75) <= 4.0 * std::sqrt(0.75 * 0.25 / 40000.0));
  CHECK(e.lower <= 0.75);
  CHECK(e.upper >= 0.75);
  CHECK(e.n == 40000);
}

TEST_CASE("PR of a band classifier is the band width over the ball width") {
  const Net n = band_model();
  RngStream rng(2, "pr");
  const PrEstimate e = estimate_pr(n.params, n.spec, Tensor({1}, {0.25}), 1, uniform(1.0, kWide), 40000, rng);
  CHECK(std::abs(e.p_hat - 0.25) <= 4.0 * std::sqrt(0.75 * 0.25 / 40000.0));
}

TEST_CASE("PR is one when the ball stays on the correct side") {
  const Net n = threshold_model();
  RngStream rng(3, "pr");
  CHECK(estimate_pr(n.params, n.spec, Tensor({1}, {0.5}), 1, uniform(0.4, kWide), 1000, rng).p_hat == 1.0);
  CHECK(estimate_pr(n.params, n.spec, Tensor({1}, {0.5}), 1, uniform(0.0, kWide), 10, rng).p_hat == 1.0);
}

TEST_CASE("dataset PR averages over clean-correct rows only") {
  const Net n = threshold_model();
  // Rows 0 and 1 are correct with PR 1 and 0.75; row 2 is misclassified.
  const Dataset d = line_data({2.0, 0.5, -1.0}, {1, 1, 1}, kWide);
  const RngStream rng(4, "pr");
  const PrProfile prof = pr_profile(n.params, n.spec, d, uniform(1.0, kWide), 20000, rng);
  CHECK(prof.total == 3);
  REQUIRE(prof.correct_rows == std::vector<Index>{0, 1});
  CHECK(prof.estimates[0].p_hat == 1.0);
  CHECK(*pr_rate(prof) == doctest::Approx(0.875).epsilon(0.01));
  CHECK(*pr_dataset(n.params, n.spec, d, uniform(1.0, kWide), 20000, rng) == *pr_rate(prof));

  const Dataset wrong = line_data({-1.0, -2.0}, {1, 1}, kWide);
  CHECK(!pr_dataset(n.params, n.spec, wrong, uniform(1.0, kWide), 100, rng).has_value());
  CHECK(!prob_acc(n.params, n.spec, wrong, 0.1, uniform(1.0, kWide), 100, rng).has_value());
}

TEST_CASE("ProbAcc counts rows whose PR clears one minus rho") {
  PrProfile prof;
  prof.total = 4;
  prof.correct_rows = {0, 1, 2};
  for (double p : {1.0, 0.75, 0.5}) prof.estimates.push_back({p, 0, 0, 0.0, 1.0});
  CHECK(*prob_acc_rate(prof, 0.3) == doctest::Approx(2.0 / 3.0));
  CHECK(*prob_acc_rate(prof, 0.2) == doctest::Approx(1.0 / 3.0));
  CHECK(*prob_acc_rate(prof, 0.5) == 1.0);
  CHECK(*prob_acc_rate(prof, 0.01) == doctest::Approx(1.0 / 3.0));
  double last = 0.0;
  for (double rho = 0.05; rho < 1.0; rho += 0.05) {
    const double v = *prob_acc_rate(prof, rho);
    CHECK(v >= last);
    last = v;
  }
  CHECK_THROWS_AS(prob_acc_rate(prof, 1.5), ValueError);
}

TEST_CASE("adversarial accuracy brackets") {
  const Net n = threshold_model();
  const Dataset d = line_data({0.5, 0.05, -0.3, 0.9}, {1, 1, 0, 0}, kWide);
  CHECK(clean_accuracy(n.params, n.spec, d) == 0.75);
  AttackSpec atk;
  atk.gamma = 0.0;
  atk.step_size = 0.1;
  atk.steps = 5;
  atk.bounds = kWide;
  const RngStream rng(5, "atk");
  CHECK(adversarial_accuracy(n.params, n.spec, d, atk, rng) == 0.75);
  atk.gamma = 0.1;
  atk.step_size = 0.05;
  // Row 1 sits 0.05 from the boundary and falls; rows 0 and 2 survive.
  CHECK(adversarial_accuracy(n.params, n.spec, d, atk, rng) == 0.5);
  CHECK(proxy_accuracy(n.params, n.spec, d, atk, rng) == 0.5);

  const Dataset flipped = line_data({0.5, 0.9}, {0, 0}, kWide);
  CHECK(adversarial_accuracy(n.params, n.spec, flipped, atk, rng) == 0.0);
}

TEST_CASE("generalization error is train minus test") {
  CHECK(generalization_error(0.9, 0.8) == doctest::Approx(0.1));
  CHECK(generalization_error(0.8, 0.9) == -generalization_error(0.9, 0.8));
  CHECK(generalization_error(0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(generalization_error(1.2, 0.5), ValueError);
  CHECK_THROWS_AS(generalization_error(0.5, -0.1), ValueError);
}

TEST_CASE("output sensitivity of a constant model is zero") {
  Net n{ModelSpec::mlp(2, {4}, 3), {}};
  n.params = zero_params(n.spec);
  n.params[3] = Tensor({3}, {0.3, -1.0, 2.0});
  RngStream rng(6, "nu");
  CHECK(estimate_nu(n.params, n.spec, Tensor({2}, {0.4, 0.6}), uniform(0.3, {}), 200, rng) == 0.0);
}

TEST_CASE("output sensitivity stays below sqrt 2") {
  Net n{ModelSpec::mlp(2, {}, 2), {}};
  n.params = zero_params(n.spec);
  n.params[0] = Tensor({2, 2}, {0.0, 500.0, 0.0, 0.0});
  RngStream rng(7, "nu");
  const double nu = estimate_nu(n.params, n.spec, Tensor({2}, {-0.01, 0.0}), uniform(0.5, kWide), 2000, rng);
  CHECK(nu <= std::sqrt(2.0));
  CHECK(nu > 1.3);
}

TEST_CASE("output sensitivity of 1-D logistic regression matches the endpoint formula") {
  const double w = 3.0, x = 0.2, gamma = 0.3;
  Net n{ModelSpec::mlp(1, {}, 2), {}};
  n.params = zero_params(n.spec);
  n.params[0] = Tensor({1, 2}, {0.0, w});
  const double base = sigmoid(w * x);
  const double expected = std::sqrt(2.0) * std::max(std::abs(sigmoid(w * (x + gamma)) - base),
                                                    std::abs(sigmoid(w * (x - gamma)) - base));
  RngStream rng(8, "nu");
  const double nu = estimate_nu(n.params, n.spec, Tensor({1}, {x}), uniform(gamma, kWide), 20000, rng);
  CHECK(nu <= expected + 1e-12);
  CHECK(nu == doctest::Approx(expected).epsilon(1e-3));
}
