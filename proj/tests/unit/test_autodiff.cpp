#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "prbench/error.hpp"
#include "prbench/ops.hpp"
#include "prbench/tape.hpp"

using namespace prb;
using prbtest::op_gradient_error;

namespace {

Tensor random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Vector v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
  return Tensor(std::move(shape), v);
}

// Values at least `gap` away from every point in `kinks`.
Tensor away_from(Shape shape, RngStream& rng, std::vector<double> kinks, double gap) {
  Vector v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) {
    double x;
    bool near;
    do {
      x = rng.uniform(-1.0, 1.0);
      near = false;
      for (double k : kinks) near = near || std::abs(x - k) < gap;
    } while (near);
    v[i] = x;
  }
  return Tensor(std::move(shape), v);
}

constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("elementwise ops match central differences") {
  RngStream rng(11, "autodiff-elementwise");
  const Tensor c = random_tensor({3, 4}, rng);
  const Tensor x = random_tensor({3, 4}, rng);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(add(t, c), sub(t, c))); }, x) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(scale(add_scalar(mul(t, t), 0.5), -1.5)); }, x) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return mean(exp(t)); }, x) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(log(add_scalar(mul(t, t), 0.1))); }, x) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sq_l2_norm(t); }, x) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(row_sum(mul(t, c))); }, x) < kTol);
  const Tensor xr = away_from({3, 4}, rng, {0.0}, 1e-3);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(relu(t), c)); }, xr) < kTol);
  const Tensor xc = away_from({3, 4}, rng, {-0.3, 0.4}, 1e-3);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(clamp(t, -0.3, 0.4), c)); }, xc) < kTol);
}

TEST_CASE("linear algebra and shape ops match central differences") {
  RngStream rng(12, "autodiff-linear");
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor x = random_tensor({2, 4}, rng);
  const Tensor probe = random_tensor({2, 3}, rng);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(matmul(t, w), probe)); }, x) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(matmul(x, t), probe)); }, w) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(add_bias(matmul(x, w), t), probe)); }, b) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(reshape(t, {4, 2}), reshape(x, {4, 2}))); }, x) <
        kTol);
}

TEST_CASE("convolution, padding and pooling match central differences") {
  RngStream rng(13, "autodiff-conv");
  const Tensor x = random_tensor({2, 2, 6, 5}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const Tensor probe = random_tensor({2, 3, 4, 3}, rng);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(conv2d_valid(t, k), probe)); }, x) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(conv2d_valid(x, t), probe)); }, k) < kTol);
  const Tensor pool_probe = random_tensor({2, 2, 3, 2}, rng);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(avg_pool2d(t), pool_probe)); }, x) < kTol);
  const Tensor pad_probe = random_tensor({2, 2, 8, 7}, rng);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(pad2d(t, 1), pad_probe)); }, x) < kTol);
  const Tensor cb = random_tensor({2}, rng);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(add_bias(x, t), x)); }, cb) < kTol);
}

TEST_CASE("losses and softmax match central differences") {
  RngStream rng(14, "autodiff-losses");
  const Tensor z = random_tensor({3, 5}, rng, -3.0, 3.0);
  const Tensor q = random_tensor({3, 5}, rng, -3.0, 3.0);
  const std::vector<int> y{0, 4, 2};
  const Tensor probe = random_tensor({3, 5}, rng);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(softmax(t), probe)); }, z) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(mul(log_softmax(t), probe)); }, z) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return mean(ce_loss(t, y)); }, z) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(kl_loss(t, q)); }, z) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(kl_loss(q, t)); }, z) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(margin_loss(t, y)); }, z) < kTol);
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(gather(t, y)); }, z) < kTol);
}

TEST_CASE("cross-entropy gradient equals softmax minus one-hot") {
  RngStream rng(15, "autodiff-ce");
  for (int trial = 0; trial < 50; ++trial) {
    const Index classes = rng.uniform_int(2, 12);
    const Tensor z = random_tensor({classes}, rng, -10.0, 10.0);
    const int y = static_cast<int>(rng.uniform_int(0, classes - 1));
    const Vector g = prbtest::tape_gradient([&](const Tensor& t) { return ce_loss(t, y); }, z);
    Vector expected = softmax(z).values();
    expected[y] -= 1.0;
    CHECK((g - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("sign and clamp outside the range have zero derivative") {
  const Tensor x({4}, {-2.0, -0.5, 0.5, 2.0});
  const Vector gs = prbtest::tape_gradient([](const Tensor& t) { return sum(sign(t)); }, x);
  CHECK(gs.isZero());
  const Vector gc = prbtest::tape_gradient([](const Tensor& t) { return sum(clamp(t, -1.0, 1.0)); }, x);
  CHECK(gc[0] == 0.0);
  CHECK(gc[1] == 1.0);
  CHECK(gc[2] == 1.0);
  CHECK(gc[3] == 0.0);
}

TEST_CASE("reused nodes accumulate gradients") {
  const Tensor x({3}, {1.0, -2.0, 3.0});
  const Vector g = prbtest::tape_gradient([](const Tensor& t) { return sum(mul(t, add(t, t))); }, x);
  CHECK((g - 4.0 * x.values()).norm() == doctest::Approx(0.0));
}

TEST_CASE("untracked tensors act as constants") {
  GradTape tape;
  TapeScope scope(tape);
  const Tensor a = tape.watch(Tensor({2}, {1.0, 2.0}));
  const Tensor c({2}, {3.0, 4.0});
  const Tensor before = c;
  const Tensor loss = sum(mul(a, c));
  CHECK(!mul(c, c).on_tape());
  const Vector g = tape.gradient(loss, a).values();
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 4.0);
  CHECK(identical(before, c));
}

TEST_CASE("tape misuse raises TapeError") {
  GradTape tape;
  TapeScope scope(tape);
  const Tensor a = tape.watch(Tensor({2}, {1.0, 2.0}));
  const Tensor v = mul(a, a);
  CHECK_THROWS_AS(tape.gradient(v, a), TapeError);
  GradTape other;
  const Tensor foreign = other.watch(Tensor::scalar(1.0));
  CHECK_THROWS_AS(tape.gradient(sum(v), foreign), TapeError);
}

TEST_CASE("a nested scope restores the outer tape") {
  GradTape outer;
  TapeScope s1(outer);
  const Tensor a = outer.watch(Tensor::scalar(2.0));
  {
    GradTape inner;
    TapeScope s2(inner);
    CHECK(GradTape::active() == &inner);
    CHECK(!mul(a, a).on_tape());
  }
  CHECK(GradTape::active() == &outer);
  CHECK(outer.gradient(mul(a, a), a).item() == 4.0);
}

TEST_CASE("shape violations raise ShapeError") {
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  CHECK_THROWS_AS(conv2d_valid(Tensor::zeros({1, 2, 5, 5}), Tensor::zeros({1, 3, 3, 3})), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({2, 2}).reshaped({3}), ShapeError);
  const std::vector<int> bad{5};
  CHECK_THROWS_AS(ce_loss(Tensor::zeros({1, 3}), bad), ValueError);
}

TEST_CASE("copies never write through shared storage") {
  Tensor a({2}, {1.0, 2.0});
  Tensor b = a;
  b.mutable_values()[0] = 9.0;
  CHECK(a[0] == 1.0);
  CHECK(b[0] == 9.0);
}

TEST_CASE("model gradients match central differences for both architectures") {
  RngStream rng(16, "autodiff-models");
  for (Architecture arch : {Architecture::mlp, Architecture::simplecnn}) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto d = prbtest::random_model(arch, rng);
      CHECK(prbtest::model_gradient_error(d.params, d.spec, d.x, d.y, rng) <= 1e-4);
    }
  }
}

TEST_CASE("primitive forward values") {
  const Tensor r = relu(Tensor({3}, {-1.0, 0.0, 2.0}));
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  const Tensor eye({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const Tensor m({2, 2}, {3.0, 4.0, 5.0, 6.0});
  CHECK(identical(matmul(eye, m), m));

  const Tensor conv = conv2d_valid(Tensor::filled({1, 1, 4, 4}, 1.0), Tensor::filled({1, 1, 3, 3}, 1.0));
  CHECK(conv.shape() == Shape{1, 1, 2, 2});
  // Brute-force sliding window over an all-ones image.
  for (Index i = 0; i < 4; ++i) CHECK(conv[i] == 9.0);

  const Tensor x({2, 2}, {1.0, -2.0, 3.0, 0.5});
  CHECK(sum(x).item() == 2.5);
  CHECK(mean(x).item() == 0.625);
  CHECK(sq_l2_norm(x).item() == 14.25);
  const Tensor c = clamp(x, 0.0, 1.0);
  CHECK(c[1] == 0.0);
  CHECK(c[2] == 1.0);
  const Tensor s = sign(x);
  CHECK(s[1] == -1.0);
  CHECK(s[3] == 1.0);
  CHECK(sign(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(log(exp(x))[1] == doctest::Approx(-2.0));
}

TEST_CASE("softmax values") {
  const Tensor a = softmax(Tensor({2}, {0.0, 0.0}));
  CHECK(a[0] == 0.5);
  CHECK(a[1] == 0.5);
  for (double c : {-700.0, 0.0, 3.5, 900.0}) {
    const Tensor b = softmax(Tensor({3}, {c, c, c}));
    for (Index i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  const double e = std::exp(1.0);
  const Tensor d = softmax(Tensor({3}, {1.0, 0.0, 0.0}));
  CHECK(d[0] == doctest::Approx(e / (e + 2.0)).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(1.0 / (e + 2.0)).epsilon(1e-15));
  const Tensor cols = softmax(Tensor({2, 2}, {0.0, 5.0, 0.0, 5.0}), 0);
  CHECK(cols[0] == 0.5);
  CHECK(cols[1] == 0.5);
}

TEST_CASE("cross-entropy values") {
  CHECK(ce_loss(Tensor({3}, {800.0, 0.0, 0.0}), 0).item() == 0.0);
  CHECK(ce_loss(Tensor::filled({10}, 1.25), 3).item() == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  const Vector g = prbtest::tape_gradient([](const Tensor& t) { return ce_loss(t, 0); }, Tensor({2}, {0.0, 0.0}));
  CHECK(g[0] == -0.5);
  CHECK(g[1] == 0.5);
}

TEST_CASE("KL values") {
  const Tensor p({2}, {0.3, -1.2});
  CHECK(kl_loss(p, p).item() == 0.0);
  CHECK(kl_loss(Tensor({2}, {50.0, -50.0}), Tensor({2}, {0.0, 0.0})).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(kl_loss(Tensor({2}, {1.0, 1.0}), Tensor({2}, {7.0, 7.0})).item()) < 1e-15);
}

TEST_CASE("backward on simple roots") {
  RngStream rng(17, "autodiff-backward");
  const Tensor x = random_tensor({2, 3, 2}, rng);
  const Vector ones = prbtest::tape_gradient([](const Tensor& t) { return sum(t); }, x);
  CHECK(ones == Vector::Ones(12));
  const Vector g = prbtest::tape_gradient([](const Tensor& t) { return sq_l2_norm(t); }, Tensor({2}, {1.0, 2.0}));
  CHECK(g[0] == 4.0 / 2.0);
  CHECK(g[1] == 4.0);

  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor xin = random_tensor({1, 4}, rng);
  const std::vector<int> y{2};
  CHECK(op_gradient_error([&](const Tensor& t) { return sum(ce_loss(matmul(xin, t), y)); }, w, 1e-5) <= 1e-4);
}
