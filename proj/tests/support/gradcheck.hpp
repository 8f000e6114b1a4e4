#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "prbench/model.hpp"
#include "prbench/ops.hpp"
#include "prbench/rng.hpp"
#include "prbench/tape.hpp"

namespace prbtest {

using prb::Index;
using prb::Tensor;
using prb::Vector;

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double rel_err(const Vector& a, const Vector& b, double floor = 1e-8) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

/// Central differences of a scalar function, one coordinate at a time.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Tape gradient of a scalar-valued op chain with respect to one input.
inline Vector tape_gradient(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
  prb::GradTape tape;
  prb::TapeScope scope(tape);
  const Tensor xw = tape.watch(x);
  return tape.gradient(f(xw), xw).values();
}

/// Largest relative error between the tape gradient and central differences
/// over every coordinate of `x`.
inline double op_gradient_error(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-6) {
  const Vector analytic = tape_gradient(f, x);
  const Vector numeric = numeric_gradient([&](const Vector& v) { return f(Tensor(x.shape(), v)).item(); },
                                          x.values(), h);
  return rel_err(analytic, numeric);
}

inline double model_loss(const prb::ModelParams& p, const prb::ModelSpec& spec, const Tensor& x,
                         std::span<const int> y) {
  return prb::mean(prb::ce_loss(prb::forward(p, spec, x), y)).item();
}

/// Compares directional derivatives of the mean cross-entropy, taken jointly
/// in parameters and inputs along random unit directions, against central
/// differences. Returns the largest relative error.
inline double model_gradient_error(const prb::ModelParams& params, const prb::ModelSpec& spec, const Tensor& x,
                                   std::span<const int> y, prb::RngStream& rng, int directions = 3,
                                   double h = 1e-6) {
  std::vector<Tensor> grads;
  {
    prb::GradTape tape;
    prb::TapeScope scope(tape);
    const prb::ModelParams pw = params.watched(tape);
    const Tensor xw = tape.watch(x);
    const Tensor loss = prb::mean(prb::ce_loss(prb::forward(pw, spec, xw), y));
    std::vector<Tensor> wrt(pw.size() + 1);
    for (std::size_t i = 0; i < pw.size(); ++i) wrt[i] = pw[i];
    wrt.back() = xw;
    grads = tape.backward(loss, wrt);
  }

  double worst = 0.0;
  for (int d = 0; d < directions; ++d) {
    std::vector<Vector> dirs;
    double norm2 = 0.0;
    for (const auto& g : grads) {
      Vector v(g.size());
      for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
      norm2 += v.squaredNorm();
      dirs.push_back(std::move(v));
    }
    double analytic = 0.0;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      dirs[k] /= std::sqrt(norm2);
      analytic += grads[k].values().dot(dirs[k]);
    }
    auto shifted = [&](double t) {
      prb::ModelParams p = params.detached();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] = Tensor(p[k].shape(), p[k].values() + t * dirs[k]);
      const Tensor xs(x.shape(), x.values() + t * dirs.back());
      return model_loss(p, spec, xs, y);
    };
    const double numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
    worst = std::max(worst, rel_err(analytic, numeric));
  }
  return worst;
}

/// Random model and batch drawn from `rng`; small sizes keep checks fast.
struct ModelDraw {
  prb::ModelSpec spec;
  prb::ModelParams params;
  Tensor x;
  std::vector<int> y;
};

inline ModelDraw random_model(prb::Architecture arch, prb::RngStream& rng) {
  ModelDraw d;
  const Index classes = rng.uniform_int(2, 10);
  Index batch = 0;
  if (arch == prb::Architecture::mlp) {
    std::vector<Index> hidden(static_cast<std::size_t>(rng.uniform_int(0, 3)));
    for (auto& h : hidden) h = rng.uniform_int(1, 16);
    d.spec = prb::ModelSpec::mlp(rng.uniform_int(1, 20), hidden, classes);
    batch = rng.uniform_int(1, 8);
  } else {
    d.spec = prb::ModelSpec::simple_cnn(rng.uniform_int(1, 3), rng.uniform_int(6, 10), rng.uniform_int(6, 10),
                                        classes);
    batch = rng.uniform_int(1, 3);
  }
  d.params = prb::init_params(d.spec, rng);
  // Non-zero biases so every layer contributes to the check.
  for (auto& t : d.params.tensors) {
    if (t.value.rank() == 1) {
      Vector b(t.value.size());
      for (Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.5, 0.5);
      t.value = Tensor(t.value.shape(), b);
    }
  }
  Vector xv(batch * d.spec.input_size());
  for (Index i = 0; i < xv.size(); ++i) xv[i] = rng.uniform01();
  d.x = Tensor(d.spec.batch_shape(batch), xv);
  for (Index i = 0; i < batch; ++i) d.y.push_back(static_cast<int>(rng.uniform_int(0, classes - 1)));
  return d;
}

}  // namespace prbtest
