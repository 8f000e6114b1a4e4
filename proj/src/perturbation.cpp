#include "prbench/perturbation.hpp"

#include <algorithm>
#include <cmath>

#include "prbench/error.hpp"

namespace prb {

std::string_view to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::uniform: return "uniform";
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::laplace: return "laplace";
  }
  return "uniform";
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "uniform") return NoiseFamily::uniform;
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "laplace") return NoiseFamily::laplace;
  throw ValueError("unknown noise family '" + std::string(name) + "'");
}

std::string_view to_string(BoundRule rule) { return rule == BoundRule::clamp ? "clamp" : "rescale"; }

BoundRule parse_bound_rule(std::string_view name) {
  if (name == "clamp") return BoundRule::clamp;
  if (name == "rescale") return BoundRule::rescale;
  throw ValueError("unknown bound rule '" + std::string(name) + "'");
}

void PerturbationSpec::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValueError("perturbation: gamma must be finite and >= 0");
  if (!(bounds.lo < bounds.hi)) throw ValueError("perturbation: bounds need lo < hi");
  if (sigma && !(*sigma > 0.0)) throw ValueError("perturbation: sigma must be > 0");
}

Tensor sample_delta(const PerturbationSpec& spec, const Shape& shape, RngStream& rng) {
  spec.validate();
  const Index n = shape_size(shape);
  Vector out(n);
  const double g = spec.gamma;
  if (g == 0.0) return Tensor(shape);
  switch (spec.family) {
    case NoiseFamily::uniform:
      for (Index i = 0; i < n; ++i) out[i] = rng.uniform(-g, g);
      break;
    case NoiseFamily::gaussian:
      for (Index i = 0; i < n; ++i) out[i] = spec.scale() * rng.normal();
      break;
    case NoiseFamily::laplace:
      for (Index i = 0; i < n; ++i) out[i] = spec.scale() * rng.laplace();
      break;
  }
  if (spec.family != NoiseFamily::uniform) {
    const double peak = n > 0 ? out.cwiseAbs().maxCoeff() : 0.0;
    if (spec.rule == BoundRule::rescale && peak > g) out *= g / peak;
    // Also guards the rescaled draw against rounding past gamma.
    out = out.cwiseMax(-g).cwiseMin(g);
  }
  return Tensor(shape, std::move(out));
}

Tensor apply_and_clip(const Tensor& x, const Tensor& delta, Bounds bounds) {
  if (x.shape() != delta.shape()) {
    throw ShapeError("apply_and_clip: shapes " + shape_string(x.shape()) + " and " + shape_string(delta.shape()) +
                     " differ");
  }
  return Tensor(x.shape(), (x.values() + delta.values()).cwiseMax(bounds.lo).cwiseMin(bounds.hi));
}

Tensor project_linf(const Tensor& delta, double gamma) {
  if (!(gamma >= 0.0)) throw ValueError("project_linf: gamma must be >= 0");
  return Tensor(delta.shape(), delta.values().cwiseMax(-gamma).cwiseMin(gamma));
}

Tensor feasible_delta(const Tensor& x, const Tensor& delta, double gamma, Bounds bounds) {
  if (x.shape() != delta.shape()) {
    throw ShapeError("feasible_delta: shapes " + shape_string(x.shape()) + " and " + shape_string(delta.shape()) +
                     " differ");
  }
  Vector out(delta.size());
  const double inf = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < out.size(); ++i) {
    const double xi = x[i];
    double t = std::clamp(xi + std::clamp(delta[i], -gamma, gamma), bounds.lo, bounds.hi);
    double d = t - xi;
    // Rounding in the subtraction can leave x + d a hair outside the box or
    // |d| a hair above gamma. Stepping the perturbed point t moves d in ulps
    // of x, which is the size of that error.
    for (int k = 0; k < 64 && d > 0.0 && (d > gamma || xi + d > bounds.hi); ++k) {
      t = std::nextafter(t, -inf);
      d = t - xi;
    }
    for (int k = 0; k < 64 && d < 0.0 && (d < -gamma || xi + d < bounds.lo); ++k) {
      t = std::nextafter(t, inf);
      d = t - xi;
    }
    if (std::abs(d) > gamma || xi + d > bounds.hi || xi + d < bounds.lo) d = 0.0;
    out[i] = d;
  }
  return Tensor(x.shape(), std::move(out));
}

}  // namespace prb
