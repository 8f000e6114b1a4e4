#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "prbench/rng.hpp"
#include "prbench/tensor.hpp"

namespace prb {

enum class NoiseFamily { uniform, gaussian, laplace };

std::string_view to_string(NoiseFamily family);
NoiseFamily parse_noise_family(std::string_view name);

/// How Gaussian and Laplace draws are kept inside the ball: coordinate-wise
/// clamping, or scaling the whole draw by gamma / max|delta_i| when it leaves.
enum class BoundRule { clamp, rescale };

std::string_view to_string(BoundRule rule);
BoundRule parse_bound_rule(std::string_view name);

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
};

/// Distribution of random perturbations inside the L-infinity ball of radius
/// `gamma`. Gaussian and Laplace draws use scale `sigma` (gamma / 2 when
/// unset) and are brought into [-gamma, gamma] by `rule`.
struct PerturbationSpec {
  NoiseFamily family = NoiseFamily::uniform;
  double gamma = 0.0;
  std::optional<double> sigma;
  BoundRule rule = BoundRule::clamp;
  Bounds bounds;

  double scale() const { return sigma.value_or(gamma / 2.0); }
  void validate() const;
};

/// Draws one perturbation of the given shape. Always satisfies |delta_i| <= gamma.
Tensor sample_delta(const PerturbationSpec& spec, const Shape& shape, RngStream& rng);

/// clamp(x + delta, lo, hi).
Tensor apply_and_clip(const Tensor& x, const Tensor& delta, Bounds bounds);

/// Coordinate-wise clamp into [-gamma, gamma].
Tensor project_linf(const Tensor& delta, double gamma);

/// Adjusts `delta` so that |delta_i| <= gamma and lo <= x_i + delta_i <= hi
/// both hold in floating point, moving each coordinate as little as possible.
/// Requires x inside the bounds.
Tensor feasible_delta(const Tensor& x, const Tensor& delta, double gamma, Bounds bounds);

}  // namespace prb
