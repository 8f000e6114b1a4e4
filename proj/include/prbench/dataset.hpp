#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prbench/perturbation.hpp"
#include "prbench/tensor.hpp"

namespace prb {

/// Labelled inputs stacked along the first axis.
struct Dataset {
  std::string name;
  Tensor inputs;
  std::vector<int> labels;
  Index classes = 0;
  Bounds bounds;

  Index size() const noexcept { return static_cast<Index>(labels.size()); }
  /// Shape of one input, without the batch axis.
  Shape input_shape() const;

  Dataset head(Index count) const;
  Dataset select(std::span<const Index> rows) const;
  /// (n, ...) -> (n, features).
  Dataset flattened() const;

  /// Throws ValueError on mismatched sizes, labels outside [0, classes) or
  /// inputs outside the bounds.
  void validate() const;
};

/// Reads an IDX image file (magic 0x803) and label file (magic 0x801).
/// Pixels are scaled to [0, 1]; images come out as (n, 1, rows, cols).
/// Failures raise DataError with kind missing_file, bad_magic, truncated
/// (payload shorter than the header promises) or dim_mismatch (trailing
/// bytes, or image and label counts differ).
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

struct MnistSplit {
  Dataset train;
  Dataset test;
};

/// Loads the four standard files (train-images-idx3-ubyte, ...) from `dir`.
/// Also accepts the same names with a ".idx3-ubyte" style dot separator.
MnistSplit load_mnist_dir(const std::filesystem::path& dir);

enum class SynthKind { two_moons, gaussian_blobs, linear };

std::string_view to_string(SynthKind kind);
SynthKind parse_synth_kind(std::string_view name);

/// w . x + b > 0 for class 1.
struct LinearSeparator {
  std::array<double, 2> w;
  double b;
};

struct SyntheticSet {
  Dataset data;
  /// Present for SynthKind::linear.
  std::optional<LinearSeparator> separator;
};

/// Seeded 2-D data inside [0, 1]^2 with balanced classes (label i % classes).
///
/// two_moons: two interleaved half circles, jittered by N(0, noise^2).
/// gaussian_blobs: three isotropic blobs with standard deviation `noise`.
/// linear: uniform points labelled by a random line through the centre
/// region; points closer than 0.05 to the line are redrawn, so the set is
/// separable with that margin whatever `noise` is.
SyntheticSet synth_dataset(SynthKind kind, Index n, double noise, std::uint64_t seed);

}  // namespace prb
