#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prbench/rng.hpp"
#include "prbench/tape.hpp"
#include "prbench/tensor.hpp"

namespace prb {

enum class Architecture { mlp, simplecnn };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view name);

/// Architecture description.
///
/// `mlp`: input_shape = {features}; affine layers of widths `hidden` with ReLU
/// between them, then an affine map to `classes`. No hidden layers gives a
/// linear model.
///
/// `simplecnn`: input_shape = {channels, h, w};
/// conv 16@3x3 -> relu -> conv 32@3x3 -> relu -> 2x2 mean pool (stride 2)
/// -> fc 128 -> relu -> fc classes. Valid padding throughout.
struct ModelSpec {
  Architecture arch = Architecture::mlp;
  Shape input_shape;
  Index classes = 2;
  std::vector<Index> hidden;
  Index conv1_channels = 16;
  Index conv2_channels = 32;
  Index fc_width = 128;

  static ModelSpec mlp(Index features, std::vector<Index> hidden, Index classes);
  static ModelSpec simple_cnn(Index channels, Index height, Index width, Index classes);

  void validate() const;
  /// Shape of a batch of `batch` inputs.
  Shape batch_shape(Index batch) const;
  Index input_size() const { return shape_size(input_shape); }
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered parameter list theta.
struct ModelParams {
  std::vector<NamedTensor> tensors;

  std::size_t size() const noexcept { return tensors.size(); }
  const Tensor& operator[](std::size_t i) const { return tensors[i].value; }
  Tensor& operator[](std::size_t i) { return tensors[i].value; }
  Index parameter_count() const;
  /// Returns copies linked to `tape` as leaves.
  ModelParams watched(GradTape& tape) const;
  /// Copies sharing storage but linked to no tape.
  ModelParams detached() const;
};

/// Names and shapes of the parameters `spec` requires, in order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelSpec& spec);

/// Kaiming-uniform fan-in weights (bound sqrt(6 / fan_in)), zero biases.
ModelParams init_params(const ModelSpec& spec, RngStream& rng);

/// All parameters zero.
ModelParams zero_params(const ModelSpec& spec);

/// Logits of shape (batch, classes). Differentiable in both params and x.
Tensor forward(const ModelParams& params, const ModelSpec& spec, const Tensor& x);

/// Arg-max predictions; evaluates in chunks of `chunk` rows.
std::vector<int> predict(const ModelParams& params, const ModelSpec& spec, const Tensor& x, Index chunk = 1024);

/// Rows [begin, begin + count) of a batch tensor.
Tensor slice_rows(const Tensor& x, Index begin, Index count);

/// Stacks the selected rows of a batch tensor.
Tensor gather_rows(const Tensor& x, std::span<const Index> rows);

}  // namespace prb
