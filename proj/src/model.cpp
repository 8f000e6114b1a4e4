#include "prbench/model.hpp"

#include <cmath>

#include "prbench/error.hpp"
#include "prbench/ops.hpp"

namespace prb {

std::string_view to_string(Architecture arch) {
  return arch == Architecture::mlp ? "mlp" : "simplecnn";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "mlp") return Architecture::mlp;
  if (name == "simplecnn") return Architecture::simplecnn;
  throw ValueError("unknown architecture '" + std::string(name) + "'");
}

ModelSpec ModelSpec::mlp(Index features, std::vector<Index> hidden, Index classes) {
  ModelSpec spec;
  spec.arch = Architecture::mlp;
  spec.input_shape = {features};
  spec.hidden = std::move(hidden);
  spec.classes = classes;
  return spec;
}

ModelSpec ModelSpec::simple_cnn(Index channels, Index height, Index width, Index classes) {
  ModelSpec spec;
  spec.arch = Architecture::simplecnn;
  spec.input_shape = {channels, height, width};
  spec.classes = classes;
  return spec;
}

void ModelSpec::validate() const {
  if (classes < 2) throw ValueError("model: need at least two classes");
  if (arch == Architecture::mlp) {
    if (input_shape.size() != 1 || input_shape[0] < 1) throw ValueError("model: mlp input shape must be {features}");
    for (Index h : hidden) {
      if (h < 1) throw ValueError("model: hidden widths must be positive");
    }
  } else {
    if (input_shape.size() != 3) throw ValueError("model: simplecnn input shape must be {channels, h, w}");
    if (input_shape[1] < 6 || input_shape[2] < 6) throw ValueError("model: simplecnn input must be at least 6x6");
  }
}

Shape ModelSpec::batch_shape(Index batch) const {
  Shape s{batch};
  s.insert(s.end(), input_shape.begin(), input_shape.end());
  return s;
}

Index ModelParams::parameter_count() const {
  Index n = 0;
  for (const auto& t : tensors) n += t.value.size();
  return n;
}

ModelParams ModelParams::watched(GradTape& tape) const {
  ModelParams out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back({t.name, tape.watch(t.value)});
  return out;
}

ModelParams ModelParams::detached() const {
  ModelParams out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back({t.name, t.value.detached()});
  return out;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelSpec& spec) {
  spec.validate();
  std::vector<std::pair<std::string, Shape>> layout;
  if (spec.arch == Architecture::mlp) {
    Index in = spec.input_shape[0];
    for (std::size_t i = 0; i <= spec.hidden.size(); ++i) {
      const Index out = i < spec.hidden.size() ? spec.hidden[i] : spec.classes;
      const std::string prefix = "layer" + std::to_string(i);
      layout.emplace_back(prefix + ".weight", Shape{in, out});
      layout.emplace_back(prefix + ".bias", Shape{out});
      in = out;
    }
    return layout;
  }
  const Index c = spec.input_shape[0], h = spec.input_shape[1], w = spec.input_shape[2];
  const Index pooled = ((h - 4) / 2) * ((w - 4) / 2) * spec.conv2_channels;
  layout.emplace_back("conv1.weight", Shape{spec.conv1_channels, c, 3, 3});
  layout.emplace_back("conv1.bias", Shape{spec.conv1_channels});
  layout.emplace_back("conv2.weight", Shape{spec.conv2_channels, spec.conv1_channels, 3, 3});
  layout.emplace_back("conv2.bias", Shape{spec.conv2_channels});
  layout.emplace_back("fc1.weight", Shape{pooled, spec.fc_width});
  layout.emplace_back("fc1.bias", Shape{spec.fc_width});
  layout.emplace_back("fc2.weight", Shape{spec.fc_width, spec.classes});
  layout.emplace_back("fc2.bias", Shape{spec.classes});
  return layout;
}

namespace {

Index fan_in(const Shape& weight_shape) {
  // Linear weights are (in, out); conv kernels are (out, in, kh, kw).
  if (weight_shape.size() == 2) return weight_shape[0];
  return weight_shape[1] * weight_shape[2] * weight_shape[3];
}

bool is_bias(const std::string& name) { return name.ends_with(".bias"); }

}  // namespace

ModelParams init_params(const ModelSpec& spec, RngStream& rng) {
  ModelParams params;
  for (auto& [name, shape] : parameter_layout(spec)) {
    if (is_bias(name)) {
      params.tensors.push_back({name, Tensor(shape)});
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in(shape)));
    Vector v(shape_size(shape));
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
    params.tensors.push_back({name, Tensor(shape, std::move(v))});
  }
  return params;
}

ModelParams zero_params(const ModelSpec& spec) {
  ModelParams params;
  for (auto& [name, shape] : parameter_layout(spec)) params.tensors.push_back({name, Tensor(shape)});
  return params;
}

Tensor forward(const ModelParams& params, const ModelSpec& spec, const Tensor& x) {
  const auto layout = parameter_layout(spec);
  if (params.size() != layout.size()) {
    throw ShapeError("forward: expected " + std::to_string(layout.size()) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params[i].shape() != layout[i].second) {
      throw ShapeError("forward: parameter " + layout[i].first + " has shape " + shape_string(params[i].shape()) +
                       ", expected " + shape_string(layout[i].second));
    }
  }
  if (x.rank() < 1 || x.shape() != spec.batch_shape(x.dim(0))) {
    throw ShapeError("forward: input shape " + shape_string(x.shape()) + " does not match model input " +
                     shape_string(spec.input_shape));
  }

  if (spec.arch == Architecture::mlp) {
    Tensor h = x;
    const std::size_t layers = params.size() / 2;
    for (std::size_t i = 0; i < layers; ++i) {
      h = add_bias(matmul(h, params[2 * i]), params[2 * i + 1]);
      if (i + 1 < layers) h = relu(h);
    }
    return h;
  }

  Tensor h = relu(add_bias(conv2d_valid(x, params[0]), params[1]));
  h = relu(add_bias(conv2d_valid(h, params[2]), params[3]));
  h = flatten(avg_pool2d(h));
  h = relu(add_bias(matmul(h, params[4]), params[5]));
  return add_bias(matmul(h, params[6]), params[7]);
}

Tensor slice_rows(const Tensor& x, Index begin, Index count) {
  if (x.rank() < 1 || begin < 0 || count < 0 || begin + count > x.dim(0)) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + shape_string(x.shape()));
  }
  const Index row = x.dim(0) == 0 ? 0 : x.size() / x.dim(0);
  Shape s = x.shape();
  s[0] = count;
  return Tensor(std::move(s), x.values().segment(begin * row, count * row));
}

Tensor gather_rows(const Tensor& x, std::span<const Index> rows) {
  if (x.rank() < 1) throw ShapeError("gather_rows: rank-0 input");
  const Index row = x.dim(0) == 0 ? 0 : x.size() / x.dim(0);
  Vector out(static_cast<Index>(rows.size()) * row);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.dim(0)) throw ShapeError("gather_rows: row index out of range");
    out.segment(static_cast<Index>(i) * row, row) = x.values().segment(rows[i] * row, row);
  }
  Shape s = x.shape();
  s[0] = static_cast<Index>(rows.size());
  return Tensor(std::move(s), std::move(out));
}

std::vector<int> predict(const ModelParams& params, const ModelSpec& spec, const Tensor& x, Index chunk) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.dim(0)));
  for (Index b = 0; b < x.dim(0); b += chunk) {
    const Index n = std::min(chunk, x.dim(0) - b);
    const auto part = argmax_rows(forward(params, spec, slice_rows(x, b, n)));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace prb
