#include "prbench/tensor.hpp"

#include <cstring>
#include <sstream>

#include "prbench/error.hpp"

namespace prb {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor() : data_(std::make_shared<Vector>(Vector::Zero(1))) {}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), data_(std::make_shared<Vector>(Vector::Zero(shape_size(shape_)))) {}

Tensor::Tensor(Shape shape, Vector values) : shape_(std::move(shape)) {
  if (shape_size(shape_) != values.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape_) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  data_ = std::make_shared<Vector>(std::move(values));
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape), Eigen::Map<const Vector>(values.begin(), static_cast<Index>(values.size()))) {}

Tensor Tensor::scalar(double value) {
  Vector v(1);
  v[0] = value;
  return Tensor({}, std::move(v));
}

Tensor Tensor::filled(Shape shape, double value) {
  const Index n = shape_size(shape);
  return Tensor(std::move(shape), Vector::Constant(n, value));
}

Vector& Tensor::mutable_values() {
  if (data_.use_count() > 1) data_ = std::make_shared<Vector>(*data_);
  tape_.reset();
  return *data_;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape_) + " is not a single value");
  return (*data_)[0];
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  if (rank() == 1) return {data(), 1, shape_[0]};
  if (rank() != 2) throw ShapeError("matrix: expected rank 1 or 2, got " + shape_string(shape_));
  return {data(), shape_[0], shape_[1]};
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape_.reset();
  return t;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw ShapeError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  t.tape_.reset();
  return t;
}

bool identical(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

}  // namespace prb
