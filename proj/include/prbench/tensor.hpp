#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prb {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Location of a value on a gradient tape.
struct TapeRef {
  std::uint64_t tape_uid = 0;
  Index node = -1;
};

/// Dense row-major array of doubles with an optional link into the active
/// gradient tape.
///
/// Storage is shared between copies and never written through a shared
/// handle: `mutable_values()` copies on write and drops the tape link, so a
/// tensor that is not on a tape can be read from several threads.
class Tensor {
 public:
  /// Rank-0 tensor holding 0.
  Tensor();
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Vector values);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const noexcept { return data_->size(); }

  const Vector& values() const noexcept { return *data_; }
  Vector& mutable_values();
  const double* data() const noexcept { return data_->data(); }
  double operator[](Index i) const { return (*data_)[i]; }

  /// Value of a single-element tensor.
  double item() const;

  /// Rank-2 view; rank-1 tensors are viewed as a single row.
  Eigen::Map<const RowMatrix> matrix() const;

  const std::optional<TapeRef>& tape_ref() const noexcept { return tape_; }
  bool on_tape() const noexcept { return tape_.has_value(); }

  /// Same values and shape, not linked to any tape.
  Tensor detached() const;

  /// Same storage under a new shape of equal size; drops the tape link.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const { return data_->allFinite(); }

 private:
  friend class GradTape;

  Shape shape_;
  std::shared_ptr<Vector> data_;
  std::optional<TapeRef> tape_;
};

/// Bitwise comparison of shape and values.
bool identical(const Tensor& a, const Tensor& b);

}  // namespace prb
