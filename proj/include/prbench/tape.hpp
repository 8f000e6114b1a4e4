#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "prbench/tensor.hpp"

namespace prb {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  matmul,
  add_bias,
  conv2d_valid,
  pad2d,
  avg_pool2d,
  reshape,
  relu,
  sum,
  mean,
  row_sum,
  clamp,
  sign,
  log,
  exp,
  sq_l2_norm,
  softmax,
  log_softmax,
  ce_loss,
  kl_loss,
  margin_loss,
  gather,
};

std::string_view op_name(OpKind kind);

/// Accumulates d(root)/d(input_i) into `grad_inputs[i]` given d(root)/d(output).
/// Entries of `grad_inputs` are null for inputs that are not on the tape.
using BackwardFn = std::function<void(const Vector& grad_out, std::span<Vector* const> grad_inputs)>;

/// Append-only define-by-run record of differentiable operations.
///
/// A tape is rebuilt for every forward pass. Operations record onto the tape
/// made active by a `TapeScope`, and only when at least one of their inputs
/// is already on that tape; tensors from any other tape act as constants.
class GradTape {
 public:
  GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  /// Registers `value` as a leaf and returns it linked to this tape.
  Tensor watch(const Tensor& value);

  /// Gradients of the scalar `root` with respect to each tensor in `wrt`.
  /// Nodes are visited once, in decreasing index order.
  std::vector<Tensor> backward(const Tensor& root, std::span<const Tensor> wrt) const;
  std::vector<Tensor> backward(const Tensor& root, std::span<const Index> wrt_ids) const;
  Tensor gradient(const Tensor& root, const Tensor& wrt) const;

  Index size() const noexcept { return static_cast<Index>(nodes_.size()); }
  OpKind kind(Index node) const { return nodes_.at(static_cast<std::size_t>(node)).kind; }
  const std::vector<Index>& inputs(Index node) const { return nodes_.at(static_cast<std::size_t>(node)).inputs; }
  std::uint64_t uid() const noexcept { return uid_; }

  bool tracks(const Tensor& t) const noexcept;

  /// Appends a node for `output` unless none of `inputs` is tracked, in which
  /// case `output` is returned untouched.
  Tensor record(OpKind kind, Tensor output, std::initializer_list<const Tensor*> inputs, BackwardFn fn);

  static GradTape* active() noexcept;

 private:
  friend class TapeScope;

  struct Node {
    OpKind kind;
    Shape shape;
    std::vector<Index> inputs;  // -1 marks an untracked operand
    BackwardFn backward;
  };

  std::uint64_t uid_;
  std::vector<Node> nodes_;
};

/// Makes a tape active for the current thread until destruction, restoring
/// whatever was active before.
class TapeScope {
 public:
  explicit TapeScope(GradTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

/// Records `fn` on the active tape when any input is tracked there.
Tensor record_op(OpKind kind, Tensor output, std::initializer_list<const Tensor*> inputs, BackwardFn fn);

/// True when an active tape tracks at least one of `inputs`.
bool recording(std::initializer_list<const Tensor*> inputs);

}  // namespace prb
