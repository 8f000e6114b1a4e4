#pragma once

#include <span>

#include "prbench/tape.hpp"
#include "prbench/tensor.hpp"

// Differentiable primitives. Every function computes its forward value and,
// when an active tape tracks one of its operands, records the local
// derivative. Shape violations raise ShapeError naming the op and shapes.
namespace prb {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

/// (m, k) x (k, n) -> (m, n).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Adds a per-feature bias: (batch, n) + (n), or (batch, c, h, w) + (c).
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// Valid-padding, stride-1 cross-correlation.
/// x: (batch, in_c, h, w); kernel: (out_c, in_c, kh, kw) -> (batch, out_c, h-kh+1, w-kw+1).
Tensor conv2d_valid(const Tensor& x, const Tensor& kernel);

/// Zero padding of `pad` pixels on every spatial border of a rank-4 tensor.
Tensor pad2d(const Tensor& x, Index pad);

/// Non-overlapping 2x2 mean pooling with stride 2 on a rank-4 tensor; odd
/// trailing rows/columns are dropped.
Tensor avg_pool2d(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// (batch, ...) -> (batch, rest).
Tensor flatten(const Tensor& x);

Tensor relu(const Tensor& x);
/// Sum of all elements, rank-0 result.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// (batch, n) -> (batch).
Tensor row_sum(const Tensor& x);

/// Elementwise clamp into [lo, hi]; derivative 1 strictly inside, 0 outside.
Tensor clamp(const Tensor& x, double lo, double hi);
/// Elementwise sign with zero derivative everywhere.
Tensor sign(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
/// Squared Euclidean norm of all elements, rank-0 result.
Tensor sq_l2_norm(const Tensor& x);

/// Max-shifted softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& z, Index axis = -1);
Tensor log_softmax(const Tensor& z);

/// Cross-entropy -log softmax(z)_y. Rank-1 logits give a rank-0 loss; rank-2
/// logits (batch, classes) give one loss per row. The derivative with respect
/// to the logits is softmax(z) - onehot(y).
Tensor ce_loss(const Tensor& logits, std::span<const int> labels);
Tensor ce_loss(const Tensor& logits, int label);

/// KL(softmax(p_logits) || softmax(q_logits)), per row for rank-2 inputs.
Tensor kl_loss(const Tensor& p_logits, const Tensor& q_logits);

/// max_{j != y} z_j - z_y, per row for rank-2 logits. Ties pick the lowest j.
Tensor margin_loss(const Tensor& logits, std::span<const int> labels);

/// Picks x[i, labels[i]] from a (batch, n) tensor.
Tensor gather(const Tensor& x, std::span<const int> labels);

/// Row-wise argmax of (batch, classes) scores, ties to the lowest index.
std::vector<int> argmax_rows(const Tensor& scores);

}  // namespace prb
