#include "prbench/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prbench/error.hpp"

namespace prb {

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

[[noreturn]] void shape_fail(std::string_view op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_same(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "operand shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
}

void require_rank(std::string_view op, const Tensor& x, Index rank) {
  if (x.rank() != rank) {
    shape_fail(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(x.shape()));
  }
}

// Rows/columns of a logits tensor: rank 1 is a single row.
std::pair<Index, Index> rows_cols(std::string_view op, const Tensor& z) {
  if (z.rank() == 1) return {1, z.dim(0)};
  if (z.rank() == 2) return {z.dim(0), z.dim(1)};
  shape_fail(op, "expected rank 1 or 2 logits, got " + shape_string(z.shape()));
}

Shape per_row_shape(const Tensor& z) { return z.rank() == 1 ? Shape{} : Shape{z.dim(0)}; }

void check_labels(std::string_view op, std::span<const int> labels, Index rows, Index classes) {
  if (static_cast<Index>(labels.size()) != rows) {
    shape_fail(op, std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw ValueError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
}

// Row-wise log-sum-exp and softmax of a (rows, cols) matrix.
void softmax_rows(const ConstMap& z, RowMatrix& p, Vector& lse) {
  p.resize(z.rows(), z.cols());
  lse.resize(z.rows());
  for (Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    p.row(r) = (z.row(r).array() - m).exp();
    const double s = p.row(r).sum();
    p.row(r) /= s;
    lse[r] = m + std::log(s);
  }
}

Tensor unary(OpKind kind, const Tensor& x, Vector out, BackwardFn fn) {
  Tensor result(x.shape(), std::move(out));
  if (!recording({&x})) return result;
  return record_op(kind, std::move(result), {&x}, std::move(fn));
}

void im2col(const double* x, Index c_in, Index h, Index w, Index kh, Index kw, double* cols) {
  const Index ho = h - kh + 1;
  const Index wo = w - kw + 1;
  const Index plane = ho * wo;
  for (Index c = 0; c < c_in; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        double* dst = cols + ((c * kh + i) * kw + j) * plane;
        for (Index oh = 0; oh < ho; ++oh) {
          const double* src = x + (c * h + oh + i) * w + j;
          std::copy(src, src + wo, dst + oh * wo);
        }
      }
    }
  }
}

void col2im_add(const double* cols, Index c_in, Index h, Index w, Index kh, Index kw, double* dx) {
  const Index ho = h - kh + 1;
  const Index wo = w - kw + 1;
  const Index plane = ho * wo;
  for (Index c = 0; c < c_in; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const double* src = cols + ((c * kh + i) * kw + j) * plane;
        for (Index oh = 0; oh < ho; ++oh) {
          double* dst = dx + (c * h + oh + i) * w + j;
          const double* s = src + oh * wo;
          for (Index ow = 0; ow < wo; ++ow) dst[ow] += s[ow];
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  Tensor out(a.shape(), a.values() + b.values());
  if (!recording({&a, &b})) return out;
  return record_op(OpKind::add, std::move(out), {&a, &b}, [](const Vector& g, std::span<Vector* const> gi) {
    if (gi[0]) *gi[0] += g;
    if (gi[1]) *gi[1] += g;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  Tensor out(a.shape(), a.values() - b.values());
  if (!recording({&a, &b})) return out;
  return record_op(OpKind::sub, std::move(out), {&a, &b}, [](const Vector& g, std::span<Vector* const> gi) {
    if (gi[0]) *gi[0] += g;
    if (gi[1]) *gi[1] -= g;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  Tensor out(a.shape(), a.values().cwiseProduct(b.values()));
  if (!recording({&a, &b})) return out;
  Tensor av = a.detached();
  Tensor bv = b.detached();
  return record_op(OpKind::mul, std::move(out), {&a, &b}, [av, bv](const Vector& g, std::span<Vector* const> gi) {
    if (gi[0]) *gi[0] += g.cwiseProduct(bv.values());
    if (gi[1]) *gi[1] += g.cwiseProduct(av.values());
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(OpKind::scale, x, x.values() * factor,
               [factor](const Vector& g, std::span<Vector* const> gi) { *gi[0] += factor * g; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(OpKind::add_scalar, x, x.values().array() + offset,
               [](const Vector& g, std::span<Vector* const> gi) { *gi[0] += g; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) {
    shape_fail("matmul", "inner dimensions of " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                             " do not match");
  }
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Vector out(m * n);
  MutMap(out.data(), m, n).noalias() = a.matrix() * b.matrix();
  Tensor result({m, n}, std::move(out));
  if (!recording({&a, &b})) return result;
  Tensor av = a.detached();
  Tensor bv = b.detached();
  return record_op(OpKind::matmul, std::move(result), {&a, &b},
                   [av, bv, m, k, n](const Vector& g, std::span<Vector* const> gi) {
                     ConstMap gm(g.data(), m, n);
                     if (gi[0]) MutMap(gi[0]->data(), m, k).noalias() += gm * bv.matrix().transpose();
                     if (gi[1]) MutMap(gi[1]->data(), k, n).noalias() += av.matrix().transpose() * gm;
                   });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank("add_bias", bias, 1);
  Vector out = x.values();
  Index channels = 0, inner = 0, outer = 0;
  if (x.rank() == 2) {
    outer = x.dim(0);
    channels = x.dim(1);
    inner = 1;
  } else if (x.rank() == 4) {
    outer = x.dim(0);
    channels = x.dim(1);
    inner = x.dim(2) * x.dim(3);
  } else {
    shape_fail("add_bias", "expected rank 2 or 4 input, got " + shape_string(x.shape()));
  }
  if (bias.dim(0) != channels) {
    shape_fail("add_bias", "bias " + shape_string(bias.shape()) + " does not match input " + shape_string(x.shape()));
  }
  for (Index n = 0; n < outer; ++n) {
    for (Index c = 0; c < channels; ++c) {
      out.segment((n * channels + c) * inner, inner).array() += bias[c];
    }
  }
  Tensor result(x.shape(), std::move(out));
  if (!recording({&x, &bias})) return result;
  return record_op(OpKind::add_bias, std::move(result), {&x, &bias},
                   [outer, channels, inner](const Vector& g, std::span<Vector* const> gi) {
                     if (gi[0]) *gi[0] += g;
                     if (gi[1]) {
                       for (Index n = 0; n < outer; ++n) {
                         for (Index c = 0; c < channels; ++c) {
                           (*gi[1])[c] += g.segment((n * channels + c) * inner, inner).sum();
                         }
                       }
                     }
                   });
}

Tensor conv2d_valid(const Tensor& x, const Tensor& kernel) {
  require_rank("conv2d-valid", x, 4);
  require_rank("conv2d-valid", kernel, 4);
  const Index batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index c_out = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c_in || kh > h || kw > w || kh < 1 || kw < 1) {
    shape_fail("conv2d-valid",
               "kernel " + shape_string(kernel.shape()) + " does not fit input " + shape_string(x.shape()));
  }
  const Index ho = h - kh + 1, wo = w - kw + 1;
  const Index plane = ho * wo;
  const Index patch = c_in * kh * kw;
  const Index in_stride = c_in * h * w;
  const Index out_stride = c_out * plane;

  Vector out(batch * out_stride);
  ConstMap weights(kernel.data(), c_out, patch);
#pragma omp parallel
  {
    RowMatrix cols(patch, plane);
#pragma omp for schedule(static)
    for (Index n = 0; n < batch; ++n) {
      im2col(x.data() + n * in_stride, c_in, h, w, kh, kw, cols.data());
      MutMap(out.data() + n * out_stride, c_out, plane).noalias() = weights * cols;
    }
  }
  Tensor result({batch, c_out, ho, wo}, std::move(out));
  if (!recording({&x, &kernel})) return result;

  Tensor xv = x.detached();
  Tensor kv = kernel.detached();
  return record_op(
      OpKind::conv2d_valid, std::move(result), {&x, &kernel},
      [=](const Vector& g, std::span<Vector* const> gi) {
        ConstMap weights(kv.data(), c_out, patch);
        // Per-sample kernel gradients are summed in sample order afterwards so
        // the result does not depend on the thread count.
        RowMatrix dk_parts = gi[1] ? RowMatrix(batch, c_out * patch) : RowMatrix();
#pragma omp parallel
        {
          RowMatrix cols(patch, plane);
          RowMatrix dcols(patch, plane);
#pragma omp for schedule(static)
          for (Index n = 0; n < batch; ++n) {
            ConstMap gn(g.data() + n * out_stride, c_out, plane);
            if (gi[1]) {
              im2col(xv.data() + n * in_stride, c_in, h, w, kh, kw, cols.data());
              MutMap(dk_parts.row(n).data(), c_out, patch).noalias() = gn * cols.transpose();
            }
            if (gi[0]) {
              dcols.noalias() = weights.transpose() * gn;
              col2im_add(dcols.data(), c_in, h, w, kh, kw, gi[0]->data() + n * in_stride);
            }
          }
        }
        if (gi[1]) {
          for (Index n = 0; n < batch; ++n) *gi[1] += dk_parts.row(n).transpose();
        }
      });
}

Tensor pad2d(const Tensor& x, Index pad) {
  require_rank("pad2d", x, 4);
  if (pad < 0) throw ValueError("pad2d: negative padding");
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index hp = h + 2 * pad, wp = w + 2 * pad;
  Vector out = Vector::Zero(planes * hp * wp);
  for (Index p = 0; p < planes; ++p) {
    for (Index r = 0; r < h; ++r) {
      out.segment(p * hp * wp + (r + pad) * wp + pad, w) = x.values().segment(p * h * w + r * w, w);
    }
  }
  Tensor result({x.dim(0), x.dim(1), hp, wp}, std::move(out));
  if (!recording({&x})) return result;
  return record_op(OpKind::pad2d, std::move(result), {&x},
                   [=](const Vector& g, std::span<Vector* const> gi) {
                     for (Index p = 0; p < planes; ++p) {
                       for (Index r = 0; r < h; ++r) {
                         gi[0]->segment(p * h * w + r * w, w) += g.segment(p * hp * wp + (r + pad) * wp + pad, w);
                       }
                     }
                   });
}

Tensor avg_pool2d(const Tensor& x) {
  require_rank("avg_pool2d", x, 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) shape_fail("avg_pool2d", "input " + shape_string(x.shape()) + " smaller than 2x2");
  Vector out(planes * ho * wo);
  const double* src = x.data();
  for (Index p = 0; p < planes; ++p) {
    const double* plane = src + p * h * w;
    for (Index r = 0; r < ho; ++r) {
      for (Index c = 0; c < wo; ++c) {
        const double* tl = plane + 2 * r * w + 2 * c;
        out[(p * ho + r) * wo + c] = 0.25 * (tl[0] + tl[1] + tl[w] + tl[w + 1]);
      }
    }
  }
  Tensor result({x.dim(0), x.dim(1), ho, wo}, std::move(out));
  if (!recording({&x})) return result;
  return record_op(OpKind::avg_pool2d, std::move(result), {&x},
                   [=](const Vector& g, std::span<Vector* const> gi) {
                     double* dst = gi[0]->data();
                     for (Index p = 0; p < planes; ++p) {
                       double* plane = dst + p * h * w;
                       for (Index r = 0; r < ho; ++r) {
                         for (Index c = 0; c < wo; ++c) {
                           const double v = 0.25 * g[(p * ho + r) * wo + c];
                           double* tl = plane + 2 * r * w + 2 * c;
                           tl[0] += v;
                           tl[1] += v;
                           tl[w] += v;
                           tl[w + 1] += v;
                         }
                       }
                     }
                   });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    shape_fail("reshape", shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Tensor result = x.reshaped(std::move(shape));
  if (!recording({&x})) return result;
  return record_op(OpKind::reshape, std::move(result), {&x},
                   [](const Vector& g, std::span<Vector* const> gi) { *gi[0] += g; });
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 1) shape_fail("flatten", "rank-0 input");
  const Index batch = x.dim(0);
  return reshape(x, {batch, batch == 0 ? 0 : x.size() / batch});
}

Tensor relu(const Tensor& x) {
  Tensor xv = x.detached();
  return unary(OpKind::relu, x, x.values().cwiseMax(0.0), [xv](const Vector& g, std::span<Vector* const> gi) {
    *gi[0] += (xv.values().array() > 0.0).select(g, 0.0);
  });
}

Tensor sum(const Tensor& x) {
  Tensor result = Tensor::scalar(x.values().sum());
  if (!recording({&x})) return result;
  return record_op(OpKind::sum, std::move(result), {&x},
                   [](const Vector& g, std::span<Vector* const> gi) { gi[0]->array() += g[0]; });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) shape_fail("mean", "empty input");
  const double n = static_cast<double>(x.size());
  Tensor result = Tensor::scalar(x.values().sum() / n);
  if (!recording({&x})) return result;
  return record_op(OpKind::mean, std::move(result), {&x},
                   [n](const Vector& g, std::span<Vector* const> gi) { gi[0]->array() += g[0] / n; });
}

Tensor row_sum(const Tensor& x) {
  require_rank("row_sum", x, 2);
  const Index rows = x.dim(0), cols = x.dim(1);
  Vector out = x.matrix().rowwise().sum();
  Tensor result({rows}, std::move(out));
  if (!recording({&x})) return result;
  return record_op(OpKind::row_sum, std::move(result), {&x},
                   [rows, cols](const Vector& g, std::span<Vector* const> gi) {
                     MutMap(gi[0]->data(), rows, cols).colwise() += g;
                   });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw ValueError("clamp: bounds must be finite with lo <= hi");
  }
  Tensor xv = x.detached();
  return unary(OpKind::clamp, x, x.values().cwiseMax(lo).cwiseMin(hi),
               [xv, lo, hi](const Vector& g, std::span<Vector* const> gi) {
                 const auto& v = xv.values().array();
                 *gi[0] += ((v > lo) && (v < hi)).select(g, 0.0);
               });
}

Tensor sign(const Tensor& x) {
  Vector out = x.values().unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
  return unary(OpKind::sign, x, std::move(out), [](const Vector&, std::span<Vector* const>) {});
}

Tensor log(const Tensor& x) {
  if ((x.values().array() <= 0.0).any()) throw ValueError("log: input must be strictly positive");
  Tensor xv = x.detached();
  return unary(OpKind::log, x, x.values().array().log(), [xv](const Vector& g, std::span<Vector* const> gi) {
    *gi[0] += g.cwiseQuotient(xv.values());
  });
}

Tensor exp(const Tensor& x) {
  Vector out = x.values().array().exp();
  Tensor ov(x.shape(), out);
  return unary(OpKind::exp, x, std::move(out), [ov](const Vector& g, std::span<Vector* const> gi) {
    *gi[0] += g.cwiseProduct(ov.values());
  });
}

Tensor sq_l2_norm(const Tensor& x) {
  Tensor result = Tensor::scalar(x.values().squaredNorm());
  if (!recording({&x})) return result;
  Tensor xv = x.detached();
  return record_op(OpKind::sq_l2_norm, std::move(result), {&x},
                   [xv](const Vector& g, std::span<Vector* const> gi) { *gi[0] += 2.0 * g[0] * xv.values(); });
}

Tensor softmax(const Tensor& z, Index axis) {
  if (z.rank() == 0) shape_fail("softmax", "rank-0 input");
  if (axis < 0) axis += z.rank();
  if (axis < 0 || axis >= z.rank()) shape_fail("softmax", "axis out of range for " + shape_string(z.shape()));
  Index outer = 1, inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= z.dim(i);
  for (Index i = axis + 1; i < z.rank(); ++i) inner *= z.dim(i);
  const Index len = z.dim(axis);

  Vector out(z.size());
  const double* src = z.data();
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      const Index base = o * len * inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < len; ++k) m = std::max(m, src[base + k * inner]);
      double s = 0.0;
      for (Index k = 0; k < len; ++k) {
        out[base + k * inner] = std::exp(src[base + k * inner] - m);
        s += out[base + k * inner];
      }
      for (Index k = 0; k < len; ++k) out[base + k * inner] /= s;
    }
  }
  Tensor pv(z.shape(), out);
  return unary(OpKind::softmax, z, std::move(out),
               [pv, outer, inner, len](const Vector& g, std::span<Vector* const> gi) {
                 const double* p = pv.data();
                 for (Index o = 0; o < outer; ++o) {
                   for (Index in = 0; in < inner; ++in) {
                     const Index base = o * len * inner + in;
                     double dot = 0.0;
                     for (Index k = 0; k < len; ++k) dot += g[base + k * inner] * p[base + k * inner];
                     for (Index k = 0; k < len; ++k) {
                       (*gi[0])[base + k * inner] += p[base + k * inner] * (g[base + k * inner] - dot);
                     }
                   }
                 }
               });
}

Tensor log_softmax(const Tensor& z) {
  const auto [rows, cols] = rows_cols("log_softmax", z);
  ConstMap zm(z.data(), rows, cols);
  RowMatrix p;
  Vector lse;
  softmax_rows(zm, p, lse);
  Vector out(z.size());
  MutMap(out.data(), rows, cols) = zm.colwise() - lse;
  return unary(OpKind::log_softmax, z, std::move(out),
               [p, rows, cols](const Vector& g, std::span<Vector* const> gi) {
                 ConstMap gm(g.data(), rows, cols);
                 MutMap(gi[0]->data(), rows, cols) += gm - (p.array().colwise() * gm.rowwise().sum().array()).matrix();
               });
}

Tensor ce_loss(const Tensor& logits, std::span<const int> labels) {
  const auto [rows, cols] = rows_cols("ce_loss", logits);
  check_labels("ce_loss", labels, rows, cols);
  ConstMap z(logits.data(), rows, cols);
  RowMatrix p;
  Vector lse;
  softmax_rows(z, p, lse);
  Vector out(rows);
  for (Index r = 0; r < rows; ++r) out[r] = lse[r] - z(r, labels[static_cast<std::size_t>(r)]);
  Tensor result(per_row_shape(logits), std::move(out));
  if (!recording({&logits})) return result;
  std::vector<int> ys(labels.begin(), labels.end());
  return record_op(OpKind::ce_loss, std::move(result), {&logits},
                   [p = std::move(p), ys = std::move(ys), rows, cols](const Vector& g, std::span<Vector* const> gi) {
                     MutMap d(gi[0]->data(), rows, cols);
                     for (Index r = 0; r < rows; ++r) {
                       d.row(r) += g[r] * p.row(r);
                       d(r, ys[static_cast<std::size_t>(r)]) -= g[r];
                     }
                   });
}

Tensor ce_loss(const Tensor& logits, int label) {
  return ce_loss(logits, std::span<const int>(&label, 1));
}

Tensor kl_loss(const Tensor& p_logits, const Tensor& q_logits) {
  require_same("kl_loss", p_logits, q_logits);
  const auto [rows, cols] = rows_cols("kl_loss", p_logits);
  ConstMap a(p_logits.data(), rows, cols);
  ConstMap b(q_logits.data(), rows, cols);
  RowMatrix p, q;
  Vector lse_p, lse_q;
  softmax_rows(a, p, lse_p);
  softmax_rows(b, q, lse_q);
  // log p - log q = (a - lse_p) - (b - lse_q)
  RowMatrix diff = (a - b).colwise() + (lse_q - lse_p);
  Vector out(rows);
  for (Index r = 0; r < rows; ++r) out[r] = std::max(0.0, p.row(r).dot(diff.row(r)));
  Tensor result(per_row_shape(p_logits), out);
  if (!recording({&p_logits, &q_logits})) return result;
  return record_op(OpKind::kl_loss, std::move(result), {&p_logits, &q_logits},
                   [p = std::move(p), q = std::move(q), diff = std::move(diff), rows, cols](
                       const Vector& g, std::span<Vector* const> gi) {
                     for (Index r = 0; r < rows; ++r) {
                       const double kl = p.row(r).dot(diff.row(r));
                       if (gi[0]) {
                         MutMap(gi[0]->data(), rows, cols).row(r) +=
                             g[r] * (p.row(r).array() * (diff.row(r).array() - kl)).matrix();
                       }
                       if (gi[1]) MutMap(gi[1]->data(), rows, cols).row(r) += g[r] * (q.row(r) - p.row(r));
                     }
                   });
}

Tensor margin_loss(const Tensor& logits, std::span<const int> labels) {
  const auto [rows, cols] = rows_cols("margin_loss", logits);
  if (cols < 2) shape_fail("margin_loss", "needs at least two classes, got " + shape_string(logits.shape()));
  check_labels("margin_loss", labels, rows, cols);
  ConstMap z(logits.data(), rows, cols);
  std::vector<int> ys(labels.begin(), labels.end());
  std::vector<Index> rival(static_cast<std::size_t>(rows));
  Vector out(rows);
  for (Index r = 0; r < rows; ++r) {
    const int y = ys[static_cast<std::size_t>(r)];
    Index best = -1;
    for (Index j = 0; j < cols; ++j) {
      if (j == y) continue;
      if (best < 0 || z(r, j) > z(r, best)) best = j;
    }
    rival[static_cast<std::size_t>(r)] = best;
    out[r] = z(r, best) - z(r, y);
  }
  Tensor result(per_row_shape(logits), std::move(out));
  if (!recording({&logits})) return result;
  return record_op(OpKind::margin_loss, std::move(result), {&logits},
                   [ys = std::move(ys), rival = std::move(rival), rows, cols](const Vector& g,
                                                                           std::span<Vector* const> gi) {
                     MutMap d(gi[0]->data(), rows, cols);
                     for (Index r = 0; r < rows; ++r) {
                       d(r, rival[static_cast<std::size_t>(r)]) += g[r];
                       d(r, ys[static_cast<std::size_t>(r)]) -= g[r];
                     }
                   });
}

Tensor gather(const Tensor& x, std::span<const int> labels) {
  require_rank("gather", x, 2);
  const Index rows = x.dim(0), cols = x.dim(1);
  check_labels("gather", labels, rows, cols);
  Vector out(rows);
  for (Index r = 0; r < rows; ++r) out[r] = x.values()[r * cols + labels[static_cast<std::size_t>(r)]];
  Tensor result({rows}, std::move(out));
  if (!recording({&x})) return result;
  std::vector<int> ys(labels.begin(), labels.end());
  return record_op(OpKind::gather, std::move(result), {&x},
                   [ys = std::move(ys), cols](const Vector& g, std::span<Vector* const> gi) {
                     for (std::size_t r = 0; r < ys.size(); ++r) {
                       (*gi[0])[static_cast<Index>(r) * cols + ys[r]] += g[static_cast<Index>(r)];
                     }
                   });
}

std::vector<int> argmax_rows(const Tensor& scores) {
  const auto [rows, cols] = rows_cols("argmax_rows", scores);
  ConstMap s(scores.data(), rows, cols);
  std::vector<int> out(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    Index best = 0;
    for (Index j = 1; j < cols; ++j) {
      if (s(r, j) > s(r, best)) best = j;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace prb
