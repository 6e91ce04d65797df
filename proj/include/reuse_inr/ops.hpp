// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "reuse_inr/tensor.hpp"

namespace reuse_inr {

/// Rectangular window of a frame at some resolution.
///
/// Spatial ops take the window their input covers and the window they must
/// produce; zero padding / edge clamping happen only at the frame border, so
/// a window computes bit-identical values to the same pixels of a full frame.
struct Region {
  Index row0 = 0;
  Index col0 = 0;
  Index rows = 0;
  Index cols = 0;
  Index frame_rows = 0;
  Index frame_cols = 0;

  static Region full(Index rows, Index cols) { return {0, 0, rows, cols, rows, cols}; }

  Index row_end() const { return row0 + rows; }
  Index col_end() const { return col0 + cols; }

  bool contains(const Region& o) const {
    return o.row0 >= row0 && o.col0 >= col0 && o.row_end() <= row_end() && o.col_end() <= col_end();
  }

  /// Grown by `margin` on every side and clipped to the frame.
  Region expanded(Index margin) const {
    Region r = *this;
    r.row0 = std::max<Index>(0, row0 - margin);
    r.col0 = std::max<Index>(0, col0 - margin);
    r.rows = std::min(frame_rows, row_end() + margin) - r.row0;
    r.cols = std::min(frame_cols, col_end() + margin) - r.col0;
    return r;
  }

  friend bool operator==(const Region&, const Region&) = default;
};

namespace detail {

inline void expect_rank(const Shape& s, std::size_t rank, const char* op, const char* arg) {
  if (s.size() != rank) {
    fail(ErrorKind::Dimension, std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) + ", got " +
                                   shape_string(s));
  }
}

inline void expect_axis(Index got, Index want, const char* op, const std::string& axis) {
  if (got != want) {
    fail(ErrorKind::Dimension, std::string(op) + ": mismatched axis " + axis + " (" + std::to_string(got) +
                                   " vs " + std::to_string(want) + ")");
  }
}

inline void expect_region(const Region& r, Index rows, Index cols, const char* op, const char* which) {
  if (r.rows != rows || r.cols != cols) {
    fail(ErrorKind::Dimension, std::string(op) + ": " + which + " region " + std::to_string(r.rows) + "x" +
                                   std::to_string(r.cols) + " does not match tensor " + std::to_string(rows) + "x" +
                                   std::to_string(cols));
  }
}

template <typename Scalar>
using RowMajorMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename Scalar>
using ConstRowMajorMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Source index and weight for one axis of align-corners=false interpolation.
struct AxisSample {
  Index lo;
  Index hi;
  double frac;
};

inline AxisSample sample_axis(Index dst, Index dst_len, Index src_len) {
  const double scale = static_cast<double>(src_len) / static_cast<double>(dst_len);
  double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  Index lo = static_cast<Index>(std::floor(src));
  if (lo > src_len - 1) lo = src_len - 1;
  const double frac = src - static_cast<double>(lo);
  // an exact hit reads a single source sample, so no neighbour is required
  const Index hi = frac == 0.0 ? lo : std::min<Index>(lo + 1, src_len - 1);
  return {lo, hi, hi == lo ? 0.0 : frac};
}

}  // namespace detail

/// out[..., o] = b[o] + sum_i x[..., i] * w[o, i]
template <typename Scalar>
Tensor<Scalar> linear(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b) {
  detail::expect_rank(w.shape(), 2, "linear", "weight");
  detail::expect_rank(b.shape(), 1, "linear", "bias");
  if (x.rank() < 1) fail(ErrorKind::Dimension, "linear: input must have rank >= 1");
  const Index cin = w.dim(1);
  const Index cout = w.dim(0);
  detail::expect_axis(x.dim(-1), cin, "linear", "-1 (input channels)");
  detail::expect_axis(b.dim(0), cout, "linear", "0 (bias vs output channels)");

  const Index rows = x.size() / cin;
  Shape out_shape = x.shape();
  out_shape.back() = cout;
  Tensor<Scalar> y(out_shape, tape.tracks(x, w, b));

  // Per-row accumulation in fixed input-channel order, so a pixel's output does
  // not depend on how many rows share the call (patch and frame decodes agree).
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Wt =
      detail::ConstRowMajorMap<Scalar>(w.data(), cout, cin).transpose();
  const Scalar* X = x.data();
  for (Index r = 0; r < rows; ++r) {
    Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> yr(y.data() + r * cout, cout);
    yr = b.values().matrix().transpose();
    for (Index i = 0; i < cin; ++i) yr += X[r * cin + i] * Wt.row(i);
  }

  if (y.requires_grad()) {
    tape.record([x, w, b, y, rows, cin, cout]() mutable {
      if (!y.has_grad()) return;
      detail::ConstRowMajorMap<Scalar> dY(y.grad().data(), rows, cout);
      if (x.requires_grad()) {
        detail::RowMajorMap<Scalar> dX(x.grad_buffer().data(), rows, cin);
        detail::ConstRowMajorMap<Scalar> Wm(w.data(), cout, cin);
        dX.noalias() += dY * Wm;
      }
      if (w.requires_grad()) {
        detail::RowMajorMap<Scalar> dW(w.grad_buffer().data(), cout, cin);
        detail::ConstRowMajorMap<Scalar> Xm(x.data(), rows, cin);
        dW.noalias() += dY.transpose() * Xm;
      }
      if (b.requires_grad()) b.grad_buffer().matrix() += dY.colwise().sum().transpose();
    });
  }
  return y;
}

/// Per-channel KxK cross-correlation with zero padding at the frame border.
/// `x` covers `in`, the result covers `out`; `out` grown by (K-1)/2 must lie in `in`.
template <typename Scalar>
Tensor<Scalar> depthwise_conv2d(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& k,
                                const Tensor<Scalar>& b, const Region& in, const Region& out) {
  detail::expect_rank(x.shape(), 3, "depthwise_conv2d", "input");
  detail::expect_rank(k.shape(), 3, "depthwise_conv2d", "kernel");
  detail::expect_rank(b.shape(), 1, "depthwise_conv2d", "bias");
  const Index ksize = k.dim(0);
  if (ksize % 2 == 0) fail(ErrorKind::Config, "depthwise_conv2d: kernel size must be odd, got " + std::to_string(ksize));
  detail::expect_axis(k.dim(1), ksize, "depthwise_conv2d", "1 (kernel width)");
  const Index C = x.dim(2);
  detail::expect_axis(k.dim(2), C, "depthwise_conv2d", "2 (channels)");
  detail::expect_axis(b.dim(0), C, "depthwise_conv2d", "0 (bias channels)");
  detail::expect_region(in, x.dim(0), x.dim(1), "depthwise_conv2d", "input");
  const Index r = ksize / 2;
  if (!in.contains(out.expanded(r))) fail(ErrorKind::Dimension, "depthwise_conv2d: output window needs pixels outside the input window");

  Tensor<Scalar> y(Shape{out.rows, out.cols, C}, tape.tracks(x, k, b));
  const Scalar* X = x.data();
  const Scalar* K = k.data();
  Scalar* Y = y.data();
  const Index in_cols = in.cols;
  for (Index oy = 0; oy < out.rows; ++oy) {
    const Index gy = out.row0 + oy;
    for (Index ox = 0; ox < out.cols; ++ox) {
      const Index gx = out.col0 + ox;
      Scalar* yp = Y + (oy * out.cols + ox) * C;
      for (Index c = 0; c < C; ++c) yp[c] = b.values()[c];
      for (Index ky = 0; ky < ksize; ++ky) {
        const Index sy = gy + ky - r;
        if (sy < 0 || sy >= in.frame_rows) continue;
        for (Index kx = 0; kx < ksize; ++kx) {
          const Index sx = gx + kx - r;
          if (sx < 0 || sx >= in.frame_cols) continue;
          const Scalar* xp = X + ((sy - in.row0) * in_cols + (sx - in.col0)) * C;
          const Scalar* kp = K + (ky * ksize + kx) * C;
          for (Index c = 0; c < C; ++c) yp[c] += xp[c] * kp[c];
        }
      }
    }
  }

  if (y.requires_grad()) {
    tape.record([x, k, b, y, in, out, ksize, r, C]() mutable {
      if (!y.has_grad()) return;
      const Scalar* dY = y.grad().data();
      Scalar* dX = x.requires_grad() ? x.grad_buffer().data() : nullptr;
      Scalar* dK = k.requires_grad() ? k.grad_buffer().data() : nullptr;
      const Scalar* X = x.data();
      const Scalar* K = k.data();
      for (Index oy = 0; oy < out.rows; ++oy) {
        const Index gy = out.row0 + oy;
        for (Index ox = 0; ox < out.cols; ++ox) {
          const Index gx = out.col0 + ox;
          const Scalar* gp = dY + (oy * out.cols + ox) * C;
          for (Index ky = 0; ky < ksize; ++ky) {
            const Index sy = gy + ky - r;
            if (sy < 0 || sy >= in.frame_rows) continue;
            for (Index kx = 0; kx < ksize; ++kx) {
              const Index sx = gx + kx - r;
              if (sx < 0 || sx >= in.frame_cols) continue;
              const Index xo = ((sy - in.row0) * in.cols + (sx - in.col0)) * C;
              const Index ko = (ky * ksize + kx) * C;
              if (dX) for (Index c = 0; c < C; ++c) dX[xo + c] += gp[c] * K[ko + c];
              if (dK) for (Index c = 0; c < C; ++c) dK[ko + c] += gp[c] * X[xo + c];
            }
          }
        }
      }
      if (b.requires_grad()) {
        auto& db = b.grad_buffer();
        for (Index p = 0; p < out.rows * out.cols; ++p)
          for (Index c = 0; c < C; ++c) db[c] += dY[p * C + c];
      }
    });
  }
  return y;
}

/// Same-size depthwise convolution over a whole frame.
template <typename Scalar>
Tensor<Scalar> depthwise_conv2d(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& k,
                                const Tensor<Scalar>& b) {
  detail::expect_rank(x.shape(), 3, "depthwise_conv2d", "input");
  const Region full = Region::full(x.dim(0), x.dim(1));
  return depthwise_conv2d(tape, x, k, b, full, full);
}

/// Dense KxK convolution, weights [K, K, Cin, Cout], zero padding at the frame border.
template <typename Scalar>
Tensor<Scalar> conv2d(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b,
                      const Region& in, const Region& out) {
  detail::expect_rank(x.shape(), 3, "conv2d", "input");
  detail::expect_rank(w.shape(), 4, "conv2d", "weight");
  detail::expect_rank(b.shape(), 1, "conv2d", "bias");
  const Index ksize = w.dim(0);
  if (ksize % 2 == 0) fail(ErrorKind::Config, "conv2d: kernel size must be odd, got " + std::to_string(ksize));
  detail::expect_axis(w.dim(1), ksize, "conv2d", "1 (kernel width)");
  const Index cin = x.dim(2);
  detail::expect_axis(w.dim(2), cin, "conv2d", "2 (input channels)");
  const Index cout = w.dim(3);
  detail::expect_axis(b.dim(0), cout, "conv2d", "0 (bias channels)");
  detail::expect_region(in, x.dim(0), x.dim(1), "conv2d", "input");
  const Index r = ksize / 2;
  if (!in.contains(out.expanded(r))) fail(ErrorKind::Dimension, "conv2d: output window needs pixels outside the input window");

  Tensor<Scalar> y(Shape{out.rows, out.cols, cout}, tape.tracks(x, w, b));
  const Scalar* X = x.data();
  const Scalar* Wt = w.data();
  Scalar* Y = y.data();
  for (Index oy = 0; oy < out.rows; ++oy) {
    for (Index ox = 0; ox < out.cols; ++ox) {
      Scalar* yp = Y + (oy * out.cols + ox) * cout;
      for (Index o = 0; o < cout; ++o) yp[o] = b.values()[o];
      for (Index ky = 0; ky < ksize; ++ky) {
        const Index sy = out.row0 + oy + ky - r;
        if (sy < 0 || sy >= in.frame_rows) continue;
        for (Index kx = 0; kx < ksize; ++kx) {
          const Index sx = out.col0 + ox + kx - r;
          if (sx < 0 || sx >= in.frame_cols) continue;
          const Scalar* xp = X + ((sy - in.row0) * in.cols + (sx - in.col0)) * cin;
          const Scalar* wp = Wt + (ky * ksize + kx) * cin * cout;
          for (Index i = 0; i < cin; ++i)
            for (Index o = 0; o < cout; ++o) yp[o] += xp[i] * wp[i * cout + o];
        }
      }
    }
  }

  if (y.requires_grad()) {
    tape.record([x, w, b, y, in, out, ksize, r, cin, cout]() mutable {
      if (!y.has_grad()) return;
      const Scalar* dY = y.grad().data();
      Scalar* dX = x.requires_grad() ? x.grad_buffer().data() : nullptr;
      Scalar* dW = w.requires_grad() ? w.grad_buffer().data() : nullptr;
      const Scalar* X = x.data();
      const Scalar* Wt = w.data();
      for (Index oy = 0; oy < out.rows; ++oy) {
        for (Index ox = 0; ox < out.cols; ++ox) {
          const Scalar* gp = dY + (oy * out.cols + ox) * cout;
          for (Index ky = 0; ky < ksize; ++ky) {
            const Index sy = out.row0 + oy + ky - r;
            if (sy < 0 || sy >= in.frame_rows) continue;
            for (Index kx = 0; kx < ksize; ++kx) {
              const Index sx = out.col0 + ox + kx - r;
              if (sx < 0 || sx >= in.frame_cols) continue;
              const Index xo = ((sy - in.row0) * in.cols + (sx - in.col0)) * cin;
              const Index wo = (ky * ksize + kx) * cin * cout;
              for (Index i = 0; i < cin; ++i) {
                for (Index o = 0; o < cout; ++o) {
                  if (dX) dX[xo + i] += gp[o] * Wt[wo + i * cout + o];
                  if (dW) dW[wo + i * cout + o] += gp[o] * X[xo + i];
                }
              }
            }
          }
        }
      }
      if (b.requires_grad()) {
        auto& db = b.grad_buffer();
        for (Index p = 0; p < out.rows * out.cols; ++p)
          for (Index o = 0; o < cout; ++o) db[o] += dY[p * cout + o];
      }
    });
  }
  return y;
}

/// (x - mean) / sqrt(var + eps) * gamma + beta over the last axis, biased variance.
template <typename Scalar>
Tensor<Scalar> layer_norm(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                          const Tensor<Scalar>& beta, Scalar eps = Scalar(1e-6)) {
  detail::expect_rank(gamma.shape(), 1, "layer_norm", "gamma");
  detail::expect_rank(beta.shape(), 1, "layer_norm", "beta");
  if (x.rank() < 1) fail(ErrorKind::Dimension, "layer_norm: input must have rank >= 1");
  const Index C = x.dim(-1);
  detail::expect_axis(gamma.dim(0), C, "layer_norm", "-1 (gamma channels)");
  detail::expect_axis(beta.dim(0), C, "layer_norm", "-1 (beta channels)");
  if (!(eps > Scalar(0))) fail(ErrorKind::Config, "layer_norm: eps must be positive");

  const Index rows = x.size() / C;
  Tensor<Scalar> y(x.shape(), tape.tracks(x, gamma, beta));
  // normalized values and inverse std are kept for the backward rule
  auto xhat = std::make_shared<typename Tensor<Scalar>::Array>(x.size());
  auto inv_std = std::make_shared<typename Tensor<Scalar>::Array>(rows);
  const Scalar* X = x.data();
  Scalar* Y = y.data();
  const Scalar* G = gamma.data();
  const Scalar* B = beta.data();
  for (Index r = 0; r < rows; ++r) {
    const Scalar* xp = X + r * C;
    Scalar mean = 0;
    for (Index c = 0; c < C; ++c) mean += xp[c];
    mean /= Scalar(C);
    Scalar var = 0;
    for (Index c = 0; c < C; ++c) var += (xp[c] - mean) * (xp[c] - mean);
    var /= Scalar(C);
    const Scalar inv = Scalar(1) / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (Index c = 0; c < C; ++c) {
      const Scalar h = (xp[c] - mean) * inv;
      (*xhat)[r * C + c] = h;
      Y[r * C + c] = h * G[c] + B[c];
    }
  }

  if (y.requires_grad()) {
    tape.record([x, gamma, beta, y, xhat, inv_std, rows, C]() mutable {
      if (!y.has_grad()) return;
      const Scalar* dY = y.grad().data();
      const Scalar* G = gamma.data();
      const Scalar* H = xhat->data();
      if (x.requires_grad()) {
        Scalar* dX = x.grad_buffer().data();
        for (Index r = 0; r < rows; ++r) {
          Scalar sum_d = 0;
          Scalar sum_dh = 0;
          for (Index c = 0; c < C; ++c) {
            const Scalar d = dY[r * C + c] * G[c];
            sum_d += d;
            sum_dh += d * H[r * C + c];
          }
          const Scalar inv = (*inv_std)[r];
          for (Index c = 0; c < C; ++c) {
            const Scalar d = dY[r * C + c] * G[c];
            dX[r * C + c] += inv * (d - sum_d / Scalar(C) - H[r * C + c] * sum_dh / Scalar(C));
          }
        }
      }
      if (gamma.requires_grad()) {
        auto& dg = gamma.grad_buffer();
        for (Index r = 0; r < rows; ++r)
          for (Index c = 0; c < C; ++c) dg[c] += dY[r * C + c] * H[r * C + c];
      }
      if (beta.requires_grad()) {
        auto& db = beta.grad_buffer();
        for (Index r = 0; r < rows; ++r)
          for (Index c = 0; c < C; ++c) db[c] += dY[r * C + c];
      }
    });
  }
  return y;
}

/// GeLU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename Scalar>
Tensor<Scalar> gelu(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  constexpr double kCubic = 0.044715;
  const Scalar a = Scalar(kSqrt2OverPi);
  const Scalar c3 = Scalar(kCubic);
  Tensor<Scalar> y(x.shape(), tape.tracks(x));
  const auto& X = x.values();
  auto& Y = y.values();
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar v = X[i];
    Y[i] = Scalar(0.5) * v * (Scalar(1) + std::tanh(a * (v + c3 * v * v * v)));
  }
  if (y.requires_grad()) {
    tape.record([x, y, a, c3]() mutable {
      if (!y.has_grad()) return;
      const auto& X = x.values();
      const auto& dY = y.grad();
      auto& dX = x.grad_buffer();
      for (Index i = 0; i < x.size(); ++i) {
        const Scalar v = X[i];
        const Scalar t = std::tanh(a * (v + c3 * v * v * v));
        const Scalar dt = (Scalar(1) - t * t) * a * (Scalar(1) + Scalar(3) * c3 * v * v);
        dX[i] += dY[i] * (Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * v * dt);
      }
    });
  }
  return y;
}

/// Bilinear upsampling by an integer factor, align-corners=false, edge clamped.
/// `in` is a window of a frame; `out` is a window of the frame scaled by `scale`.
template <typename Scalar>
Tensor<Scalar> bilinear_upsample(Tape<Scalar>& tape, const Tensor<Scalar>& x, Index scale, const Region& in,
                                 const Region& out) {
  detail::expect_rank(x.shape(), 3, "bilinear_upsample", "input");
  if (scale < 1) fail(ErrorKind::Config, "bilinear_upsample: scale must be >= 1, got " + std::to_string(scale));
  detail::expect_region(in, x.dim(0), x.dim(1), "bilinear_upsample", "input");
  if (out.frame_rows != in.frame_rows * scale || out.frame_cols != in.frame_cols * scale)
    fail(ErrorKind::Dimension, "bilinear_upsample: output frame is not the scaled input frame");
  const Index C = x.dim(2);

  std::vector<detail::AxisSample> ys(static_cast<std::size_t>(out.rows));
  std::vector<detail::AxisSample> xs(static_cast<std::size_t>(out.cols));
  for (Index i = 0; i < out.rows; ++i) {
    auto s = detail::sample_axis(out.row0 + i, out.frame_rows, in.frame_rows);
    if (s.lo < in.row0 || s.hi >= in.row_end()) fail(ErrorKind::Dimension, "bilinear_upsample: output window needs rows outside the input window");
    s.lo -= in.row0;
    s.hi -= in.row0;
    ys[static_cast<std::size_t>(i)] = s;
  }
  for (Index j = 0; j < out.cols; ++j) {
    auto s = detail::sample_axis(out.col0 + j, out.frame_cols, in.frame_cols);
    if (s.lo < in.col0 || s.hi >= in.col_end()) fail(ErrorKind::Dimension, "bilinear_upsample: output window needs columns outside the input window");
    s.lo -= in.col0;
    s.hi -= in.col0;
    xs[static_cast<std::size_t>(j)] = s;
  }

  Tensor<Scalar> y(Shape{out.rows, out.cols, C}, tape.tracks(x));
  const Scalar* X = x.data();
  Scalar* Y = y.data();
  for (Index i = 0; i < out.rows; ++i) {
    const auto& sy = ys[static_cast<std::size_t>(i)];
    const Scalar wy1 = Scalar(sy.frac);
    const Scalar wy0 = Scalar(1) - wy1;
    for (Index j = 0; j < out.cols; ++j) {
      const auto& sx = xs[static_cast<std::size_t>(j)];
      const Scalar wx1 = Scalar(sx.frac);
      const Scalar wx0 = Scalar(1) - wx1;
      const Scalar* p00 = X + (sy.lo * in.cols + sx.lo) * C;
      const Scalar* p01 = X + (sy.lo * in.cols + sx.hi) * C;
      const Scalar* p10 = X + (sy.hi * in.cols + sx.lo) * C;
      const Scalar* p11 = X + (sy.hi * in.cols + sx.hi) * C;
      Scalar* yp = Y + (i * out.cols + j) * C;
      for (Index c = 0; c < C; ++c)
        yp[c] = wy0 * (wx0 * p00[c] + wx1 * p01[c]) + wy1 * (wx0 * p10[c] + wx1 * p11[c]);
    }
  }

  if (y.requires_grad()) {
    tape.record([x, y, ys, xs, in, out, C]() mutable {
      if (!y.has_grad()) return;
      const Scalar* dY = y.grad().data();
      Scalar* dX = x.grad_buffer().data();
      for (Index i = 0; i < out.rows; ++i) {
        const auto& sy = ys[static_cast<std::size_t>(i)];
        const Scalar wy1 = Scalar(sy.frac);
        const Scalar wy0 = Scalar(1) - wy1;
        for (Index j = 0; j < out.cols; ++j) {
          const auto& sx = xs[static_cast<std::size_t>(j)];
          const Scalar wx1 = Scalar(sx.frac);
          const Scalar wx0 = Scalar(1) - wx1;
          const Scalar* gp = dY + (i * out.cols + j) * C;
          Scalar* d00 = dX + (sy.lo * in.cols + sx.lo) * C;
          Scalar* d01 = dX + (sy.lo * in.cols + sx.hi) * C;
          Scalar* d10 = dX + (sy.hi * in.cols + sx.lo) * C;
          Scalar* d11 = dX + (sy.hi * in.cols + sx.hi) * C;
          for (Index c = 0; c < C; ++c) {
            d00[c] += wy0 * wx0 * gp[c];
            d01[c] += wy0 * wx1 * gp[c];
            d10[c] += wy1 * wx0 * gp[c];
            d11[c] += wy1 * wx1 * gp[c];
          }
        }
      }
    });
  }
  return y;
}

/// Whole-frame bilinear upsampling.
template <typename Scalar>
Tensor<Scalar> bilinear_upsample(Tape<Scalar>& tape, const Tensor<Scalar>& x, Index scale) {
  detail::expect_rank(x.shape(), 3, "bilinear_upsample", "input");
  if (scale < 1) fail(ErrorKind::Config, "bilinear_upsample: scale must be >= 1, got " + std::to_string(scale));
  const Region in = Region::full(x.dim(0), x.dim(1));
  return bilinear_upsample(tape, x, scale, in, Region::full(x.dim(0) * scale, x.dim(1) * scale));
}

/// Trilinear read of a learned grid [Tg, Hg, Wg, C] at frame `t` of `frames`,
/// over the pixels of `at` (a window of a frame_rows x frame_cols lattice).
/// Grid coordinates follow the align-corners=false convention on every axis.
template <typename Scalar>
Tensor<Scalar> sample_grid(Tape<Scalar>& tape, const Tensor<Scalar>& grid, Index t, Index frames, const Region& at) {
  detail::expect_rank(grid.shape(), 4, "sample_grid", "grid");
  if (t < 0 || t >= frames) fail(ErrorKind::Index, "sample_grid: frame " + std::to_string(t) + " outside [0, " + std::to_string(frames) + ")");
  if (at.row0 < 0 || at.col0 < 0 || at.row_end() > at.frame_rows || at.col_end() > at.frame_cols)
    fail(ErrorKind::Index, "sample_grid: window lies outside the frame");
  const Index Tg = grid.dim(0), Hg = grid.dim(1), Wg = grid.dim(2), C = grid.dim(3);
  const auto st = detail::sample_axis(t, frames, Tg);
  std::vector<detail::AxisSample> ys(static_cast<std::size_t>(at.rows)), xs(static_cast<std::size_t>(at.cols));
  for (Index i = 0; i < at.rows; ++i) ys[static_cast<std::size_t>(i)] = detail::sample_axis(at.row0 + i, at.frame_rows, Hg);
  for (Index j = 0; j < at.cols; ++j) xs[static_cast<std::size_t>(j)] = detail::sample_axis(at.col0 + j, at.frame_cols, Wg);

  // corner offsets and weights, fixed order t, y, x
  auto corners = [st, ys, xs, Hg, Wg, C](Index i, Index j, Index* off, Scalar* wt) {
    const auto& sy = ys[static_cast<std::size_t>(i)];
    const auto& sx = xs[static_cast<std::size_t>(j)];
    const Index tt[2] = {st.lo, st.hi};
    const Index yy[2] = {sy.lo, sy.hi};
    const Index xx[2] = {sx.lo, sx.hi};
    const Scalar wtt[2] = {Scalar(1) - Scalar(st.frac), Scalar(st.frac)};
    const Scalar wyy[2] = {Scalar(1) - Scalar(sy.frac), Scalar(sy.frac)};
    const Scalar wxx[2] = {Scalar(1) - Scalar(sx.frac), Scalar(sx.frac)};
    int n = 0;
    for (int a = 0; a < 2; ++a)
      for (int bb = 0; bb < 2; ++bb)
        for (int c = 0; c < 2; ++c, ++n) {
          off[n] = ((tt[a] * Hg + yy[bb]) * Wg + xx[c]) * C;
          wt[n] = wtt[a] * wyy[bb] * wxx[c];
        }
  };

  Tensor<Scalar> y(Shape{at.rows, at.cols, C}, tape.tracks(grid));
  const Scalar* G = grid.data();
  Scalar* Y = y.data();
  for (Index i = 0; i < at.rows; ++i) {
    for (Index j = 0; j < at.cols; ++j) {
      Index off[8];
      Scalar wt[8];
      corners(i, j, off, wt);
      Scalar* yp = Y + (i * at.cols + j) * C;
      for (Index c = 0; c < C; ++c) {
        Scalar acc = 0;
        for (int n = 0; n < 8; ++n) acc += wt[n] * G[off[n] + c];
        yp[c] = acc;
      }
    }
  }

  if (y.requires_grad()) {
    tape.record([grid, y, at, C, corners]() mutable {
      if (!y.has_grad()) return;
      const Scalar* dY = y.grad().data();
      Scalar* dG = grid.grad_buffer().data();
      for (Index i = 0; i < at.rows; ++i) {
        for (Index j = 0; j < at.cols; ++j) {
          Index off[8];
          Scalar wt[8];
          corners(i, j, off, wt);
          const Scalar* gp = dY + (i * at.cols + j) * C;
          for (int n = 0; n < 8; ++n)
            for (Index c = 0; c < C; ++c) dG[off[n] + c] += wt[n] * gp[c];
        }
      }
    });
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> add(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) fail(ErrorKind::Dimension, "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor<Scalar> y(a.shape(), tape.tracks(a, b));
  y.values() = a.values() + b.values();
  if (y.requires_grad()) {
    tape.record([a, b, y]() mutable {
      if (!y.has_grad()) return;
      if (a.requires_grad()) a.grad_buffer() += y.grad();
      if (b.requires_grad()) b.grad_buffer() += y.grad();
    });
  }
  return y;
}

/// x + offset where the offset is a constant: the gradient passes straight through to x.
template <typename Scalar>
Tensor<Scalar> add_constant(Tape<Scalar>& tape, const Tensor<Scalar>& x, const typename Tensor<Scalar>::Array& offset) {
  if (offset.size() != x.size()) fail(ErrorKind::Dimension, "add_constant: offset size does not match tensor");
  Tensor<Scalar> y(x.shape(), tape.tracks(x));
  y.values() = x.values() + offset;
  if (y.requires_grad()) {
    tape.record([x, y]() mutable {
      if (!y.has_grad()) return;
      x.grad_buffer() += y.grad();
    });
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> sum(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  Tensor<Scalar> y = Tensor<Scalar>::scalar(x.values().sum(), tape.tracks(x));
  if (y.requires_grad()) {
    tape.record([x, y]() mutable {
      if (!y.has_grad()) return;
      x.grad_buffer() += y.grad()[0];
    });
  }
  return y;
}

/// Mean of squared differences over every element.
template <typename Scalar>
Tensor<Scalar> mse_loss(Tape<Scalar>& tape, const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.shape() != target.shape())
    fail(ErrorKind::Dimension, "mse_loss: shape mismatch " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  const Scalar n = Scalar(pred.size());
  Tensor<Scalar> y = Tensor<Scalar>::scalar((pred.values() - target.values()).square().sum() / n, tape.tracks(pred, target));
  if (y.requires_grad()) {
    tape.record([pred, target, y, n]() mutable {
      if (!y.has_grad()) return;
      const Scalar g = y.grad()[0] * Scalar(2) / n;
      if (pred.requires_grad()) pred.grad_buffer() += g * (pred.values() - target.values());
      if (target.requires_grad()) target.grad_buffer() -= g * (pred.values() - target.values());
    });
  }
  return y;
}

/// Concatenate two tensors of equal rank along `axis` (rank 1 or 2).
template <typename Scalar>
Tensor<Scalar> concat(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b, Index axis) {
  if (a.rank() != b.rank() || a.rank() < 1 || a.rank() > 2) fail(ErrorKind::Dimension, "concat: needs two tensors of equal rank 1 or 2");
  if (axis < 0 || axis >= a.rank()) fail(ErrorKind::Dimension, "concat: axis out of range");
  if (a.rank() == 2 && a.dim(1 - axis) != b.dim(1 - axis))
    fail(ErrorKind::Dimension, "concat: mismatched axis " + std::to_string(1 - axis));

  Shape shape = a.shape();
  shape[static_cast<std::size_t>(axis)] += b.dim(axis);
  Tensor<Scalar> y(shape, tape.tracks(a, b));
  const Index rows_a = a.rank() == 2 ? a.dim(0) : 1;
  const Index cols_a = a.rank() == 2 ? a.dim(1) : a.dim(0);
  const Index cols_b = b.rank() == 2 ? b.dim(1) : b.dim(0);
  if (axis == 0) {
    y.values().head(a.size()) = a.values();
    y.values().tail(b.size()) = b.values();
  } else {
    detail::RowMajorMap<Scalar> Y(y.data(), rows_a, cols_a + cols_b);
    Y.leftCols(cols_a) = detail::ConstRowMajorMap<Scalar>(a.data(), rows_a, cols_a);
    Y.rightCols(cols_b) = detail::ConstRowMajorMap<Scalar>(b.data(), rows_a, cols_b);
  }
  if (y.requires_grad()) {
    tape.record([a, b, y, axis, rows_a, cols_a, cols_b]() mutable {
      if (!y.has_grad()) return;
      if (axis == 0) {
        if (a.requires_grad()) a.grad_buffer() += y.grad().head(a.size());
        if (b.requires_grad()) b.grad_buffer() += y.grad().tail(b.size());
      } else {
        detail::ConstRowMajorMap<Scalar> dY(y.grad().data(), rows_a, cols_a + cols_b);
        if (a.requires_grad()) detail::RowMajorMap<Scalar>(a.grad_buffer().data(), rows_a, cols_a) += dY.leftCols(cols_a);
        if (b.requires_grad()) detail::RowMajorMap<Scalar>(b.grad_buffer().data(), rows_a, cols_b) += dY.rightCols(cols_b);
      }
    });
  }
  return y;
}

/// Crop a [rows, cols, C] window of `x` (which covers `in`) down to `out`.
template <typename Scalar>
Tensor<Scalar> crop(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Region& in, const Region& out) {
  detail::expect_rank(x.shape(), 3, "crop", "input");
  detail::expect_region(in, x.dim(0), x.dim(1), "crop", "input");
  if (!in.contains(out)) fail(ErrorKind::Dimension, "crop: output window not inside input window");
  if (in == out) return x;
  const Index C = x.dim(2);
  Tensor<Scalar> y(Shape{out.rows, out.cols, C}, tape.tracks(x));
  const Index dr = out.row0 - in.row0, dc = out.col0 - in.col0;
  for (Index i = 0; i < out.rows; ++i)
    y.values().segment(i * out.cols * C, out.cols * C) = x.values().segment(((i + dr) * in.cols + dc) * C, out.cols * C);
  if (y.requires_grad()) {
    tape.record([x, y, in, out, dr, dc, C]() mutable {
      if (!y.has_grad()) return;
      auto& dX = x.grad_buffer();
      for (Index i = 0; i < out.rows; ++i)
        dX.segment(((i + dr) * in.cols + dc) * C, out.cols * C) += y.grad().segment(i * out.cols * C, out.cols * C);
    });
  }
  return y;
}

}  // namespace reuse_inr
