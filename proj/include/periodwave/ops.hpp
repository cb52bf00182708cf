#pragma once

#include <vector>

#include "periodwave/autograd.hpp"

namespace periodwave {

// Geometry of a 2-D convolution over (height, width). Weights are stored as a
// Cout x (kh * kw * Cin) matrix, tap-major: column = (ky * kw + kx) * Cin + ci.
struct Conv2dGeom {
  Index kh = 1, kw = 1;
  Index sh = 1, sw = 1;
  Index dh = 1, dw = 1;
  Index ph = 0, pw = 0;

  Index out_h(Index h) const { return (h + 2 * ph - dh * (kh - 1) - 1) / sh + 1; }
  Index out_w(Index w) const { return (w + 2 * pw - dw * (kw - 1) - 1) / sw + 1; }
};

// y = W x + b applied at every position. `b` may be undefined.
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, const Conv2dGeom& g);

// Per-channel convolution along the height axis of width-1 segments; the
// kernel size is w.cols(), output height h + 2 * pad - k + 1.
template <typename Scalar>
Var<Scalar> depthwise_conv_h(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, Index pad);

// Normalizes every position over its channels.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta, Scalar eps);

// Global response normalization: per segment, channel norms over positions are
// divided by their channel mean, then y = gamma * (x * n) + beta + x.
template <typename Scalar>
Var<Scalar> grn(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta);

template <typename Scalar>
Var<Scalar> silu(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);

// alpha * a + beta * b
template <typename Scalar>
Var<Scalar> axpby(Scalar alpha, const Var<Scalar>& a, Scalar beta, const Var<Scalar>& b);

// Adds column s of `c` (C x nseg) to every position of segment s of `x`.
template <typename Scalar>
Var<Scalar> add_segment_bias(const Var<Scalar>& x, const Var<Scalar>& c);

template <typename Scalar>
Var<Scalar> scale_segments(const Var<Scalar>& x, const std::vector<Scalar>& factors);

// out.col(j) = x.col(src[j]), or zero when src[j] < 0. Padding, cropping,
// broadcasting and embedding lookups are all expressed through this.
template <typename Scalar>
Var<Scalar> gather(const Var<Scalar>& x, const std::vector<Index>& src, Layout out_layout);

template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& xs);

template <typename Scalar>
Var<Scalar> concat_positions(const std::vector<Var<Scalar>>& xs);

// Reinterprets (C * r) x P as C x (P * r): position p of the input becomes
// positions p * r .. p * r + r - 1. Width-1 segments only.
template <typename Scalar>
Var<Scalar> unfold_channels(const Var<Scalar>& x, Index r);

// Mean squared error against a constant target; returns a 1x1 Var.
template <typename Scalar>
Var<Scalar> mse(const Var<Scalar>& pred, const Mat<Scalar>& target);

}  // namespace periodwave
