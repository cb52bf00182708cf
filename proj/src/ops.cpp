#include "periodwave/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace periodwave {

namespace {

template <typename Scalar>
void accumulate(const std::shared_ptr<Node<Scalar>>& p, const Mat<Scalar>& g) {
  if (p->requires_grad) p->grad_ref() += g;
}

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Layout conv_layout(const Layout& in, const Conv2dGeom& g) {
  std::vector<std::pair<Index, Index>> ext;
  ext.reserve(in.size());
  for (const auto& s : in) {
    const Index oh = g.out_h(s.h);
    const Index ow = g.out_w(s.w);
    if (oh <= 0 || ow <= 0) {
      throw std::invalid_argument("conv2d: segment " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                  " too small for kernel");
    }
    ext.emplace_back(oh, ow);
  }
  return make_layout(ext);
}

template <typename Scalar>
Mat<Scalar> im2col(const Tensor<Scalar>& x, const Conv2dGeom& g, const Layout& out_layout) {
  const Index cin = x.channels();
  Mat<Scalar> cols = Mat<Scalar>::Zero(cin * g.kh * g.kw, layout_positions(out_layout));
  const Index rows = cols.rows();
  for (std::size_t s = 0; s < out_layout.size(); ++s) {
    const Segment& in = x.segs[s];
    const Segment& out = out_layout[s];
    for (Index oy = 0; oy < out.h; ++oy) {
      for (Index ox = 0; ox < out.w; ++ox) {
        Scalar* dst = cols.data() + (out.offset + oy * out.w + ox) * rows;
        for (Index ky = 0; ky < g.kh; ++ky) {
          const Index iy = oy * g.sh + ky * g.dh - g.ph;
          if (iy < 0 || iy >= in.h) continue;
          for (Index kx = 0; kx < g.kw; ++kx) {
            const Index ix = ox * g.sw + kx * g.dw - g.pw;
            if (ix < 0 || ix >= in.w) continue;
            const Scalar* src = x.data.data() + (in.offset + iy * in.w + ix) * cin;
            std::memcpy(dst + (ky * g.kw + kx) * cin, src, sizeof(Scalar) * cin);
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im_add(const Mat<Scalar>& cols, const Conv2dGeom& g, const Layout& in_layout, const Layout& out_layout,
                Mat<Scalar>& dx) {
  const Index cin = dx.rows();
  const Index rows = cols.rows();
  for (std::size_t s = 0; s < out_layout.size(); ++s) {
    const Segment& in = in_layout[s];
    const Segment& out = out_layout[s];
    for (Index oy = 0; oy < out.h; ++oy) {
      for (Index ox = 0; ox < out.w; ++ox) {
        const Scalar* src = cols.data() + (out.offset + oy * out.w + ox) * rows;
        for (Index ky = 0; ky < g.kh; ++ky) {
          const Index iy = oy * g.sh + ky * g.dh - g.ph;
          if (iy < 0 || iy >= in.h) continue;
          for (Index kx = 0; kx < g.kw; ++kx) {
            const Index ix = ox * g.sw + kx * g.dw - g.pw;
            if (ix < 0 || ix >= in.w) continue;
            Scalar* dst = dx.data() + (in.offset + iy * in.w + ix) * cin;
            const Scalar* tap = src + (ky * g.kw + kx) * cin;
            for (Index c = 0; c < cin; ++c) dst[c] += tap[c];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b) {
  check(w.data().cols() == x.data().rows(), "linear: weight/input channel mismatch");
  Mat<Scalar> y(w.data().rows(), x.data().cols());
  y.noalias() = w.data() * x.data();
  if (b.defined()) y.colwise() += b.data().col(0);
  std::vector<Var<Scalar>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), x.layout()), parents, [](Node<Scalar>& n) {
    const auto& xn = n.parents[0];
    const auto& wn = n.parents[1];
    if (xn->requires_grad) xn->grad_ref().noalias() += wn->value.data.transpose() * n.grad;
    if (wn->requires_grad) wn->grad_ref().noalias() += n.grad * xn->value.data.transpose();
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) n.parents[2]->grad_ref() += n.grad.rowwise().sum();
  });
}

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, const Conv2dGeom& g) {
  const Index cin = x.data().rows();
  check(w.data().cols() == cin * g.kh * g.kw, "conv2d: weight shape does not match kernel and input channels");
  Layout out_layout = conv_layout(x.layout(), g);
  Mat<Scalar> y(w.data().rows(), layout_positions(out_layout));
  {
    const Mat<Scalar> cols = im2col(x.value(), g, out_layout);
    y.noalias() = w.data() * cols;
  }
  if (b.defined()) y.colwise() += b.data().col(0);
  std::vector<Var<Scalar>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  Layout out_copy = out_layout;
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), std::move(out_layout)), parents,
                             [g, out_copy](Node<Scalar>& n) {
                               const auto& xn = n.parents[0];
                               const auto& wn = n.parents[1];
                               if (wn->requires_grad) {
                                 const Mat<Scalar> cols = im2col(xn->value, g, out_copy);
                                 wn->grad_ref().noalias() += n.grad * cols.transpose();
                               }
                               if (xn->requires_grad) {
                                 Mat<Scalar> dcols(wn->value.data.cols(), n.grad.cols());
                                 dcols.noalias() = wn->value.data.transpose() * n.grad;
                                 col2im_add(dcols, g, xn->value.segs, out_copy, xn->grad_ref());
                               }
                               if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
                                 n.parents[2]->grad_ref() += n.grad.rowwise().sum();
                               }
                             });
}

template <typename Scalar>
Var<Scalar> depthwise_conv_h(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, Index pad) {
  const Index c = x.data().rows();
  const Index k = w.data().cols();
  check(w.data().rows() == c, "depthwise_conv_h: weight rows must equal channels");
  std::vector<std::pair<Index, Index>> ext;
  for (const auto& s : x.layout()) {
    check(s.w == 1, "depthwise_conv_h: width-1 segments only");
    const Index oh = s.h + 2 * pad - k + 1;
    check(oh > 0, "depthwise_conv_h: segment too short");
    ext.emplace_back(oh, 1);
  }
  Layout out_layout = make_layout(ext);
  Mat<Scalar> y = Mat<Scalar>::Zero(c, layout_positions(out_layout));
  const auto& xd = x.data();
  const auto& wd = w.data();
  // Output row o reads input row o + tap - pad.
  auto tap_range = [pad](Index tap, Index in_h, Index out_h, Index& o0, Index& o1) {
    o0 = std::max<Index>(0, pad - tap);
    o1 = std::min<Index>(out_h, in_h + pad - tap);
  };
  for (std::size_t s = 0; s < out_layout.size(); ++s) {
    const Segment& in = x.layout()[s];
    const Segment& out = out_layout[s];
    for (Index t = 0; t < k; ++t) {
      Index o0, o1;
      tap_range(t, in.h, out.h, o0, o1);
      if (o1 <= o0) continue;
      y.middleCols(out.offset + o0, o1 - o0).array() +=
          xd.middleCols(in.offset + o0 + t - pad, o1 - o0).array().colwise() * wd.col(t).array();
    }
  }
  if (b.defined()) y.colwise() += b.data().col(0);
  std::vector<Var<Scalar>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  Layout out_copy = out_layout;
  return make_result<Scalar>(
      Tensor<Scalar>(std::move(y), std::move(out_layout)), parents, [pad, k, out_copy, tap_range](Node<Scalar>& n) {
        const auto& xn = n.parents[0];
        const auto& wn = n.parents[1];
        for (std::size_t s = 0; s < out_copy.size(); ++s) {
          const Segment& in = xn->value.segs[s];
          const Segment& out = out_copy[s];
          for (Index t = 0; t < k; ++t) {
            Index o0, o1;
            tap_range(t, in.h, out.h, o0, o1);
            if (o1 <= o0) continue;
            const auto gseg = n.grad.middleCols(out.offset + o0, o1 - o0);
            if (xn->requires_grad) {
              xn->grad_ref().middleCols(in.offset + o0 + t - pad, o1 - o0).array() +=
                  gseg.array().colwise() * wn->value.data.col(t).array();
            }
            if (wn->requires_grad) {
              wn->grad_ref().col(t) +=
                  (gseg.array() * xn->value.data.middleCols(in.offset + o0 + t - pad, o1 - o0).array())
                      .rowwise()
                      .sum()
                      .matrix();
            }
          }
        }
        if (n.parents.size() > 2 && n.parents[2]->requires_grad) n.parents[2]->grad_ref() += n.grad.rowwise().sum();
      });
}

template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta, Scalar eps) {
  const auto& xd = x.data();
  const Index c = xd.rows();
  check(gamma.data().rows() == c && beta.data().rows() == c, "layer_norm: parameter size mismatch");
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> mean = xd.colwise().mean().array();
  Mat<Scalar> xhat = xd.rowwise() - mean.matrix();
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> inv_std =
      ((xhat.array().square().colwise().sum() / Scalar(c)) + eps).rsqrt();
  xhat.array().rowwise() *= inv_std;
  Mat<Scalar> y = (xhat.array().colwise() * gamma.data().col(0).array()).matrix();
  y.colwise() += beta.data().col(0);
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), x.layout()), {x, gamma, beta},
                             [xhat = std::move(xhat), inv_std, c](Node<Scalar>& n) {
                               const auto& xn = n.parents[0];
                               const auto& gn = n.parents[1];
                               const auto& bn = n.parents[2];
                               if (gn->requires_grad) gn->grad_ref() += n.grad.cwiseProduct(xhat).rowwise().sum();
                               if (bn->requires_grad) bn->grad_ref() += n.grad.rowwise().sum();
                               if (xn->requires_grad) {
                                 Mat<Scalar> dxhat = (n.grad.array().colwise() * gn->value.data.col(0).array()).matrix();
                                 const Eigen::Array<Scalar, 1, Eigen::Dynamic> m1 =
                                     dxhat.colwise().sum().array() / Scalar(c);
                                 const Eigen::Array<Scalar, 1, Eigen::Dynamic> m2 =
                                     dxhat.cwiseProduct(xhat).colwise().sum().array() / Scalar(c);
                                 Mat<Scalar> dx = dxhat;
                                 dx.array().rowwise() -= m1;
                                 dx.array() -= xhat.array().rowwise() * m2;
                                 dx.array().rowwise() *= inv_std;
                                 xn->grad_ref() += dx;
                               }
                             });
}

template <typename Scalar>
Var<Scalar> grn(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta) {
  const auto& xd = x.data();
  const Index c = xd.rows();
  const std::size_t nseg = x.layout().size();
  check(gamma.data().rows() == c && beta.data().rows() == c, "grn: parameter size mismatch");
  constexpr Scalar kEps = Scalar(1e-6);
  constexpr Scalar kTiny = Scalar(1e-12);
  Mat<Scalar> norms(c, nseg);  // g_c per segment
  Eigen::Array<Scalar, Eigen::Dynamic, 1> denom(nseg);
  Mat<Scalar> y(c, xd.cols());
  for (std::size_t s = 0; s < nseg; ++s) {
    const auto xs = x.value().seg(s);
    norms.col(s) = (xs.array().square().rowwise().sum() + kTiny).sqrt().matrix();
    denom(s) = norms.col(s).mean() + kEps;
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> scale =
        gamma.data().col(0).array() * (norms.col(s).array() / denom(s)) + Scalar(1);
    auto ys = y.middleCols(x.layout()[s].offset, x.layout()[s].size());
    ys = (xs.array().colwise() * scale).matrix();
    ys.colwise() += beta.data().col(0);
  }
  return make_result<Scalar>(
      Tensor<Scalar>(std::move(y), x.layout()), {x, gamma, beta}, [norms, denom, c](Node<Scalar>& n) {
        const auto& xn = n.parents[0];
        const auto& gn = n.parents[1];
        const auto& bn = n.parents[2];
        const auto& gamma_v = gn->value.data.col(0).array();
        for (std::size_t s = 0; s < xn->value.segs.size(); ++s) {
          const Segment& seg = xn->value.segs[s];
          const auto xs = xn->value.data.middleCols(seg.offset, seg.size());
          const auto gs = n.grad.middleCols(seg.offset, seg.size());
          const Eigen::Array<Scalar, Eigen::Dynamic, 1> nrm = norms.col(s).array() / denom(s);
          // sum over positions of dy * x, per channel
          const Eigen::Array<Scalar, Eigen::Dynamic, 1> dyx = gs.cwiseProduct(xs).rowwise().sum().array();
          if (gn->requires_grad) gn->grad_ref().col(0).array() += dyx * nrm;
          if (bn->requires_grad) bn->grad_ref().col(0) += gs.rowwise().sum();
          if (xn->requires_grad) {
            const Eigen::Array<Scalar, Eigen::Dynamic, 1> dn = gamma_v * dyx;
            Eigen::Array<Scalar, Eigen::Dynamic, 1> dg = dn / denom(s);
            const Scalar dm = -(dn * norms.col(s).array()).sum() / (denom(s) * denom(s));
            dg += dm / Scalar(c);
            const Eigen::Array<Scalar, Eigen::Dynamic, 1> direct = gamma_v * nrm + Scalar(1);
            const Eigen::Array<Scalar, Eigen::Dynamic, 1> via_norm = dg / norms.col(s).array();
            auto dx = xn->grad_ref().middleCols(seg.offset, seg.size());
            dx.array() += gs.array().colwise() * direct + xs.array().colwise() * via_norm;
          }
        }
      });
}

template <typename Scalar>
Var<Scalar> silu(const Var<Scalar>& x) {
  const auto& xd = x.data();
  Mat<Scalar> sig = (Scalar(1) + (-xd.array()).exp()).inverse().matrix();
  Mat<Scalar> y = xd.cwiseProduct(sig);
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), x.layout()), {x}, [sig = std::move(sig)](Node<Scalar>& n) {
    const auto& xn = n.parents[0];
    const auto& xv = xn->value.data.array();
    xn->grad_ref().array() += n.grad.array() * sig.array() * (Scalar(1) + xv * (Scalar(1) - sig.array()));
  });
}

template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& x) {
  const auto& xd = x.data();
  const Scalar inv_sqrt2 = Scalar(0.70710678118654752440);
  Mat<Scalar> cdf = xd.unaryExpr([inv_sqrt2](Scalar v) { return Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2)); });
  Mat<Scalar> y = xd.cwiseProduct(cdf);
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), x.layout()), {x}, [cdf = std::move(cdf)](Node<Scalar>& n) {
    const auto& xn = n.parents[0];
    const Scalar inv_sqrt_2pi = Scalar(0.39894228040143267794);
    const auto xv = xn->value.data.array();
    const auto pdf = inv_sqrt_2pi * (Scalar(-0.5) * xv.square()).exp();
    xn->grad_ref().array() += n.grad.array() * (cdf.array() + xv * pdf);
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  check(a.data().rows() == b.data().rows() && a.data().cols() == b.data().cols(), "add: shape mismatch");
  Mat<Scalar> y = a.data() + b.data();
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), a.layout()), {a, b}, [](Node<Scalar>& n) {
    accumulate(n.parents[0], n.grad);
    accumulate(n.parents[1], n.grad);
  });
}

template <typename Scalar>
Var<Scalar> axpby(Scalar alpha, const Var<Scalar>& a, Scalar beta, const Var<Scalar>& b) {
  check(a.data().rows() == b.data().rows() && a.data().cols() == b.data().cols(), "axpby: shape mismatch");
  Mat<Scalar> y = alpha * a.data() + beta * b.data();
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), a.layout()), {a, b}, [alpha, beta](Node<Scalar>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad_ref() += alpha * n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad_ref() += beta * n.grad;
  });
}

template <typename Scalar>
Var<Scalar> add_segment_bias(const Var<Scalar>& x, const Var<Scalar>& c) {
  check(c.data().rows() == x.data().rows(), "add_segment_bias: channel mismatch");
  check(static_cast<std::size_t>(c.data().cols()) == x.layout().size(), "add_segment_bias: one column per segment");
  Mat<Scalar> y = x.data();
  for (std::size_t s = 0; s < x.layout().size(); ++s) {
    y.middleCols(x.layout()[s].offset, x.layout()[s].size()).colwise() += c.data().col(s);
  }
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), x.layout()), {x, c}, [](Node<Scalar>& n) {
    accumulate(n.parents[0], n.grad);
    const auto& cn = n.parents[1];
    if (cn->requires_grad) {
      auto& g = cn->grad_ref();
      for (std::size_t s = 0; s < n.value.segs.size(); ++s) {
        g.col(s) += n.grad.middleCols(n.value.segs[s].offset, n.value.segs[s].size()).rowwise().sum();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> scale_segments(const Var<Scalar>& x, const std::vector<Scalar>& factors) {
  check(factors.size() == x.layout().size(), "scale_segments: one factor per segment");
  Mat<Scalar> y = x.data();
  for (std::size_t s = 0; s < factors.size(); ++s) {
    y.middleCols(x.layout()[s].offset, x.layout()[s].size()) *= factors[s];
  }
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), x.layout()), {x}, [factors](Node<Scalar>& n) {
    const auto& xn = n.parents[0];
    auto& g = xn->grad_ref();
    for (std::size_t s = 0; s < factors.size(); ++s) {
      const Segment& seg = n.value.segs[s];
      g.middleCols(seg.offset, seg.size()) += factors[s] * n.grad.middleCols(seg.offset, seg.size());
    }
  });
}

template <typename Scalar>
Var<Scalar> gather(const Var<Scalar>& x, const std::vector<Index>& src, Layout out_layout) {
  check(static_cast<Index>(src.size()) == layout_positions(out_layout), "gather: index count != output positions");
  const Index c = x.data().rows();
  const Index ncols = x.data().cols();
  Mat<Scalar> y(c, static_cast<Index>(src.size()));
  for (std::size_t j = 0; j < src.size(); ++j) {
    if (src[j] < 0) {
      y.col(j).setZero();
    } else {
      check(src[j] < ncols, "gather: index out of range");
      y.col(j) = x.data().col(src[j]);
    }
  }
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), std::move(out_layout)), {x}, [src](Node<Scalar>& n) {
    auto& g = n.parents[0]->grad_ref();
    for (std::size_t j = 0; j < src.size(); ++j) {
      if (src[j] >= 0) g.col(src[j]) += n.grad.col(j);
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& xs) {
  check(!xs.empty(), "concat_channels: empty input");
  Index rows = 0;
  for (const auto& x : xs) {
    check(x.data().cols() == xs[0].data().cols(), "concat_channels: position count mismatch");
    rows += x.data().rows();
  }
  Mat<Scalar> y(rows, xs[0].data().cols());
  Index r = 0;
  for (const auto& x : xs) {
    y.middleRows(r, x.data().rows()) = x.data();
    r += x.data().rows();
  }
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), xs[0].layout()), xs, [](Node<Scalar>& n) {
    Index r0 = 0;
    for (const auto& p : n.parents) {
      const Index pr = p->value.data.rows();
      if (p->requires_grad) p->grad_ref() += n.grad.middleRows(r0, pr);
      r0 += pr;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_positions(const std::vector<Var<Scalar>>& xs) {
  check(!xs.empty(), "concat_positions: empty input");
  Index cols = 0;
  std::vector<std::pair<Index, Index>> ext;
  for (const auto& x : xs) {
    check(x.data().rows() == xs[0].data().rows(), "concat_positions: channel mismatch");
    cols += x.data().cols();
    for (const auto& s : x.layout()) ext.emplace_back(s.h, s.w);
  }
  Mat<Scalar> y(xs[0].data().rows(), cols);
  Index c0 = 0;
  for (const auto& x : xs) {
    y.middleCols(c0, x.data().cols()) = x.data();
    c0 += x.data().cols();
  }
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), make_layout(ext)), xs, [](Node<Scalar>& n) {
    Index c1 = 0;
    for (const auto& p : n.parents) {
      const Index pc = p->value.data.cols();
      if (p->requires_grad) p->grad_ref() += n.grad.middleCols(c1, pc);
      c1 += pc;
    }
  });
}

template <typename Scalar>
Var<Scalar> unfold_channels(const Var<Scalar>& x, Index r) {
  const Index rows = x.data().rows();
  check(r > 0 && rows % r == 0, "unfold_channels: channels not divisible by ratio");
  std::vector<std::pair<Index, Index>> ext;
  for (const auto& s : x.layout()) {
    check(s.w == 1, "unfold_channels: width-1 segments only");
    ext.emplace_back(s.h * r, 1);
  }
  Mat<Scalar> y = Eigen::Map<const Mat<Scalar>>(x.data().data(), rows / r, x.data().cols() * r);
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), make_layout(ext)), {x}, [rows, r](Node<Scalar>& n) {
    auto& g = n.parents[0]->grad_ref();
    g += Eigen::Map<const Mat<Scalar>>(n.grad.data(), rows, n.grad.cols() / r);
  });
}

template <typename Scalar>
Var<Scalar> mse(const Var<Scalar>& pred, const Mat<Scalar>& target) {
  check(pred.data().rows() == target.rows() && pred.data().cols() == target.cols(), "mse: shape mismatch");
  check(target.size() > 0, "mse: empty input");
  Mat<Scalar> diff = pred.data() - target;
  const Scalar n = Scalar(diff.size());
  Mat<Scalar> y(1, 1);
  y(0, 0) = diff.squaredNorm() / n;
  return make_result<Scalar>(Tensor<Scalar>(std::move(y), Layout{{1, 1, 0}}), {pred},
                             [diff = std::move(diff), n](Node<Scalar>& node) {
                               node.parents[0]->grad_ref() += (Scalar(2) * node.grad(0, 0) / n) * diff;
                             });
}

#define PERIODWAVE_INSTANTIATE_OPS(S)                                                                  \
  template Var<S> linear(const Var<S>&, const Var<S>&, const Var<S>&);                                 \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&, const Conv2dGeom&);              \
  template Var<S> depthwise_conv_h(const Var<S>&, const Var<S>&, const Var<S>&, Index);                \
  template Var<S> layer_norm(const Var<S>&, const Var<S>&, const Var<S>&, S);                          \
  template Var<S> grn(const Var<S>&, const Var<S>&, const Var<S>&);                                    \
  template Var<S> silu(const Var<S>&);                                                                 \
  template Var<S> gelu(const Var<S>&);                                                                 \
  template Var<S> add(const Var<S>&, const Var<S>&);                                                   \
  template Var<S> axpby(S, const Var<S>&, S, const Var<S>&);                                           \
  template Var<S> add_segment_bias(const Var<S>&, const Var<S>&);                                      \
  template Var<S> scale_segments(const Var<S>&, const std::vector<S>&);                                \
  template Var<S> gather(const Var<S>&, const std::vector<Index>&, Layout);                            \
  template Var<S> concat_channels(const std::vector<Var<S>>&);                                         \
  template Var<S> concat_positions(const std::vector<Var<S>>&);                                        \
  template Var<S> unfold_channels(const Var<S>&, Index);                                               \
  template Var<S> mse(const Var<S>&, const Mat<S>&);

PERIODWAVE_INSTANTIATE_OPS(float)
PERIODWAVE_INSTANTIATE_OPS(double)

#undef PERIODWAVE_INSTANTIATE_OPS

}  // namespace periodwave
