#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "periodwave/ops.hpp"

namespace periodwave {

template <typename Scalar>
struct NamedParam {
  std::string name;
  std::vector<Index> shape;  // logical shape, product == rows * cols of the storage
  Var<Scalar> var;
};

// Owns every trainable tensor of a model in registration order and draws
// their initial values from a single seeded stream.
template <typename Scalar>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  Var<Scalar> uniform(const std::string& name, Index rows, Index cols, double bound, std::vector<Index> shape = {}) {
    Mat<Scalar> m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) m(i, j) = Scalar((2.0 * unit() - 1.0) * bound);
    }
    return add(name, std::move(m), std::move(shape));
  }

  Var<Scalar> filled(const std::string& name, Index rows, Index cols, double value, std::vector<Index> shape = {}) {
    return add(name, Mat<Scalar>::Constant(rows, cols, Scalar(value)), std::move(shape));
  }

  std::vector<NamedParam<Scalar>>& params() { return params_; }
  const std::vector<NamedParam<Scalar>>& params() const { return params_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.var.data().size());
    return n;
  }

 private:
  Var<Scalar> add(const std::string& name, Mat<Scalar> m, std::vector<Index> shape) {
    if (shape.empty()) shape = {m.rows(), m.cols()};
    const Index cols = m.cols();
    Var<Scalar> v(Tensor<Scalar>(std::move(m), Layout{{cols, 1, 0}}), true);
    params_.push_back({name, std::move(shape), v});
    return v;
  }

  double unit() { return double(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  std::vector<NamedParam<Scalar>> params_;
};

template <typename Scalar>
struct Linear {
  Var<Scalar> weight, bias;

  Linear() = default;
  Linear(ParamStore<Scalar>& ps, const std::string& name, Index in, Index out) {
    const double bound = 1.0 / std::sqrt(double(in));
    weight = ps.uniform(name + ".weight", out, in, bound);
    bias = ps.uniform(name + ".bias", out, 1, bound, {out});
  }
  Var<Scalar> operator()(const Var<Scalar>& x) const { return linear(x, weight, bias); }
};

template <typename Scalar>
struct Conv2d {
  Var<Scalar> weight, bias;
  Conv2dGeom geom;

  Conv2d() = default;
  Conv2d(ParamStore<Scalar>& ps, const std::string& name, Index in, Index out, Conv2dGeom g) : geom(g) {
    const double bound = 1.0 / std::sqrt(double(in * g.kh * g.kw));
    weight = ps.uniform(name + ".weight", out, g.kh * g.kw * in, bound, {out, g.kh, g.kw, in});
    bias = ps.uniform(name + ".bias", out, 1, bound, {out});
  }
  Var<Scalar> operator()(const Var<Scalar>& x) const { return conv2d(x, weight, bias, geom); }
};

template <typename Scalar>
struct LayerNorm {
  Var<Scalar> gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParamStore<Scalar>& ps, const std::string& name, Index dim) {
    gamma = ps.filled(name + ".gamma", dim, 1, 1.0, {dim});
    beta = ps.filled(name + ".beta", dim, 1, 0.0, {dim});
  }
  Var<Scalar> operator()(const Var<Scalar>& x) const { return layer_norm(x, gamma, beta, Scalar(1e-6)); }
};

// Depthwise conv (k=7) -> LayerNorm -> pointwise expand -> GELU -> GRN ->
// pointwise project, added back to the input.
template <typename Scalar>
struct ConvNeXtV2Block {
  Var<Scalar> dw_weight, dw_bias;
  LayerNorm<Scalar> norm;
  Linear<Scalar> pw1, pw2;
  Var<Scalar> grn_gamma, grn_beta;

  ConvNeXtV2Block() = default;
  ConvNeXtV2Block(ParamStore<Scalar>& ps, const std::string& name, Index dim, Index hidden) {
    const double bound = 1.0 / std::sqrt(7.0);
    dw_weight = ps.uniform(name + ".dwconv.weight", dim, 7, bound, {dim, 7});
    dw_bias = ps.uniform(name + ".dwconv.bias", dim, 1, bound, {dim});
    norm = LayerNorm<Scalar>(ps, name + ".norm", dim);
    pw1 = Linear<Scalar>(ps, name + ".pwconv1", dim, hidden);
    grn_gamma = ps.filled(name + ".grn.gamma", hidden, 1, 0.0, {hidden});
    grn_beta = ps.filled(name + ".grn.beta", hidden, 1, 0.0, {hidden});
    pw2 = Linear<Scalar>(ps, name + ".pwconv2", hidden, dim);
  }

  // `keep` holds per-segment residual scales (drop path); empty means 1.
  Var<Scalar> operator()(const Var<Scalar>& x, const std::vector<Scalar>& keep) const {
    Var<Scalar> h = depthwise_conv_h(x, dw_weight, dw_bias, 3);
    h = pw2(grn(gelu(pw1(norm(h))), grn_gamma, grn_beta));
    if (!keep.empty()) h = scale_segments(h, keep);
    return add(x, h);
  }
};

}  // namespace periodwave
