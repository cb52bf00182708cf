#include <doctest.h>

#include <functional>
#include <random>

#include "periodwave/ops.hpp"

using namespace periodwave;
using M = Mat<double>;
using Vd = Var<double>;

namespace {

std::mt19937_64 rng(11);

M randn(Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  M m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

Vd leaf(M m, Layout l) { return Vd(Tensor<double>(std::move(m), std::move(l)), true); }

// Compares backward() against central differences of mse(f(inputs), target).
void gradcheck(const std::function<Vd(const std::vector<Vd>&)>& f, std::vector<Vd> inputs, double tol = 1e-6) {
  const Vd out0 = f(inputs);
  const M target = randn(out0.data().rows(), out0.data().cols());
  Vd loss = mse(f(inputs), target);
  backward(loss);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    const M analytic = inputs[k].has_grad() ? inputs[k].grad() : M::Zero(inputs[k].data().rows(), inputs[k].data().cols());
    M& x = inputs[k].data();
    const double h = 1e-6;
    for (Index i = 0; i < x.size(); ++i) {
      const double keep = x.data()[i];
      x.data()[i] = keep + h;
      const double lp = mse(f(inputs), target).data()(0, 0);
      x.data()[i] = keep - h;
      const double lm = mse(f(inputs), target).data()(0, 0);
      x.data()[i] = keep;
      const double numeric = (lp - lm) / (2 * h);
      const double a = analytic.data()[i];
      INFO("input " << k << " element " << i);
      CHECK(std::abs(a - numeric) <= tol * std::max(1.0, std::abs(numeric)));
    }
  }
}

}  // namespace

TEST_CASE("linear gradients") {
  const Layout l = make_layout({{5, 1}, {3, 1}});
  gradcheck([](const std::vector<Vd>& v) { return linear(v[0], v[1], v[2]); },
            {leaf(randn(4, 8), l), leaf(randn(3, 4), {{4, 1, 0}}), leaf(randn(3, 1), {{1, 1, 0}})});
}

TEST_CASE("conv2d gradients with stride, dilation and ragged segments") {
  const Layout l = make_layout({{7, 3}, {5, 2}});
  Conv2dGeom g;
  g.kh = 3;
  g.kw = 3;
  g.dh = 2;
  g.ph = 2;
  g.pw = 1;
  gradcheck([g](const std::vector<Vd>& v) { return conv2d(v[0], v[1], v[2], g); },
            {leaf(randn(2, 31), l), leaf(randn(3, 18), {{18, 1, 0}}), leaf(randn(3, 1), {{1, 1, 0}})});
  Conv2dGeom s;
  s.kh = 2;
  s.kw = 3;
  s.sh = 2;
  s.pw = 1;
  const Layout l2 = make_layout({{8, 3}, {4, 1}});
  gradcheck([s](const std::vector<Vd>& v) { return conv2d(v[0], v[1], v[2], s); },
            {leaf(randn(2, 28), l2), leaf(randn(2, 12), {{12, 1, 0}}), leaf(randn(2, 1), {{1, 1, 0}})});
}

TEST_CASE("conv2d matches a direct loop") {
  const Layout l = make_layout({{6, 4}});
  const M x = randn(2, 24), w = randn(3, 18), b = randn(3, 1);
  Conv2dGeom g;
  g.kh = 3;
  g.kw = 3;
  g.ph = 1;
  g.pw = 1;
  const Vd y = conv2d(Vd::constant(x, l), Vd::constant(w, {{18, 1, 0}}), Vd::constant(b, {{1, 1, 0}}), g);
  REQUIRE(y.layout()[0].h == 6);
  REQUIRE(y.layout()[0].w == 4);
  for (Index oy = 0; oy < 6; ++oy) {
    for (Index ox = 0; ox < 4; ++ox) {
      for (Index co = 0; co < 3; ++co) {
        double s = b(co);
        for (Index ky = 0; ky < 3; ++ky) {
          for (Index kx = 0; kx < 3; ++kx) {
            const Index iy = oy + ky - 1, ix = ox + kx - 1;
            if (iy < 0 || iy >= 6 || ix < 0 || ix >= 4) continue;
            for (Index ci = 0; ci < 2; ++ci) s += w(co, (ky * 3 + kx) * 2 + ci) * x(ci, iy * 4 + ix);
          }
        }
        CHECK(y.data()(co, oy * 4 + ox) == doctest::Approx(s));
      }
    }
  }
}

TEST_CASE("depthwise conv gradients") {
  const Layout l = make_layout({{9, 1}, {6, 1}});
  gradcheck([](const std::vector<Vd>& v) { return depthwise_conv_h(v[0], v[1], v[2], 3); },
            {leaf(randn(3, 15), l), leaf(randn(3, 7), {{7, 1, 0}}), leaf(randn(3, 1), {{1, 1, 0}})});
}

TEST_CASE("layer norm, grn, activations") {
  const Layout l = make_layout({{4, 2}, {3, 1}});
  gradcheck([](const std::vector<Vd>& v) { return layer_norm(v[0], v[1], v[2], 1e-6); },
            {leaf(randn(5, 11), l), leaf(randn(5, 1), {{1, 1, 0}}), leaf(randn(5, 1), {{1, 1, 0}})});
  gradcheck([](const std::vector<Vd>& v) { return grn(v[0], v[1], v[2]); },
            {leaf(randn(4, 11), l), leaf(randn(4, 1), {{1, 1, 0}}), leaf(randn(4, 1), {{1, 1, 0}})});
  gradcheck([](const std::vector<Vd>& v) { return silu(v[0]); }, {leaf(randn(3, 11), l)});
  gradcheck([](const std::vector<Vd>& v) { return gelu(v[0]); }, {leaf(randn(3, 11), l)});
}

TEST_CASE("structural ops") {
  const Layout l = make_layout({{4, 1}, {3, 1}});
  gradcheck([](const std::vector<Vd>& v) { return add(v[0], v[1]); }, {leaf(randn(2, 7), l), leaf(randn(2, 7), l)});
  gradcheck([](const std::vector<Vd>& v) { return axpby(0.7, v[0], -1.3, v[1]); },
            {leaf(randn(2, 7), l), leaf(randn(2, 7), l)});
  gradcheck([](const std::vector<Vd>& v) { return add_segment_bias(v[0], v[1]); },
            {leaf(randn(2, 7), l), leaf(randn(2, 2), {{2, 1, 0}})});
  gradcheck([](const std::vector<Vd>& v) { return scale_segments(v[0], std::vector<double>{0.0, 2.5}); },
            {leaf(randn(2, 7), l)});
  gradcheck(
      [](const std::vector<Vd>& v) {
        return gather(v[0], {6, -1, 0, 0, 3}, make_layout({{5, 1}}));
      },
      {leaf(randn(2, 7), l)});
  gradcheck([](const std::vector<Vd>& v) { return concat_channels<double>({v[0], v[1]}); },
            {leaf(randn(2, 7), l), leaf(randn(3, 7), l)});
  gradcheck([](const std::vector<Vd>& v) { return concat_positions<double>({v[0], v[1]}); },
            {leaf(randn(2, 7), l), leaf(randn(2, 3), {{3, 1, 0}})});
  gradcheck([](const std::vector<Vd>& v) { return unfold_channels(v[0], 2); }, {leaf(randn(4, 7), l)});
}

TEST_CASE("unfold_channels is a pixel shuffle") {
  M x(4, 2);
  x << 1, 5, 2, 6, 3, 7, 4, 8;
  const Vd y = unfold_channels(Vd::constant(x, {{2, 1, 0}}), 2);
  REQUIRE(y.data().rows() == 2);
  REQUIRE(y.data().cols() == 4);
  CHECK(y.layout()[0].h == 4);
  CHECK(y.data()(0, 0) == 1);
  CHECK(y.data()(1, 0) == 2);
  CHECK(y.data()(0, 1) == 3);
  CHECK(y.data()(0, 2) == 5);
}

TEST_CASE("no graph is recorded under NoGradGuard") {
  Vd x = leaf(randn(2, 3), {{3, 1, 0}});
  NoGradGuard guard;
  const Vd y = silu(x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("shape errors") {
  const Vd x = Vd::constant(randn(2, 3), {{3, 1, 0}});
  CHECK_THROWS(linear(x, Vd::constant(randn(2, 3), {{3, 1, 0}}), Vd()));
  CHECK_THROWS(backward(x));
}
