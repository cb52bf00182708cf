#include <doctest.h>

#include <cmath>
#include <random>

#include "periodwave/wavelet.hpp"

using namespace periodwave;
using V = Eigen::VectorXd;

namespace {

V random_signal(Eigen::Index n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d;
  V x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = d(rng);
  return x;
}

V tone(double hz, Eigen::Index n) {
  V x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = std::sin(2 * M_PI * hz * double(i) / 24000.0);
  return x;
}

}  // namespace

TEST_CASE("dwt closed forms") {
  V x(2);
  x << 2, 2;
  auto [a, d] = dwt(x);
  CHECK(a[0] == doctest::Approx(2 * std::sqrt(2.0)));
  CHECK(d[0] == doctest::Approx(0.0));
  CHECK(idwt(a, d).isApprox(x));

  auto [za, zd] = dwt(V::Zero(8).eval());
  CHECK(za.isZero());
  CHECK(zd.isZero());

  V s(3);
  s << 1, 2, 3;
  V up = idwt(s, V::Zero(3).eval());
  for (int k = 0; k < 3; ++k) {
    CHECK(up[2 * k] == doctest::Approx(s[k] / std::sqrt(2.0)));
    CHECK(up[2 * k + 1] == doctest::Approx(s[k] / std::sqrt(2.0)));
  }
  CHECK_THROWS(dwt(V::Zero(5).eval()));
  CHECK_THROWS(idwt(V::Zero(2).eval(), V::Zero(3).eval()));
}

TEST_CASE("dwt preserves energy and inverts") {
  const V x = random_signal(1024, 1);
  auto [a, d] = dwt(x);
  CHECK(std::abs(a.squaredNorm() + d.squaredNorm() - x.squaredNorm()) < 1e-9);
  CHECK((idwt(a, d) - x).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("packet split: DC and Nyquist") {
  const V dc = V::Ones(64);
  const auto b = packet_split(dc);
  CHECK(b.bands[0].squaredNorm() == doctest::Approx(64.0));
  for (int k = 1; k < 4; ++k) CHECK(b.bands[k].norm() < 1e-12);

  V alt(64);
  for (int i = 0; i < 64; ++i) alt[i] = (i % 2) ? -1.0 : 1.0;
  const auto c = packet_split(alt);
  CHECK(c.bands[3].squaredNorm() == doctest::Approx(64.0));
  for (int k = 0; k < 3; ++k) CHECK(c.bands[k].norm() < 1e-12);
  CHECK_THROWS(packet_split(V::Zero(6).eval()));
}

TEST_CASE("packet bands are frequency ordered") {
  const double centre[4] = {1500.0, 4500.0, 7500.0, 10500.0};
  for (int k = 0; k < 4; ++k) {
    const auto b = packet_split(tone(centre[k], 4096));
    int best = 0;
    for (int j = 1; j < 4; ++j) {
      if (b.bands[j].squaredNorm() > b.bands[best].squaredNorm()) best = j;
    }
    CHECK(best == k);
  }
}

TEST_CASE("packet merge inverts split") {
  for (unsigned s = 0; s < 10; ++s) {
    const V x = random_signal(4 * (100 + 37 * s), s);
    const auto b = packet_split(x);
    CHECK(b.band_length() == x.size() / 4);
    CHECK((packet_merge(b) - x).cwiseAbs().maxCoeff() < 1e-6);
    double e = 0.0;
    for (const auto& band : b.bands) e += band.squaredNorm();
    CHECK(std::abs(e - x.squaredNorm()) <= 1e-9 * x.squaredNorm());
  }
  BandComponents<double> zero;
  for (auto& band : zero.bands) band = V::Zero(16);
  CHECK(packet_merge(zero).isZero());
  zero.bands[2] = V::Zero(15);
  CHECK_THROWS(packet_merge(zero));
}

TEST_CASE("merging the low band alone is a projection") {
  const V x = random_signal(2048, 42);
  auto b = packet_split(x);
  for (int k = 1; k < 4; ++k) b.bands[k].setZero();
  const auto again = packet_split(packet_merge(b));
  for (int k = 1; k < 4; ++k) CHECK(again.bands[k].cwiseAbs().maxCoeff() < 1e-6);
  CHECK((again.bands[0] - b.bands[0]).cwiseAbs().maxCoeff() < 1e-6);
}
