#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <utility>

namespace periodwave {

// Orthonormal Haar analysis: a_k = (x_2k + x_2k+1) / sqrt2, d_k = (x_2k - x_2k+1) / sqrt2.
template <typename Derived>
auto dwt(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = x.size();
  if (n % 2 != 0) throw std::invalid_argument("dwt: signal length must be even");
  const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
  V even(n / 2), odd(n / 2);
  for (Eigen::Index k = 0; k < n / 2; ++k) {
    even(k) = x(2 * k);
    odd(k) = x(2 * k + 1);
  }
  return std::pair<V, V>{r * (even + odd), r * (even - odd)};
}

template <typename DA, typename DD>
auto idwt(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DD>& d) {
  using Scalar = typename DA::Scalar;
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (a.size() != d.size()) throw std::invalid_argument("idwt: approximation and detail lengths differ");
  const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
  V x(2 * a.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    x(2 * k) = r * (a(k) + d(k));
    x(2 * k + 1) = r * (a(k) - d(k));
  }
  return x;
}

/// Depth-2 Haar wavelet packet, four equal-width bands ordered low to high
/// frequency (0-3, 3-6, 6-9, 9-12 kHz at 24 kHz).
template <typename Scalar>
struct BandComponents {
  std::array<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, 4> bands;

  Eigen::Index band_length() const { return bands[0].size(); }
};

// Packet leaves in natural tree order are (aa, ad, da, dd). The detail branch
// is spectrally mirrored by decimation, so frequency order is aa, ad, dd, da.
inline constexpr std::array<int, 4> kFrequencyToTreeLeaf = {0, 1, 3, 2};

template <typename Derived>
auto packet_split(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() % 4 != 0) throw std::invalid_argument("packet_split: length must be divisible by 4");
  auto [a, d] = dwt(x);
  auto [aa, ad] = dwt(a);
  auto [da, dd] = dwt(d);
  BandComponents<Scalar> out;
  out.bands = {std::move(aa), std::move(ad), std::move(dd), std::move(da)};
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> packet_merge(const BandComponents<Scalar>& b) {
  const Eigen::Index n = b.bands[0].size();
  for (const auto& band : b.bands) {
    if (band.size() != n) throw std::invalid_argument("packet_merge: band lengths differ");
  }
  const auto a = idwt(b.bands[0], b.bands[1]);
  const auto d = idwt(b.bands[3], b.bands[2]);
  return idwt(a, d);
}

}  // namespace periodwave
