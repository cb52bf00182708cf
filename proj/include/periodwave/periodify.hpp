#pragma once

#include <Eigen/Dense>

#include <numeric>
#include <stdexcept>

#include "periodwave/padding.hpp"

namespace periodwave {

/// A 1-D signal reflect-padded and laid out row-major as height x period.
template <typename Scalar>
struct PeriodGrid {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> grid;
  int period = 1;
  Eigen::Index original_len = 0;
  Eigen::Index pad = 0;
};

// Padded length for a signal of length n: the next multiple of lcm(p, align).
inline Eigen::Index periodify_length(Eigen::Index n, int p, int align) {
  if (p <= 0) throw std::invalid_argument("periodify: period must be positive");
  if (align <= 0) throw std::invalid_argument("periodify: align must be positive");
  const long long block = std::lcm<long long>(p, align);
  return static_cast<Eigen::Index>(round_up(n, block));
}

template <typename Derived>
auto periodify(const Eigen::MatrixBase<Derived>& x, int p, int align) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  if (n <= 0) throw std::invalid_argument("periodify: empty signal");
  const Eigen::Index padded = periodify_length(n, p, align);
  PeriodGrid<Scalar> g;
  g.period = p;
  g.original_len = n;
  g.pad = padded - n;
  g.grid.resize(padded / p, p);
  Scalar* out = g.grid.data();
  for (Eigen::Index i = 0; i < padded; ++i) out[i] = x(reflect_index(i, n));
  return g;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> deperiodify(const PeriodGrid<Scalar>& g) {
  if (g.period <= 0 || g.grid.cols() != g.period || g.grid.rows() * g.period != g.original_len + g.pad ||
      g.original_len <= 0 || g.pad < 0) {
    throw std::invalid_argument("deperiodify: inconsistent grid metadata");
  }
  return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(g.grid.data(), g.original_len);
}

}  // namespace periodwave
