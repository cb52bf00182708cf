#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace periodwave {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// A rectangular spatial extent (height x width) stored as a contiguous run of
// columns. Positions inside a segment are row-major: column = y * w + x.
struct Segment {
  Index h = 0;
  Index w = 1;
  Index offset = 0;

  Index size() const { return h * w; }
};

using Layout = std::vector<Segment>;

// Builds a packed layout from (h, w) extents.
inline Layout make_layout(const std::vector<std::pair<Index, Index>>& extents) {
  Layout out;
  out.reserve(extents.size());
  Index offset = 0;
  for (const auto& [h, w] : extents) {
    out.push_back({h, w, offset});
    offset += h * w;
  }
  return out;
}

inline Index layout_positions(const Layout& layout) {
  Index n = 0;
  for (const auto& s : layout) n += s.size();
  return n;
}

inline bool same_layout(const Layout& a, const Layout& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].h != b[i].h || a[i].w != b[i].w || a[i].offset != b[i].offset) return false;
  }
  return true;
}

/// Channel-major feature map.
///
/// `data` is channels x positions, column-major, so every position holds a
/// contiguous channel vector. The columns are partitioned into segments; a
/// batch of signals (or a batch of periodified grids with different shapes)
/// is one Tensor with one segment per item.
template <typename Scalar>
struct Tensor {
  Mat<Scalar> data;
  Layout segs;

  Tensor() = default;
  Tensor(Mat<Scalar> d, Layout l) : data(std::move(d)), segs(std::move(l)) {}

  Index channels() const { return data.rows(); }
  Index positions() const { return data.cols(); }

  auto seg(std::size_t s) { return data.middleCols(segs[s].offset, segs[s].size()); }
  auto seg(std::size_t s) const { return data.middleCols(segs[s].offset, segs[s].size()); }

  // A single-segment tensor viewing `d` as h = cols, w = 1.
  static Tensor column_signal(Mat<Scalar> d) {
    const Index n = d.cols();
    return Tensor(std::move(d), Layout{{n, 1, 0}});
  }
};

}  // namespace periodwave
