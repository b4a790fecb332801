#pragma once

#include "orl/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace orl {

/// Grayscale image, row-major, pixel values in [0, 1].
template <typename Scalar>
using ImageT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Image = ImageT<double>;

template <typename Derived>
bool in_unit_range(const Eigen::MatrixBase<Derived>& img) {
  return img.size() > 0 && img.allFinite() && img.minCoeff() >= 0 && img.maxCoeff() <= 1;
}

template <typename DerivedA, typename DerivedB>
void require_same_shape(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                        const char* context) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(context) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
}

/// Mean over non-overlapping factor x factor blocks. The mean is accumulated
/// relative to the block's first pixel, so constant blocks reproduce their
/// value exactly.
template <typename Derived>
ImageT<typename Derived::Scalar> block_mean(const Eigen::MatrixBase<Derived>& img, Eigen::Index factor) {
  using Scalar = typename Derived::Scalar;
  if (factor <= 0 || img.rows() % factor != 0 || img.cols() % factor != 0) {
    throw InvalidArgument("block_mean: factor " + std::to_string(factor) + " does not divide " +
                          std::to_string(img.rows()) + "x" + std::to_string(img.cols()));
  }
  ImageT<Scalar> out(img.rows() / factor, img.cols() / factor);
  const Scalar count = static_cast<Scalar>(factor * factor);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const auto block = img.block(r * factor, c * factor, factor, factor);
      const Scalar anchor = block(0, 0);
      out(r, c) = anchor + (block.array() - anchor).sum() / count;
    }
  }
  return out;
}

/// Bilinear resize with half-pixel centres and edge clamping.
template <typename Derived>
ImageT<typename Derived::Scalar> bilinear_resize(const Eigen::MatrixBase<Derived>& img, Eigen::Index out_rows,
                                                 Eigen::Index out_cols) {
  using Scalar = typename Derived::Scalar;
  if (img.size() == 0 || out_rows <= 0 || out_cols <= 0) throw InvalidArgument("bilinear_resize: empty size");
  auto sample_axis = [](Eigen::Index i, Eigen::Index in, Eigen::Index out, Eigen::Index& i0, Eigen::Index& i1,
                        Scalar& w) {
    Scalar src = (static_cast<Scalar>(i) + Scalar(0.5)) * static_cast<Scalar>(in) / static_cast<Scalar>(out) -
                 Scalar(0.5);
    src = std::clamp(src, Scalar(0), static_cast<Scalar>(in - 1));
    i0 = static_cast<Eigen::Index>(std::floor(src));
    i1 = std::min(i0 + 1, in - 1);
    w = src - static_cast<Scalar>(i0);
  };
  ImageT<Scalar> out(out_rows, out_cols);
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    Eigen::Index r0, r1;
    Scalar wr;
    sample_axis(r, img.rows(), out_rows, r0, r1, wr);
    for (Eigen::Index c = 0; c < out_cols; ++c) {
      Eigen::Index c0, c1;
      Scalar wc;
      sample_axis(c, img.cols(), out_cols, c0, c1, wc);
      // a + w * (b - a) form: equal neighbours reproduce their value exactly.
      const Scalar top = img(r0, c0) + wc * (img(r0, c1) - img(r0, c0));
      const Scalar bottom = img(r1, c0) + wc * (img(r1, c1) - img(r1, c0));
      out(r, c) = top + wr * (bottom - top);
    }
  }
  return out;
}

}  // namespace orl

namespace orl {

struct ImagePair {
  Image hr;
  Image lr;
};

}  // namespace orl
