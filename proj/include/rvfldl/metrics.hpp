#pragma once

#include <algorithm>
#include <span>
#include <string>

#include <Eigen/Core>

#include "rvfldl/errors.hpp"
#include "rvfldl/linalg.hpp"
#include "rvfldl/solver.hpp"

namespace rvfldl {

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
  }
  if (predicted.empty()) throw DimensionError("accuracy: empty label sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

/// ||Y - D1 X1||_F / ||Y||_F
inline double relative_reconstruction_error(const Matrix& y, const LearnedDictionary& d1,
                                            const Matrix& x1) {
  if (d1.values.rows() != y.rows() || d1.values.cols() != x1.rows() || x1.cols() != y.cols()) {
    throw DimensionError("relative_reconstruction_error: inconsistent shapes");
  }
  const double denom = y.norm();
  if (denom == 0.0) throw DataError(DataError::Kind::kInvalidValue,
                                    "relative_reconstruction_error: ||Y||_F is zero");
  return (y - d1.values * x1).norm() / denom;
}

/// Grey image, row-major H x W, values in [0, dynamic_range].
struct ImageBuffer {
  Matrix pixels;
  double dynamic_range = 255.0;

  /// Column of a data matrix holding a flattened row-major image.
  static ImageBuffer from_column(const Vector& col, Eigen::Index height, Eigen::Index width,
                                 double range = 255.0) {
    if (col.size() != height * width) {
      throw DimensionError("image column has " + std::to_string(col.size()) + " values, expected " +
                           std::to_string(height * width));
    }
    ImageBuffer img;
    img.dynamic_range = range;
    img.pixels = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(col.data(), height, width);
    return img;
  }

  ImageBuffer clamped() const {
    ImageBuffer out = *this;
    out.pixels = pixels.cwiseMax(0.0).cwiseMin(dynamic_range);
    return out;
  }
};

namespace detail {

/// SSIM of two equally sized blocks from population statistics.
template <typename A, typename B>
double ssim_block(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, double c1, double c2) {
  const double n = static_cast<double>(a.size());
  const double mean_a = a.sum() / n;
  const double mean_b = b.sum() / n;
  const auto da = (a.array() - mean_a);
  const auto db = (b.array() - mean_b);
  const double var_a = da.square().sum() / n;
  const double var_b = db.square().sum() / n;
  const double cov = (da * db).sum() / n;
  return ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2)) /
         ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2));
}

}  // namespace detail

inline constexpr Eigen::Index kSsimWindow = 8;

/// Structural similarity with C1 = (0.01 R)^2, C2 = (0.03 R)^2.
/// Global mode uses whole-image statistics; windowed mode averages 8x8
/// windows at stride 1 (images smaller than a window fall back to global).
inline double ssim(const ImageBuffer& a, const ImageBuffer& b, bool windowed = false) {
  if (a.pixels.rows() != b.pixels.rows() || a.pixels.cols() != b.pixels.cols()) {
    throw DimensionError("ssim: image shapes differ (" +
                         detail::shape(a.pixels.rows(), a.pixels.cols()) + " vs " +
                         detail::shape(b.pixels.rows(), b.pixels.cols()) + ")");
  }
  if (a.dynamic_range != b.dynamic_range) throw ConfigError("ssim: dynamic ranges differ");
  if (a.pixels.size() == 0) throw DimensionError("ssim: empty image");
  const double c1 = (0.01 * a.dynamic_range) * (0.01 * a.dynamic_range);
  const double c2 = (0.03 * a.dynamic_range) * (0.03 * a.dynamic_range);
  const Eigen::Index h = a.pixels.rows();
  const Eigen::Index w = a.pixels.cols();
  if (!windowed || h < kSsimWindow || w < kSsimWindow) {
    return detail::ssim_block(a.pixels, b.pixels, c1, c2);
  }
  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index r = 0; r + kSsimWindow <= h; ++r) {
    for (Eigen::Index c = 0; c + kSsimWindow <= w; ++c) {
      total += detail::ssim_block(a.pixels.block(r, c, kSsimWindow, kSsimWindow),
                                  b.pixels.block(r, c, kSsimWindow, kSsimWindow), c1, c2);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace rvfldl
