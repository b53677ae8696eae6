#pragma once

// Sparse coding against a fixed dictionary under the Horseshoe prior:
// ridge pre-estimate, conditional Gaussian posterior, posterior sampling.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rvfldl/errors.hpp"
#include "rvfldl/linalg.hpp"
#include "rvfldl/random.hpp"

namespace rvfldl {

inline constexpr double kDefaultEta = 0.01;
inline constexpr double kEffectiveZeroRatio = 1e-3;

struct HSParams {
  double tau = 1.0;
  double sigma2 = 1.0;
  double eta = kDefaultEta;
  Vector lambda;  // local shrinkages, one per atom

  void validate(Eigen::Index atoms) const {
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be > 0");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    if (lambda.size() != atoms) {
      throw DimensionError("lambda has " + std::to_string(lambda.size()) +
                           " entries, dictionary has " + std::to_string(atoms) + " atoms");
    }
    if (!(lambda.array() > 0.0).all()) throw ConfigError("all lambda_i must be > 0");
  }
};

struct HSPosterior {
  Matrix mean;        // K x N
  Matrix covariance;  // K x K, shared by every column
};

struct CoefficientMatrix {
  Matrix values;  // K x N
  double effective_zero_threshold = 0.0;
};

/// Threshold below which a coefficient counts as zero for sparsity reports.
inline double effective_zero_threshold(const Matrix& values) {
  return values.size() == 0 ? 0.0 : kEffectiveZeroRatio * values.cwiseAbs().maxCoeff();
}

inline CoefficientMatrix make_coefficients(Matrix values) {
  CoefficientMatrix x;
  x.effective_zero_threshold = effective_zero_threshold(values);
  x.values = std::move(values);
  return x;
}

enum class DictInit { kGaussian, kDataSubset };

inline Matrix normalize_unit_columns(Matrix m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (n > 0.0) m.col(j) /= n;
  }
  return m;
}

/// Initial random dictionary: i.i.d. N(0,1) entries (column-major draws)
/// rescaled to unit columns, or K distinct data columns picked by a partial
/// Fisher-Yates shuffle.
inline Matrix init_dictionary(Eigen::Index d, Eigen::Index atoms, RandomStream& stream,
                              DictInit mode = DictInit::kGaussian, const Matrix* data = nullptr) {
  if (d < 1 || atoms < 1) throw ConfigError("dictionary needs d >= 1 and K >= 1");
  if (mode == DictInit::kGaussian) {
    return normalize_unit_columns(sample_standard_normal(stream, d, atoms));
  }
  if (data == nullptr || data->rows() != d) {
    throw DimensionError("data_subset dictionary init needs a data matrix with " +
                         std::to_string(d) + " rows");
  }
  if (data->cols() < atoms) {
    throw ConfigError("data_subset dictionary init needs N >= K (N=" +
                      std::to_string(data->cols()) + ", K=" + std::to_string(atoms) + ")");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(data->cols()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Matrix dict(d, atoms);
  for (Eigen::Index k = 0; k < atoms; ++k) {
    const auto remaining = static_cast<std::uint64_t>(idx.size()) - static_cast<std::uint64_t>(k);
    const auto pick = static_cast<std::size_t>(k) + static_cast<std::size_t>(stream.next_u64() % remaining);
    std::swap(idx[static_cast<std::size_t>(k)], idx[pick]);
    dict.col(k) = data->col(idx[static_cast<std::size_t>(k)]);
  }
  return normalize_unit_columns(std::move(dict));
}

namespace detail {

inline void check_dict_data(const Matrix& dict, const Matrix& y, const char* op) {
  if (dict.rows() != y.rows()) {
    throw DimensionError(std::string(op) + ": dictionary is " +
                         shape(dict.rows(), dict.cols()) + " but data is " +
                         shape(y.rows(), y.cols()) + " (row counts must match)");
  }
}

}  // namespace detail

/// Ridge pre-estimate: solves (D'D + eta I) X = D'Y by Cholesky.
inline Matrix ridge_pre_estimate(const Matrix& dict, const Matrix& y, double eta = kDefaultEta) {
  detail::check_dict_data(dict, y, "ridge_pre_estimate");
  if (!(eta > 0.0)) throw ConfigError("ridge_pre_estimate: eta must be > 0");
  Matrix gram = dict.transpose() * dict;
  gram.diagonal().array() += eta;
  return factor_spd(gram, {}, "ridge_pre_estimate gram").solve(dict.transpose() * y);
}

/// Conditional posterior of the coefficients given the shrinkages:
///   mean = tau^2 L (tau^2 L + sigma^2 (D'D + eta I)^-1)^-1 Xhat
///   cov  = (L^-1 / tau^2 + D'D / sigma^2)^-1,   L = diag(lambda_i^2).
inline HSPosterior hs_posterior(const Matrix& dict, const Matrix& y, const HSParams& params) {
  detail::check_dict_data(dict, y, "hs_posterior");
  params.validate(dict.cols());
  const Eigen::Index atoms = dict.cols();

  const Matrix dtd = dict.transpose() * dict;
  Matrix gram = dtd;
  gram.diagonal().array() += params.eta;
  const SpdFactor gram_f = factor_spd(gram, {}, "hs_posterior gram");
  const Matrix x_hat = gram_f.solve(dict.transpose() * y);
  Matrix gram_inv = gram_f.solve(Matrix::Identity(atoms, atoms));
  gram_inv = 0.5 * (gram_inv + gram_inv.transpose());

  const Vector prior = params.tau * params.tau * params.lambda.array().square().matrix();

  Matrix inner = params.sigma2 * gram_inv;
  inner.diagonal() += prior;
  HSPosterior post;
  post.mean = prior.asDiagonal() * factor_spd(inner, {}, "hs_posterior inner").solve(x_hat);

  Matrix precision = dtd / params.sigma2;
  precision.diagonal().array() += prior.array().inverse();
  post.covariance = spd_inverse(precision, {}, "hs_posterior precision");
  return post;
}

/// Draws every column j as mean_j + C' z_j with C'C = covariance (jittered
/// Cholesky). z is taken column by column from consecutive normal draws.
inline CoefficientMatrix sample_coefficients(const HSPosterior& post, RandomStream& stream) {
  const Eigen::Index atoms = post.mean.rows();
  if (post.covariance.rows() != atoms || post.covariance.cols() != atoms) {
    throw DimensionError("sample_coefficients: covariance is " +
                         detail::shape(post.covariance.rows(), post.covariance.cols()) +
                         " but mean has " + std::to_string(atoms) + " rows");
  }
  JitterPolicy always_jittered;
  always_jittered.try_unjittered_first = false;
  const SpdFactor f = factor_spd(post.covariance, always_jittered, "posterior covariance");
  const Matrix z = sample_standard_normal(stream, atoms, post.mean.cols());
  Matrix values = post.mean;
  values.noalias() += f.lower() * z;
  return make_coefficients(std::move(values));
}

/// Draws K local shrinkages lambda_i ~ C+(0,1) from the stream.
inline Vector sample_local_shrinkage(Eigen::Index atoms, RandomStream& stream) {
  Vector lambda(atoms);
  for (Eigen::Index i = 0; i < atoms; ++i) lambda[i] = sample_half_cauchy(stream);
  return lambda;
}

struct HSCodeOptions {
  double tau = 1.0;
  double sigma2 = 1.0;
  double eta = kDefaultEta;
  bool hard_threshold = false;  // zero entries below the effective-zero threshold
};

/// Full coding pass: lambda draws, posterior, one sample per column.
inline CoefficientMatrix hs_sparse_code(const Matrix& y, const Matrix& dict, RandomStream& stream,
                                        const HSCodeOptions& opts = {}) {
  detail::check_dict_data(dict, y, "hs_sparse_code");
  HSParams params;
  params.tau = opts.tau;
  params.sigma2 = opts.sigma2;
  params.eta = opts.eta;
  params.lambda = sample_local_shrinkage(dict.cols(), stream);
  CoefficientMatrix x = sample_coefficients(hs_posterior(dict, y, params), stream);
  if (opts.hard_threshold) {
    x.values = (x.values.array().abs() > x.effective_zero_threshold).select(x.values, 0.0);
  }
  return x;
}

/// Mean per-column count of entries whose magnitude exceeds `threshold`.
inline double effective_sparsity(const Matrix& values, double threshold) {
  if (values.size() == 0) throw DimensionError("effective_sparsity: empty matrix");
  const double count = (values.array().abs() > threshold).cast<double>().sum();
  return count / static_cast<double>(values.cols());
}

inline double effective_sparsity(const CoefficientMatrix& x) {
  return effective_sparsity(x.values, x.effective_zero_threshold);
}

/// Same count, but each column is thresholded at `ratio` times its own
/// largest magnitude. Used for enhanced codes, whose sigmoid rows sit on a
/// different scale from the sparse rows.
inline double effective_sparsity_columnwise(const Matrix& values, double ratio = kEffectiveZeroRatio) {
  if (values.size() == 0) throw DimensionError("effective_sparsity: empty matrix");
  double count = 0.0;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const double cut = ratio * values.col(j).cwiseAbs().maxCoeff();
    count += static_cast<double>((values.col(j).array().abs() > cut).count());
  }
  return count / static_cast<double>(values.cols());
}

}  // namespace rvfldl
