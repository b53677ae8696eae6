#pragma once

// Symmetric positive-definite factorizations shared by the coding and
// RVFL solve stages. Only Cholesky (LLT) is used; nothing here depends on
// a singular-value routine.

#include <array>
#include <cmath>
#include <functional>
#include <iostream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rvfldl/errors.hpp"

namespace rvfldl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Warning sink. Defaults to stderr; tests and the CLI may redirect it.
inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

inline void log_warning(const std::string& msg) {
  if (warning_sink()) warning_sink()(msg);
}

/// Diagonal jitter escalation. Steps are multiplied by the mean absolute
/// diagonal of the matrix (or 1 when that is zero).
struct JitterPolicy {
  bool try_unjittered_first = true;
  std::array<double, 3> steps{1e-10, 1e-8, 1e-6};
};

struct SpdFactor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;  // absolute value added to the diagonal

  Matrix solve(const Matrix& rhs) const { return llt.solve(rhs); }
  Matrix lower() const { return llt.matrixL(); }
};

namespace detail {

inline double diagonal_scale(const Matrix& a) {
  if (a.rows() == 0) return 1.0;
  const double s = a.diagonal().cwiseAbs().mean();
  return (s > 0.0 && std::isfinite(s)) ? s : 1.0;
}

inline bool factor_ok(const Eigen::LLT<Matrix>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto& lu = llt.matrixLLT();
  for (Eigen::Index i = 0; i < lu.rows(); ++i) {
    const double p = lu(i, i);
    if (!(p > 0.0) || !std::isfinite(p)) return false;
  }
  return true;
}

}  // namespace detail

/// Cholesky of a symmetric matrix, escalating diagonal jitter on failure.
/// Throws NumericalError naming `what` when every attempt fails.
inline SpdFactor factor_spd(const Matrix& a, const JitterPolicy& policy = {},
                            const std::string& what = "matrix") {
  if (a.rows() != a.cols()) {
    throw DimensionError(what + ": SPD factorization needs a square matrix, got " +
                         detail::shape(a.rows(), a.cols()));
  }
  SpdFactor f;
  if (policy.try_unjittered_first) {
    f.llt.compute(a);
    if (detail::factor_ok(f.llt)) return f;
  }
  const double scale = detail::diagonal_scale(a);
  for (double step : policy.steps) {
    f.jitter = step * scale;
    Matrix shifted = a;
    shifted.diagonal().array() += f.jitter;
    f.llt.compute(shifted);
    if (detail::factor_ok(f.llt)) return f;
  }
  throw NumericalError(what + ": not positive definite after jitter escalation up to " +
                       std::to_string(policy.steps.back()) + " x mean diagonal");
}

/// Inverse of an SPD matrix through its Cholesky factor, symmetrized.
inline Matrix spd_inverse(const Matrix& a, const JitterPolicy& policy = {},
                          const std::string& what = "matrix") {
  const SpdFactor f = factor_spd(a, policy, what);
  Matrix inv = f.solve(Matrix::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

inline void require_same_cols(const Matrix& a, const Matrix& b, const char* op,
                              const char* a_name, const char* b_name) {
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": column counts differ (" + a_name + " is " +
                         detail::shape(a.rows(), a.cols()) + ", " + b_name + " is " +
                         detail::shape(b.rows(), b.cols()) + ")");
  }
}

}  // namespace rvfldl
