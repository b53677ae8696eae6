#pragma once

// Closed-form ridge solves for the learned dictionary, the classifier and
// the coefficient updates, plus the objectives they minimize. Every solve
// is one Cholesky factorization of a ridge-shifted Gram matrix.

#include <string>

#include <Eigen/Core>

#include "rvfldl/errors.hpp"
#include "rvfldl/horseshoe.hpp"
#include "rvfldl/linalg.hpp"

namespace rvfldl {

struct LearnedDictionary {
  Matrix values;  // d x (K+L)
};

/// c x (K+L). A 0-row matrix stands for "no classifier" (unsupervised).
struct ClassifierMatrix {
  Matrix values;
  bool empty() const { return values.rows() == 0; }
};

struct LabelMatrix {
  Matrix values;  // c x N one-hot
};

struct RidgeParams {
  double mu1 = 0.2;
  double mu2 = 0.2;
  double mu3 = 0.1;
  double eta = kDefaultEta;

  void validate() const {
    if (!(mu1 >= 0.0) || !(mu2 >= 0.0) || !(mu3 >= 0.0)) {
      throw ConfigError("mu1, mu2, mu3 must be >= 0");
    }
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  }
};

struct RidgeSolveOptions {
  double eta = kDefaultEta;   // fallback shift when the penalty is 0 and the Gram is singular
  bool allow_jitter = true;   // false: fail instead of shifting a singular unpenalized Gram
};

namespace detail {

/// target * codes' * (codes codes' + penalty I)^-1
inline Matrix right_ridge_solve(const Matrix& target, const Matrix& codes, double penalty,
                                const RidgeSolveOptions& opts, const char* what) {
  if (!(penalty >= 0.0)) throw ConfigError(std::string(what) + ": penalty must be >= 0");
  Matrix gram = codes * codes.transpose();
  gram.diagonal().array() += penalty;
  const Matrix rhs = codes * target.transpose();

  JitterPolicy policy;
  if (penalty == 0.0) {
    Eigen::LLT<Matrix> llt(gram);
    if (factor_ok(llt)) return llt.solve(rhs).transpose();
    if (!opts.allow_jitter) {
      throw NumericalError(std::string(what) + ": Gram matrix is singular and jitter is disabled");
    }
    log_warning(std::string(what) + ": penalty is 0 and the Gram matrix is singular; adding eta=" +
                std::to_string(opts.eta) + " to the diagonal");
    gram.diagonal().array() += opts.eta;
  }
  return factor_spd(gram, policy, what).solve(rhs).transpose();
}

inline void check_codes_target(const Matrix& target, const Matrix& codes, const char* op,
                               const char* target_name) {
  require_same_cols(target, codes, op, target_name, "X1");
}

}  // namespace detail

/// D1 = Y X1' (X1 X1' + mu1 I)^-1
inline LearnedDictionary solve_dictionary(const Matrix& y, const Matrix& x1, double mu1,
                                          const RidgeSolveOptions& opts = {}) {
  detail::check_codes_target(y, x1, "solve_dictionary", "Y");
  return {detail::right_ridge_solve(y, x1, mu1, opts, "solve_dictionary")};
}

/// W = H X1' (X1 X1' + mu2 I)^-1; the penalty on W is mu2.
inline ClassifierMatrix solve_classifier(const Matrix& h, const Matrix& x1, double mu2,
                                         const RidgeSolveOptions& opts = {}) {
  detail::check_codes_target(h, x1, "solve_classifier", "H");
  return {detail::right_ridge_solve(h, x1, mu2, opts, "solve_classifier")};
}

namespace detail {

inline void check_model_shapes(const LearnedDictionary& d1, const ClassifierMatrix& w,
                               const char* op) {
  if (!w.empty() && w.values.cols() != d1.values.cols()) {
    throw DimensionError(std::string(op) + ": W is " + shape(w.values.rows(), w.values.cols()) +
                         " but D1 is " + shape(d1.values.rows(), d1.values.cols()));
  }
}

inline SpdFactor coding_system(const LearnedDictionary& d1, const ClassifierMatrix& w,
                               const RidgeParams& params) {
  Matrix a = d1.values.transpose() * d1.values;
  if (!w.empty() && params.mu3 != 0.0) a.noalias() += params.mu3 * (w.values.transpose() * w.values);
  a.diagonal().array() += params.eta;
  return factor_spd(a, {}, "coefficient system");
}

}  // namespace detail

/// X1 = (D1'D1 + mu3 W'W + eta I)^-1 (D1'Y + mu3 W'H)
inline Matrix update_coefficients(const Matrix& y, const Matrix& h, const LearnedDictionary& d1,
                                  const ClassifierMatrix& w, const RidgeParams& params) {
  params.validate();
  detail::check_model_shapes(d1, w, "update_coefficients");
  if (y.rows() != d1.values.rows()) {
    throw DimensionError("update_coefficients: Y is " + detail::shape(y.rows(), y.cols()) +
                         " but D1 is " + detail::shape(d1.values.rows(), d1.values.cols()));
  }
  Matrix rhs = d1.values.transpose() * y;
  if (!w.empty() && params.mu3 != 0.0) {
    if (h.rows() != w.values.rows() || h.cols() != y.cols()) {
      throw DimensionError("update_coefficients: H is " + detail::shape(h.rows(), h.cols()) +
                           ", expected " + detail::shape(w.values.rows(), y.cols()));
    }
    rhs.noalias() += params.mu3 * (w.values.transpose() * h);
  }
  return detail::coding_system(d1, w, params).solve(rhs);
}

/// Query codes, one per column of `queries`:
///   x_q = (D1'D1 + mu3 W'W + eta I)^-1 D1' y_q
inline Matrix code_queries(const Matrix& queries, const LearnedDictionary& d1,
                           const ClassifierMatrix& w, const RidgeParams& params) {
  params.validate();
  detail::check_model_shapes(d1, w, "code_query");
  if (queries.rows() != d1.values.rows()) {
    throw DimensionError("code_query: query length " + std::to_string(queries.rows()) +
                         " does not match dictionary dimension " +
                         std::to_string(d1.values.rows()));
  }
  return detail::coding_system(d1, w, params).solve(d1.values.transpose() * queries);
}

inline Vector code_query(const Vector& y_q, const LearnedDictionary& d1, const ClassifierMatrix& w,
                         const RidgeParams& params) {
  return code_queries(y_q, d1, w, params).col(0);
}

/// Unsupervised coefficient refresh D1' (D1 D1' + mu1 I)^-1 Y.
inline Matrix dual_ridge_coefficients(const Matrix& y, const LearnedDictionary& d1, double mu1,
                                      const RidgeSolveOptions& opts = {}) {
  if (y.rows() != d1.values.rows()) {
    throw DimensionError("dual_ridge_coefficients: Y is " + detail::shape(y.rows(), y.cols()) +
                         " but D1 is " + detail::shape(d1.values.rows(), d1.values.cols()));
  }
  Matrix gram = d1.values * d1.values.transpose();
  gram.diagonal().array() += (mu1 > 0.0 ? mu1 : opts.eta);
  return d1.values.transpose() * factor_spd(gram, {}, "dual ridge gram").solve(y);
}

/// ||Y - D1 X1||_F^2 + mu1 ||D1||_F^2
inline double objective_unsupervised(const Matrix& y, const LearnedDictionary& d1, const Matrix& x1,
                                     double mu1) {
  if (d1.values.cols() != x1.rows() || d1.values.rows() != y.rows() || x1.cols() != y.cols()) {
    throw DimensionError("objective_unsupervised: inconsistent shapes");
  }
  return (y - d1.values * x1).squaredNorm() + mu1 * d1.values.squaredNorm();
}

/// ||Y - D1 X1||^2 + mu3 ||H - W X1||^2 + mu1 ||D1||^2 + mu2 ||W||^2
inline double objective_joint(const Matrix& y, const Matrix& h, const LearnedDictionary& d1,
                              const ClassifierMatrix& w, const Matrix& x1,
                              const RidgeParams& params) {
  double value = objective_unsupervised(y, d1, x1, params.mu1);
  if (w.values.size() != 0 || h.size() != 0) {
    if (w.values.cols() != x1.rows() || h.rows() != w.values.rows() || h.cols() != x1.cols()) {
      throw DimensionError("objective_joint: inconsistent H/W shapes");
    }
    value += params.mu3 * (h - w.values * x1).squaredNorm() + params.mu2 * w.values.squaredNorm();
  }
  return value;
}

}  // namespace rvfldl
