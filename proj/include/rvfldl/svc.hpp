#pragma once

// One-vs-rest soft-margin support-vector classifier with the
// inhomogeneous polynomial kernel (a'b + 1)^degree, trained in the dual by
// pairwise working-set updates with second-order pair selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rvfldl/errors.hpp"
#include "rvfldl/linalg.hpp"

namespace rvfldl {

template <typename A, typename B>
double poly_kernel(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, int degree) {
  if (a.size() != b.size()) throw DimensionError("poly_kernel: vector lengths differ");
  if (degree < 1) throw ConfigError("poly_kernel: degree must be >= 1");
  return std::pow(a.dot(b) + 1.0, degree);
}

struct SVCOptions {
  int degree = 2;
  double reg_C = 1.0;
  double tol = 1e-3;
  long max_pair_updates = 1'000'000;
};

struct SVCModel {
  Matrix support_vectors;          // dim x n_sv (union over all machines)
  std::vector<Vector> dual_coefs;  // per class: alpha_i * y_i over the support vectors
  Vector intercepts;               // per class
  int degree = 2;
  double reg_C = 1.0;
  std::vector<int> class_ids;      // ascending

  std::size_t num_classes() const { return class_ids.size(); }
};

namespace detail {

struct BinaryDual {
  Vector alpha;
  double bias = 0.0;
  long updates = 0;
};

/// Dual SMO for min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij.
inline BinaryDual smo_binary(const Matrix& kernel, const Vector& y, const SVCOptions& opts) {
  constexpr double kTau = 1e-12;
  const Eigen::Index n = y.size();
  const double c = opts.reg_C;
  BinaryDual out;
  out.alpha = Vector::Zero(n);
  Vector& alpha = out.alpha;
  Vector grad = Vector::Constant(n, -1.0);
  const Vector kdiag = kernel.diagonal();

  auto in_up = [&](Eigen::Index t) {
    return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0);
  };
  auto in_low = [&](Eigen::Index t) {
    return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c);
  };

  double gap = std::numeric_limits<double>::infinity();
  for (;;) {
    Eigen::Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] > gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    Eigen::Index j = -1;
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double b = gmax - v;
        double a = kdiag[i] + kdiag[t] - 2.0 * kernel(i, t);
        if (a <= 0) a = kTau;
        const double score = -(b * b) / a;
        if (score < best) {
          best = score;
          j = t;
        }
      }
    }
    gap = gmax - gmin;
    if (i < 0 || j < 0 || gap < opts.tol) break;
    if (out.updates >= opts.max_pair_updates) {
      throw NumericalError("svc_train: no convergence after " + std::to_string(out.updates) +
                           " pair updates (worst KKT violation " + std::to_string(gap) + ")");
    }

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    const double qij = y[i] * y[j] * kernel(i, j);
    if (y[i] != y[j]) {
      double quad = kdiag[i] + kdiag[j] + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
      }
    } else {
      double quad = kdiag[i] + kdiag[j] - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double di = (alpha[i] - old_i) * y[i];
    const double dj = (alpha[j] - old_j) * y[j];
    // grad_t += Q_ti dalpha_i + Q_tj dalpha_j
    grad.array() += y.array() * (kernel.col(i).array() * di + kernel.col(j).array() * dj);
    ++out.updates;
  }

  // rho from free vectors, else midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  long free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  out.bias = -rho;
  return out;
}

inline Matrix poly_gram(const Matrix& codes, int degree) {
  Matrix k = codes.transpose() * codes;
  k.array() += 1.0;
  if (degree != 1) k = k.array().pow(static_cast<double>(degree)).matrix();
  return k;
}

}  // namespace detail

/// Trains one binary machine per class (class vs rest) on the columns of
/// `codes`. With exactly two classes the second machine is the exact
/// negation of the first.
inline SVCModel svc_train(const Matrix& codes, std::span<const int> labels, const SVCOptions& opts = {}) {
  if (static_cast<std::size_t>(codes.cols()) != labels.size()) {
    throw DimensionError("svc_train: " + std::to_string(codes.cols()) + " code columns vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (opts.degree < 1) throw ConfigError("svc_train: degree must be >= 1");
  if (!(opts.reg_C > 0.0)) throw ConfigError("svc_train: reg_C must be > 0");
  if (!(opts.tol > 0.0)) throw ConfigError("svc_train: tol must be > 0");
  const std::set<int> unique(labels.begin(), labels.end());
  if (unique.size() < 2) {
    throw ConfigError("svc_train: one-vs-rest needs at least 2 classes, got " +
                      std::to_string(unique.size()));
  }

  SVCModel model;
  model.degree = opts.degree;
  model.reg_C = opts.reg_C;
  model.class_ids.assign(unique.begin(), unique.end());
  const std::size_t nc = model.class_ids.size();
  const Eigen::Index n = codes.cols();
  const Matrix kernel = detail::poly_gram(codes, opts.degree);

  std::vector<Vector> coef_full(nc);
  model.intercepts.resize(static_cast<Eigen::Index>(nc));
  const std::size_t machines = nc == 2 ? 1 : nc;
  for (std::size_t m = 0; m < machines; ++m) {
    Vector y(n);
    for (Eigen::Index t = 0; t < n; ++t) y[t] = labels[static_cast<std::size_t>(t)] == model.class_ids[m] ? 1.0 : -1.0;
    const detail::BinaryDual dual = detail::smo_binary(kernel, y, opts);
    coef_full[m] = dual.alpha.cwiseProduct(y);
    model.intercepts[static_cast<Eigen::Index>(m)] = dual.bias;
  }
  if (nc == 2) {
    coef_full[1] = -coef_full[0];
    model.intercepts[1] = -model.intercepts[0];
  }

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t) {
    for (std::size_t m = 0; m < nc; ++m) {
      if (coef_full[m][t] != 0.0) {
        sv.push_back(t);
        break;
      }
    }
  }
  const auto nsv = static_cast<Eigen::Index>(sv.size());
  model.support_vectors.resize(codes.rows(), nsv);
  model.dual_coefs.assign(nc, Vector(nsv));
  for (Eigen::Index s = 0; s < nsv; ++s) {
    model.support_vectors.col(s) = codes.col(sv[static_cast<std::size_t>(s)]);
    for (std::size_t m = 0; m < nc; ++m) model.dual_coefs[m][s] = coef_full[m][sv[static_cast<std::size_t>(s)]];
  }
  return model;
}

/// Per-class decision values for every query column (classes x queries).
inline Matrix svc_decision_values(const SVCModel& model, const Matrix& queries) {
  if (queries.rows() != model.support_vectors.rows()) {
    throw DimensionError("svc: query length " + std::to_string(queries.rows()) +
                         " does not match support vector length " +
                         std::to_string(model.support_vectors.rows()));
  }
  Matrix k = model.support_vectors.transpose() * queries;
  k.array() += 1.0;
  if (model.degree != 1) k = k.array().pow(static_cast<double>(model.degree)).matrix();
  const auto nc = static_cast<Eigen::Index>(model.num_classes());
  Matrix scores(nc, queries.cols());
  for (Eigen::Index m = 0; m < nc; ++m) {
    scores.row(m) = model.dual_coefs[static_cast<std::size_t>(m)].transpose() * k;
    scores.row(m).array() += model.intercepts[m];
  }
  return scores;
}

/// Index of the largest entry; ties go to the lowest index.
inline Eigen::Index argmax_lowest(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline int svc_predict(const SVCModel& model, const Vector& x_q) {
  const Matrix scores = svc_decision_values(model, x_q);
  return model.class_ids[static_cast<std::size_t>(argmax_lowest(scores.col(0)))];
}

inline std::vector<int> svc_predict_all(const SVCModel& model, const Matrix& queries) {
  const Matrix scores = svc_decision_values(model, queries);
  std::vector<int> out(static_cast<std::size_t>(queries.cols()));
  for (Eigen::Index j = 0; j < queries.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = model.class_ids[static_cast<std::size_t>(argmax_lowest(scores.col(j)))];
  }
  return out;
}

/// Fast path: class index maximizing (W x_q); ties go to the lowest index.
inline int argmax_label(const Matrix& w, const Vector& x_q) {
  if (w.cols() != x_q.size()) {
    throw DimensionError("argmax_label: W is " + detail::shape(w.rows(), w.cols()) +
                         " but query has length " + std::to_string(x_q.size()));
  }
  if (w.rows() == 0) throw DimensionError("argmax_label: classifier has no rows");
  return static_cast<int>(argmax_lowest(w * x_q));
}

}  // namespace rvfldl
