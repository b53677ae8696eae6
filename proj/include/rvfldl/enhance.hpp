#pragma once

// Random functional-link expansion X1 = [X; g(W X + b 1')].

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "rvfldl/errors.hpp"
#include "rvfldl/linalg.hpp"
#include "rvfldl/random.hpp"

namespace rvfldl {

enum class Activation { kSigmoid };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

/// Overflow-free logistic, saturated so the result stays inside (0,1)
/// even where the exact value rounds to 0 or 1.
inline double sigmoid(double t) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  double v;
  if (t >= 0.0) {
    v = 1.0 / (1.0 + std::exp(-t));
  } else {
    const double e = std::exp(t);
    v = e / (1.0 + e);
  }
  return std::clamp(v, lo, hi);
}

/// Fixed random hidden layer. Immutable once built.
class EnhancementMap {
 public:
  EnhancementMap(Matrix weights, Vector biases, Activation activation = Activation::kSigmoid)
      : weights_(std::move(weights)), biases_(std::move(biases)), activation_(activation) {
    if (weights_.rows() != biases_.size()) {
      throw DimensionError("enhancement map: " + std::to_string(weights_.rows()) +
                           " weight rows but " + std::to_string(biases_.size()) + " biases");
    }
  }

  const Matrix& weights() const { return weights_; }
  const Vector& biases() const { return biases_; }
  Activation activation() const { return activation_; }
  Eigen::Index input_dim() const { return weights_.cols(); }   // K
  Eigen::Index output_dim() const { return weights_.rows(); }  // L

 private:
  Matrix weights_;  // L x K
  Vector biases_;   // L
  Activation activation_;
};

struct EnhancedMatrix {
  Matrix values;  // (K+L) x N
  Eigen::Index base_rows = 0;
  Eigen::Index enhanced_rows = 0;
};

/// Weights drawn row-major (row 0 first), then the biases, all N(0,1).
inline EnhancementMap init_enhancement(Eigen::Index atoms, Eigen::Index nodes, RandomStream& stream) {
  if (atoms < 1 || nodes < 1) throw ConfigError("init_enhancement needs K >= 1 and L >= 1");
  const Vector flat = sample_standard_normal(stream, atoms * nodes);
  Matrix weights(nodes, atoms);
  for (Eigen::Index r = 0; r < nodes; ++r) {
    weights.row(r) = flat.segment(r * atoms, atoms).transpose();
  }
  Vector biases = sample_standard_normal(stream, nodes);
  return EnhancementMap(std::move(weights), std::move(biases));
}

inline EnhancedMatrix enhance(const Matrix& x, const EnhancementMap& map) {
  if (x.rows() != map.input_dim()) {
    throw DimensionError("enhance: coefficients have " + std::to_string(x.rows()) +
                         " rows, map expects " + std::to_string(map.input_dim()));
  }
  const Eigen::Index k = x.rows();
  const Eigen::Index l = map.output_dim();
  EnhancedMatrix out;
  out.base_rows = k;
  out.enhanced_rows = l;
  out.values.resize(k + l, x.cols());
  out.values.topRows(k) = x;
  Matrix pre = map.weights() * x;
  pre.colwise() += map.biases();
  out.values.bottomRows(l) = pre.unaryExpr([](double t) { return sigmoid(t); });
  return out;
}

}  // namespace rvfldl
