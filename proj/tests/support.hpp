#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rvfldl/rvfldl.hpp"

namespace rvfldl::testing {

/// Independent RNG for fixtures, deliberately not the library's stream.
inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(gen);
  return m;
}

struct Blobs {
  Matrix data;
  std::vector<int> labels;
};

/// Two Gaussian classes in `dim` dimensions centred at +-separation per
/// coordinate, unit spread, alternating labels.
inline Blobs make_blobs(Eigen::Index n, Eigen::Index dim, std::uint64_t seed, double separation = 1.0) {
  Blobs b;
  b.data = gaussian(dim, n, seed);
  b.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const int label = static_cast<int>(j % 2);
    b.labels[static_cast<std::size_t>(j)] = label;
    b.data.col(j).array() += label == 0 ? separation : -separation;
  }
  return b;
}

struct Planted {
  Matrix dictionary;  // d x atoms, unit columns
  Matrix codes;       // atoms x n, `active` nonzeros per column
  Matrix data;        // dictionary * codes
};

inline Planted make_planted(Eigen::Index d, Eigen::Index atoms, Eigen::Index n, int active,
                            std::uint64_t seed) {
  Planted p;
  p.dictionary = gaussian(d, atoms, seed);
  for (Eigen::Index k = 0; k < atoms; ++k) p.dictionary.col(k).normalize();
  std::mt19937_64 gen(seed + 1);
  std::uniform_int_distribution<Eigen::Index> pick(0, atoms - 1);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  p.codes = Matrix::Zero(atoms, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    int placed = 0;
    while (placed < active) {
      const Eigen::Index k = pick(gen);
      if (p.codes(k, j) != 0.0) continue;
      p.codes(k, j) = (sign(gen) ? 1.0 : -1.0) * mag(gen);
      ++placed;
    }
  }
  p.data = p.dictionary * p.codes;
  return p;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rvfldl-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Samples as CSV rows, optional trailing label column.
inline std::string to_csv(const Matrix& data, const std::vector<int>* labels = nullptr) {
  std::string out;
  char buf[40];
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", data(i, j));
      if (i) out += ',';
      out += buf;
    }
    if (labels) out += "," + std::to_string((*labels)[static_cast<std::size_t>(j)]);
    out += '\n';
  }
  return out;
}

/// ||Y - D X||^2 + mu ||D||^2 by explicit summation.
inline double objective_by_loops(const Matrix& y, const Matrix& d, const Matrix& x, double mu) {
  double fit = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      double r = y(i, j);
      for (Eigen::Index k = 0; k < d.cols(); ++k) r -= d(i, k) * x(k, j);
      fit += r * r;
    }
  }
  double pen = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index k = 0; k < d.cols(); ++k) pen += d(i, k) * d(i, k);
  return fit + mu * pen;
}

}  // namespace rvfldl::testing
