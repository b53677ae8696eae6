#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "support.hpp"

using namespace rvfldl;
using rvfldl::testing::gaussian;
using rvfldl::testing::objective_by_loops;

namespace {

RidgeSolveOptions exact() {
  RidgeSolveOptions o;
  o.allow_jitter = false;
  return o;
}

Matrix perturbation(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double norm) {
  Matrix p = gaussian(rows, cols, seed);
  return p * (norm / p.norm());
}

}  // namespace

TEST(SolveDictionary, IdentityCodesInterpolate) {
  const Matrix y = gaussian(3, 5, 1);
  EXPECT_LE((solve_dictionary(y, Matrix::Identity(5, 5), 0.0, exact()).values - y).norm(), 1e-14);
}

TEST(SolveDictionary, UnitPenaltyHalves) {
  const Matrix y = gaussian(4, 2, 2);
  EXPECT_LE((solve_dictionary(y, Matrix::Identity(2, 2), 1.0).values - y / 2).norm(), 1e-14);
}

TEST(SolveDictionary, GradientVanishes) {
  const Matrix y = gaussian(4, 10, 3);
  const Matrix x1 = gaussian(6, 10, 4);
  const Matrix d = solve_dictionary(y, x1, 0.2).values;
  const Matrix grad = 2.0 * (d * x1 - y) * x1.transpose() + 2.0 * 0.2 * d;
  EXPECT_LE(grad.norm(), 1e-8 * (1.0 + y.norm()));
  EXPECT_LE(grad.norm(), 1e-8 * (1.0 + y.norm() * x1.norm()));
}

TEST(SolveDictionary, MatchesGradientDescent) {
  const Matrix y = gaussian(4, 10, 3);
  const Matrix x1 = gaussian(6, 10, 4);
  const double mu = 0.2;
  const Matrix h = 2.0 * (x1 * x1.transpose() + mu * Matrix::Identity(6, 6));
  const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().maxCoeff();
  Matrix d = Matrix::Zero(4, 6);
  for (int it = 0; it < 5000; ++it) d -= step * (2.0 * (d * x1 - y) * x1.transpose() + 2.0 * mu * d);
  EXPECT_LE((solve_dictionary(y, x1, mu).values - d).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(SolveDictionary, LocalMinimum) {
  const Matrix y = gaussian(5, 12, 5);
  const Matrix x1 = gaussian(8, 12, 6);
  const LearnedDictionary d = solve_dictionary(y, x1, 0.2);
  const double base = objective_unsupervised(y, d, x1, 0.2);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const LearnedDictionary p{d.values + perturbation(5, 8, 100 + k, 1e-2)};
    EXPECT_GE(objective_unsupervised(y, p, x1, 0.2), base - 1e-12);
  }
}

TEST(SolveDictionary, NormDecreasesWithPenalty) {
  const Matrix y = gaussian(5, 12, 7);
  const Matrix x1 = gaussian(8, 12, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (double mu : {1.0, 10.0, 100.0, 1000.0}) {
    const double n = solve_dictionary(y, x1, mu).values.norm();
    EXPECT_LT(n, prev);
    prev = n;
  }
}

TEST(SolveDictionary, SingularUnpenalizedWarnsOrThrows) {
  const Matrix y = gaussian(3, 4, 9);
  Matrix x1 = gaussian(6, 4, 10);  // rank 4 < 6
  std::vector<std::string> seen;
  auto saved = warning_sink();
  warning_sink() = [&](const std::string& m) { seen.push_back(m); };
  const LearnedDictionary d = solve_dictionary(y, x1, 0.0);
  warning_sink() = saved;
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("eta"), std::string::npos);
  EXPECT_TRUE(d.values.allFinite());
  EXPECT_THROW(solve_dictionary(y, x1, 0.0, exact()), NumericalError);
}

TEST(SolveDictionary, ColumnMismatch) {
  EXPECT_THROW(solve_dictionary(Matrix::Zero(3, 4), Matrix::Zero(5, 6), 0.2), DimensionError);
  EXPECT_THROW(solve_dictionary(Matrix::Zero(3, 4), Matrix::Zero(5, 4), -1.0), ConfigError);
}

TEST(SolveClassifier, Examples) {
  const Matrix h = (Matrix(2, 3) << 1, 0, 1, 0, 1, 0).finished();
  EXPECT_LE((solve_classifier(h, Matrix::Identity(3, 3), 0.0, exact()).values - h).norm(), 1e-14);
  EXPECT_LE((solve_classifier(h, Matrix::Identity(3, 3), 1.0).values - h / 2).norm(), 1e-14);
}

TEST(SolveClassifier, LocalMinimum) {
  const Matrix x1 = gaussian(8, 30, 11);
  Matrix h = Matrix::Zero(3, 30);
  for (Eigen::Index j = 0; j < 30; ++j) h(j % 3, j) = 1.0;
  const Matrix w = solve_classifier(h, x1, 0.2).values;
  auto obj = [&](const Matrix& m) { return (h - m * x1).squaredNorm() + 0.2 * m.squaredNorm(); };
  const double base = obj(w);
  for (std::uint64_t k = 0; k < 100; ++k) EXPECT_GE(obj(w + perturbation(3, 8, 200 + k, 0.01)), base);
}

TEST(UpdateCoefficients, NoLabelTerm) {
  RidgeParams p;
  p.mu3 = 0.0;
  p.eta = 0.01;
  const Matrix y = (Matrix(2, 1) << 1, 1).finished();
  const Matrix x = update_coefficients(y, Matrix::Zero(2, 1), {Matrix::Identity(2, 2)},
                                       {Matrix::Identity(2, 2)}, p);
  EXPECT_NEAR(x(0, 0), 1.0 / 1.01, 1e-14);
  EXPECT_NEAR(x(1, 0), 1.0 / 1.01, 1e-14);
}

TEST(UpdateCoefficients, LabelTermAveragesTargets) {
  RidgeParams p;
  p.mu3 = 1.0;
  p.eta = 1e-12;
  const Matrix y = gaussian(3, 4, 12);
  const Matrix x = update_coefficients(y, y, {Matrix::Identity(3, 3)}, {Matrix::Identity(3, 3)}, p);
  EXPECT_LE((x - y).norm(), 1e-10);
}

TEST(UpdateCoefficients, ResidualAndStationarity) {
  RidgeParams p;
  const Matrix y = gaussian(5, 6, 13);
  const Matrix d = gaussian(5, 8, 14);
  const Matrix w = gaussian(3, 8, 15);
  Matrix h = Matrix::Zero(3, 6);
  for (Eigen::Index j = 0; j < 6; ++j) h(j % 3, j) = 1.0;
  const Matrix x = update_coefficients(y, h, {d}, {w}, p);

  const Matrix a = d.transpose() * d + p.mu3 * w.transpose() * w + p.eta * Matrix::Identity(8, 8);
  const Matrix rhs = d.transpose() * y + p.mu3 * w.transpose() * h;
  EXPECT_LE((a * x - rhs).norm(), 1e-9 * rhs.norm());

  // eta is the jitter of the solve, so the stationary objective carries eta ||X||^2 too
  auto obj = [&](const Matrix& m) {
    return objective_joint(y, h, {d}, {w}, m, p) + p.eta * m.squaredNorm();
  };
  const double step = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix plus = x, minus = x;
    plus.data()[i] += step;
    minus.data()[i] -= step;
    worst = std::max(worst, std::abs(obj(plus) - obj(minus)) / (2.0 * step));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(UpdateCoefficients, DimensionMismatch) {
  RidgeParams p;
  EXPECT_THROW(update_coefficients(Matrix::Zero(4, 2), Matrix::Zero(2, 2), {Matrix::Zero(3, 5)},
                                   {Matrix::Zero(2, 5)}, p),
               DimensionError);
  EXPECT_THROW(update_coefficients(Matrix::Zero(3, 2), Matrix::Zero(2, 2), {Matrix::Zero(3, 5)},
                                   {Matrix::Zero(2, 4)}, p),
               DimensionError);
}

TEST(CodeQuery, Examples) {
  RidgeParams p;
  p.mu3 = 0.0;
  const Vector y = (Vector(3) << 1, -2, 3).finished();
  EXPECT_LE((code_query(y, {Matrix::Identity(3, 3)}, {}, p) - y / 1.01).norm(), 1e-14);
  EXPECT_EQ(code_query(Vector::Zero(3), {gaussian(3, 5, 1)}, {gaussian(2, 5, 2)}, RidgeParams{}),
            Vector::Zero(5));
}

TEST(CodeQuery, MatchesUpdateWithoutLabels) {
  RidgeParams p;
  const Matrix d = gaussian(6, 9, 16);
  const Matrix w = gaussian(4, 9, 17);
  const Vector y = gaussian(6, 1, 18).col(0);
  const Vector q = code_query(y, {d}, {w}, p);
  // zero H drops the label term from the right-hand side, the W'W term stays
  const Matrix u = update_coefficients(y, Matrix::Zero(4, 1), {d}, {w}, p);
  EXPECT_LE((q - u.col(0)).norm(), 1e-12 * (1.0 + q.norm()));
}

TEST(CodeQuery, WrongLength) {
  EXPECT_THROW(code_query(Vector::Zero(4), {Matrix::Identity(3, 3)}, {}, RidgeParams{}),
               DimensionError);
}

TEST(DualRidge, MatchesPrimalForm) {
  const Matrix d = gaussian(5, 9, 19);
  const Matrix y = gaussian(5, 3, 20);
  const Matrix dual = dual_ridge_coefficients(y, {d}, 0.2);
  const Matrix primal =
      (d.transpose() * d + 0.2 * Matrix::Identity(9, 9)).ldlt().solve(d.transpose() * y);
  EXPECT_LE((dual - primal).norm(), 1e-10 * primal.norm());
}

TEST(Objectives, UnsupervisedExamples) {
  const Matrix y = gaussian(3, 4, 21);
  EXPECT_EQ(objective_unsupervised(y, {y}, Matrix::Identity(4, 4), 0.0), 0.0);
  EXPECT_NEAR(objective_unsupervised(y, {Matrix::Zero(3, 5)}, gaussian(5, 4, 22), 0.3),
              y.squaredNorm(), 1e-14);
}

TEST(Objectives, UnsupervisedMatchesLoops) {
  const Matrix y = gaussian(4, 7, 23);
  const Matrix d = gaussian(4, 6, 24);
  const Matrix x = gaussian(6, 7, 25);
  const double want = objective_by_loops(y, d, x, 0.2);
  EXPECT_NEAR(objective_unsupervised(y, {d}, x, 0.2), want, 1e-12 * want);
}

TEST(Objectives, JointExamples) {
  RidgeParams p;
  EXPECT_EQ(objective_joint(Matrix::Zero(2, 3), Matrix::Zero(2, 3), {Matrix::Zero(2, 4)},
                            {Matrix::Zero(2, 4)}, Matrix::Zero(4, 3), p),
            0.0);
  p.mu3 = 0.0;
  const Matrix y = gaussian(3, 5, 26), d = gaussian(3, 4, 27), x = gaussian(4, 5, 28);
  const Matrix w = gaussian(2, 4, 29), h = gaussian(2, 5, 30);
  EXPECT_NEAR(objective_joint(y, h, {d}, {w}, x, p),
              objective_unsupervised(y, {d}, x, p.mu1) + p.mu2 * w.squaredNorm(), 1e-12);
}

TEST(Objectives, JointMatchesLoops) {
  RidgeParams p;
  const Matrix y = gaussian(3, 5, 31), d = gaussian(3, 4, 32), x = gaussian(4, 5, 33);
  const Matrix w = gaussian(2, 4, 34), h = gaussian(2, 5, 35);
  double want = objective_by_loops(y, d, x, p.mu1);
  // label term: ||H - W X||^2 + (mu2/mu3) ||W||^2, scaled by mu3
  want += p.mu3 * objective_by_loops(h, w, x, p.mu2 / p.mu3);
  EXPECT_NEAR(objective_joint(y, h, {d}, {w}, x, p), want, 1e-12 * want);
}
