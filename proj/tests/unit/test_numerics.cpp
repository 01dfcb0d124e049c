#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "isotori/numerics.hpp"
#include "support/error_kind.hpp"
#include "support/oracles.hpp"

using namespace isotori;

namespace {

ComplexSpectrum spectrum(std::initializer_list<Complex> values) {
  ComplexSpectrum s;
  s.values.assign(values);
  return s;
}

}  // namespace

TEST(Det, IdentityIsOne) { EXPECT_EQ(det(Mat::Identity(3, 3)), 1.0); }

TEST(Det, TwoByTwoIsExact) {
  Mat m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_EQ(det(m), -2.0);
}

TEST(Det, EqualRowsGiveZero) {
  Mat m(3, 3);
  m << 1, 2, 3, 4, 5, 6, 1, 2, 3;
  EXPECT_NEAR(det(m), 0.0, 1e-14);
}

TEST(Det, NonSquareIsDimensionError) {
  EXPECT_EQ(kind_of([] { det(Mat::Zero(2, 3)); }), ErrorKind::dimension);
}

TEST(Det, MatchesCofactorExpansion) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat m = oracles::random_matrix(rng, 5, 5);
    EXPECT_NEAR(det(m), oracles::laplace_det(m), 1e-12);
  }
}

TEST(Det, ProductRule) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat a = oracles::random_matrix(rng, 5, 5), b = oracles::random_matrix(rng, 5, 5);
    const double lhs = det(a * b), rhs = det(a) * det(b);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Eigenvalues, Diagonal) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 2;
  m(1, 1) = 3;
  EXPECT_LT(spectrum_distance(eigenvalues(m), spectrum({2.0, 3.0})), 1e-14);
}

TEST(Eigenvalues, PlanarRotation) {
  const double th = std::numbers::pi / 3;
  Mat r(2, 2);
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  // roots of lambda^2 - 2 cos(th) lambda + 1
  const double c = std::cos(th);
  const Complex root(c, std::sqrt(1.0 - c * c));
  EXPECT_LT(spectrum_distance(eigenvalues(r), spectrum({root, std::conj(root)})), 1e-14);
}

TEST(Eigenvalues, IdentityFour) {
  EXPECT_LT(spectrum_distance(eigenvalues(Mat::Identity(4, 4)), spectrum({1.0, 1.0, 1.0, 1.0})), 1e-15);
}

TEST(Eigenvalues, TraceAndTransposeInvariance) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat m = oracles::random_matrix(rng, 8, 8);
    const auto ev = eigenvalues(m);
    Complex sum = 0.0;
    for (auto z : ev.values) sum += z;
    EXPECT_NEAR(sum.real(), m.trace(), 1e-9 * (1.0 + std::abs(m.trace())));
    EXPECT_NEAR(sum.imag(), 0.0, 1e-9);
    EXPECT_LT(spectrum_distance(ev, eigenvalues(m.transpose())), 1e-8);
  }
}

TEST(Eigenvalues, NonFiniteInputFails) {
  Mat m = Mat::Identity(3, 3);
  m(1, 2) = std::nan("");
  EXPECT_EQ(kind_of([&] { eigenvalues(m); }), ErrorKind::numeric_failure);
}

TEST(SpectrumDistance, SizeMismatchIsInfinite) {
  EXPECT_TRUE(std::isinf(spectrum_distance(spectrum({1.0}), spectrum({1.0, 1.0}))));
  EXPECT_TRUE(spectra_match(spectrum({1.0, 2.0}), spectrum({2.0, 1.0 + 1e-9}), 1e-8));
}

namespace {

void expect_complement(const Mat& cols, const Mat& comp) {
  ASSERT_EQ(comp.rows(), cols.rows());
  ASSERT_EQ(comp.cols(), cols.rows() - cols.cols());
  if (comp.cols() == 0) return;
  EXPECT_LT((comp.transpose() * comp - Mat::Identity(comp.cols(), comp.cols())).cwiseAbs().maxCoeff(), 1e-12);
  if (cols.cols() > 0) {
    EXPECT_LT((comp.transpose() * cols).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace

TEST(OrthonormalComplement, CoordinateAxes) {
  const Mat cols = Mat::Identity(6, 6).leftCols(2);
  const Mat comp = orthonormal_complement(cols);
  expect_complement(cols, comp);
  // spans the last four axes: the projection onto the first two vanishes
  EXPECT_LT(comp.topRows(2).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OrthonormalComplement, FullSpanIsEmpty) {
  EXPECT_EQ(orthonormal_complement(Mat::Identity(4, 4)).cols(), 0);
}

TEST(OrthonormalComplement, RandomFullRank) {
  std::mt19937_64 rng(14);
  for (int k = 0; k <= 6; ++k) {
    const Mat cols = oracles::random_matrix(rng, 6, k);
    expect_complement(cols, orthonormal_complement(cols));
  }
}

TEST(OrthonormalComplement, RankDeficientFails) {
  Mat cols(4, 2);
  cols << 1, 2, 0, 0, 1, 2, 0, 0;
  EXPECT_EQ(kind_of([&] { orthonormal_complement(cols); }), ErrorKind::degenerate_frame);
}

TEST(Newton, IdentityResidual) {
  const auto res = newton_solve([](const Vec& y) { return y; }, Vec::Constant(1, 0.3), 1e-12, 50);
  EXPECT_NEAR(res.root(0), 0.0, 1e-12);
}

TEST(Newton, SquareRootOfTwo) {
  const auto res = newton_solve([](const Vec& y) { return Vec::Constant(1, y(0) * y(0) - 2.0); },
                                Vec::Constant(1, 1.0), 1e-12, 50);
  EXPECT_NEAR(res.root(0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(res.jacobian(0, 0), 2.0 * std::sqrt(2.0), 1e-5);
}

TEST(Newton, ConstantResidualIsDegenerate) {
  EXPECT_EQ(kind_of([] { newton_solve([](const Vec&) { return Vec::Constant(1, 1.0); }, Vec::Zero(1), 1e-10, 50); }),
            ErrorKind::nondegeneracy_failure);
}

TEST(Newton, DivergenceIsNoConvergence) {
  // Newton on the cube root doubles the iterate and flips its sign.
  EXPECT_EQ(kind_of([] {
              newton_solve([](const Vec& y) { return Vec::Constant(1, std::cbrt(y(0))); }, Vec::Constant(1, 0.1),
                           1e-10, 20);
            }),
            ErrorKind::no_convergence);
}

TEST(Newton, LinearSystemInTwoIterations) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat a = oracles::random_matrix(rng, 4, 4) + 4.0 * Mat::Identity(4, 4);
    const Vec b = oracles::random_matrix(rng, 4, 1);
    const auto res = newton_solve([&](const Vec& y) { return Vec(a * y - b); }, Vec::Zero(4), 1e-9, 50);
    EXPECT_LE(res.iterations, 2);
    EXPECT_LT((a * res.root - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ForwardDifference, MatchesAnalyticJacobian) {
  auto f = [](const Vec& y) {
    Vec r(2);
    r << std::sin(y(0)) * y(1), y(0) * y(0);
    return r;
  };
  Vec y(2);
  y << 0.4, -1.3;
  Mat exact(2, 2);
  exact << std::cos(0.4) * -1.3, std::sin(0.4), 0.8, 0.0;
  EXPECT_LT((forward_difference_jacobian(f, y, f(y)) - exact).cwiseAbs().maxCoeff(), 1e-5);
}
