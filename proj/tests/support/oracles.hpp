#pragma once

// Independent reference values for the tests. Nothing here calls into the
// library's numerical kernels: determinants by cofactor expansion, flows of
// linear oscillators in closed form, actions of the model Hamiltonians from the
// quadratic formula.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "isotori/hamiltonian.hpp"
#include "isotori/numerics.hpp"

namespace oracles {

using isotori::Mat;
using isotori::Vec;

inline double laplace_det(const Mat& m) {
  const auto n = m.rows();
  if (n == 0) return 1.0;
  if (n == 1) return m(0, 0);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Mat minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r)
      for (Eigen::Index c = 0, cc = 0; c < n; ++c)
        if (c != j) minor(r - 1, cc++) = m(r, c);
    sum += (j % 2 == 0 ? 1.0 : -1.0) * m(0, j) * laplace_det(minor);
  }
  return sum;
}

/// Solution of the 2x2 system m x = b by Cramer's rule.
inline Vec cramer2(const Mat& m, const Vec& b) {
  const double d = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Vec x(2);
  x << (b(0) * m(1, 1) - m(0, 1) * b(1)) / d, (m(0, 0) * b(1) - b(0) * m(1, 0)) / d;
  return x;
}

/// Flow of F = omega (q^2 + p^2) / 2 in the (q, p) convention:
/// q' = omega p, p' = -omega q, a clockwise rotation by omega t.
inline Vec oscillator_flow(double omega, const Vec& x0, double t) {
  const double c = std::cos(omega * t), s = std::sin(omega * t);
  Vec x(2);
  x << c * x0(0) + s * x0(1), -s * x0(0) + c * x0(1);
  return x;
}

/// Same rotation acting on the plane (q_j, p_j) of R^{2n}.
inline Mat plane_rotation(std::size_t n, std::size_t j, double angle) {
  Mat r = Mat::Identity(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(2 * n));
  const auto q = static_cast<Eigen::Index>(j), p = static_cast<Eigen::Index>(n + j);
  r(q, q) = std::cos(angle);
  r(q, p) = std::sin(angle);
  r(p, q) = -std::sin(angle);
  r(p, p) = std::cos(angle);
  return r;
}

/// F = omega (q^2 + p^2) / 2 with analytic derivatives, n = s = 1.
inline isotori::HamiltonianSystem harmonic_oscillator(double omega) {
  return isotori::HamiltonianSystem(
      1, 1, [omega](std::size_t, const Vec& x, double) { return 0.5 * omega * x.squaredNorm(); },
      [omega](std::size_t, const Vec& x, double) { return Vec(omega * x); },
      [omega](std::size_t, const Vec&, double) { return Mat(omega * Mat::Identity(2, 2)); });
}

/// action_oscillators actions from its levels: F_1 = sum omega_j I_j + eps sum a_j I_j^2,
/// F_i = I_i for i >= 2, transverse actions zero.
inline std::vector<double> system_a_actions(const std::vector<double>& omega, const std::vector<double>& a,
                                            const Vec& beta, double eps) {
  const std::size_t s = static_cast<std::size_t>(beta.size());
  std::vector<double> actions(s);
  double rest = 0.0;
  for (std::size_t i = 1; i < s; ++i) {
    actions[i] = beta(static_cast<Eigen::Index>(i));
    rest += omega[i] * actions[i] + eps * a[i] * actions[i] * actions[i];
  }
  const double c = beta(0) - rest;
  if (eps == 0.0 || a[0] == 0.0) {
    actions[0] = c / omega[0];
  } else {
    // eps a I^2 + omega I - c = 0, root continuous at eps -> 0
    const double qa = eps * a[0];
    actions[0] = (-omega[0] + std::sqrt(omega[0] * omega[0] + 4.0 * qa * c)) / (2.0 * qa);
  }
  return actions;
}

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline std::complex<double> unit_phase(double turns) {
  return std::polar(1.0, 2.0 * std::numbers::pi * turns);
}

}  // namespace oracles
