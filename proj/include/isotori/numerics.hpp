#pragma once

// Small dense linear algebra and root finding. Matrices here are at most
// 2n x 2n with n around 10, so everything is dense and unblocked.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isotori/error.hpp"

namespace isotori {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;
using Complex = std::complex<double>;

/// Eigenvalues of a real matrix, listed with multiplicity.
struct ComplexSpectrum {
  std::vector<Complex> values;

  std::size_t size() const noexcept { return values.size(); }
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline double max_abs(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline double det(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::dimension, "det of a " + std::to_string(m.rows()) + "x" +
                                          std::to_string(m.cols()) + " matrix");
  }
  switch (m.rows()) {
    case 0: return 1.0;
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    default: return m.partialPivLu().determinant();
  }
}

/// Hessenberg reduction followed by shifted (Francis) QR sweeps.
inline ComplexSpectrum eigenvalues(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::dimension, "eigenvalues of a non-square matrix");
  }
  if (!all_finite(m)) throw Error(ErrorKind::numeric_failure, "eigenvalues of a non-finite matrix");
  ComplexSpectrum out;
  if (m.rows() == 0) return out;
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::numeric_failure, "QR iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();
  out.values.assign(ev.data(), ev.data() + ev.size());
  return out;
}

inline Eigen::VectorXd singular_values(const Mat& m) {
  if (m.size() == 0) return Vec{};
  return Eigen::JacobiSVD<Mat>(m).singularValues();
}

/// 2-norm condition number; +inf for exactly singular input.
inline double condition_number(const Mat& m) {
  if (m.size() == 0) return 1.0;
  const Vec sv = singular_values(m);
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0 || !std::isfinite(smin)) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

/// Orthonormal basis of the orthogonal complement of the column span.
inline Mat orthonormal_complement(const Mat& columns) {
  const auto d = columns.rows();
  const auto k = columns.cols();
  if (k > d) throw Error(ErrorKind::dimension, "more columns than rows in frame");
  if (k == 0) return Mat::Identity(d, d);
  const Vec sv = singular_values(columns);
  if (!(sv(k - 1) > 1e-10 * sv(0))) {
    throw Error(ErrorKind::degenerate_frame, "frame columns are numerically dependent");
  }
  Eigen::HouseholderQR<Mat> qr(columns);
  const Mat q = qr.householderQ() * Mat::Identity(d, d);
  return q.rightCols(d - k);
}

/// Greedy minimal-distance pairing of two multisets of complex numbers.
/// Returns the largest matched distance, or +inf when the sizes differ.
inline double spectrum_distance(const ComplexSpectrum& a, const ComplexSpectrum& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  struct Pair {
    double dist;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  pairs.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) pairs.push_back({std::abs(a.values[i] - b.values[j]), i, j});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.dist < y.dist; });
  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
  double worst = 0.0;
  std::size_t matched = 0;
  for (const auto& p : pairs) {
    if (used_a[p.i] || used_b[p.j]) continue;
    used_a[p.i] = used_b[p.j] = true;
    worst = std::max(worst, p.dist);
    if (++matched == a.size()) break;
  }
  return worst;
}

inline bool spectra_match(const ComplexSpectrum& a, const ComplexSpectrum& b, double tol) {
  return spectrum_distance(a, b) < tol;
}

using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

/// Forward differences, step 1e-6 * (1 + |y_j|) per coordinate.
inline Mat forward_difference_jacobian(const ResidualFn& f, const Vec& y, const Vec& fy) {
  Mat jac(fy.size(), y.size());
  Vec yp = y;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(y(j)));
    yp(j) = y(j) + h;
    jac.col(j) = (f(yp) - fy) / h;
    yp(j) = y(j);
  }
  return jac;
}

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  double max_condition = 1e12;
};

struct NewtonResult {
  Vec root;
  Mat jacobian;  // evaluated at root
  double residual = 0.0;
  int iterations = 0;
  double condition = 1.0;
};

/// Plain Newton iteration. The Jacobian is formed (and its conditioning
/// checked) at every iterate including the returned root.
inline NewtonResult newton_solve(const ResidualFn& residual, const Vec& guess, const NewtonOptions& opts = {},
                                 const JacobianFn& jacobian = {}) {
  NewtonResult out;
  out.root = guess;
  for (int it = 0;; ++it) {
    const Vec r = residual(out.root);
    if (!all_finite(r)) throw Error(ErrorKind::no_convergence, "residual became non-finite");
    out.residual = max_abs(r);
    out.jacobian = jacobian ? jacobian(out.root) : forward_difference_jacobian(residual, out.root, r);
    out.iterations = it;
    out.condition = condition_number(out.jacobian);
    if (!(out.condition <= opts.max_condition)) {
      throw Error(ErrorKind::nondegeneracy_failure,
                  "Jacobian is numerically singular (condition " + std::to_string(out.condition) + ")");
    }
    if (out.residual < opts.tol) return out;
    if (it >= opts.max_iter) {
      throw Error(ErrorKind::no_convergence, "Newton did not converge in " + std::to_string(opts.max_iter) +
                                                 " iterations (residual " + std::to_string(out.residual) + ")");
    }
    out.root -= out.jacobian.partialPivLu().solve(r);
  }
}

inline NewtonResult newton_solve(const ResidualFn& residual, const Vec& guess, double tol, int max_iter) {
  NewtonOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return newton_solve(residual, guess, opts);
}

}  // namespace isotori
