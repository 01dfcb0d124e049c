#pragma once

// Systems of s commuting integrals F_1..F_s on R^{2n}.
//
// Coordinates are x = (q_1..q_n, p_1..p_n) and the symplectic matrix is
// J = [[0, I], [-I, 0]], so the Hamiltonian vector field of F is J grad F:
// qdot_j = dF/dp_j, pdot_j = -dF/dq_j. Integral indices are zero-based.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "isotori/error.hpp"
#include "isotori/numerics.hpp"

namespace isotori {

/// J = [[0, I], [-I, 0]] in (q, p) ordering.
inline Mat symplectic_matrix(std::size_t n) {
  const auto d = static_cast<Eigen::Index>(n);
  Mat j = Mat::Zero(2 * d, 2 * d);
  j.topRightCorner(d, d) = Mat::Identity(d, d);
  j.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
  return j;
}

/// J * v without forming J.
inline Vec apply_symplectic(const Vec& v) {
  const auto n = v.size() / 2;
  Vec out(v.size());
  out.head(n) = v.tail(n);
  out.tail(n) = -v.head(n);
  return out;
}

inline Mat apply_symplectic(const Mat& m) {
  const auto n = m.rows() / 2;
  Mat out(m.rows(), m.cols());
  out.topRows(n) = m.bottomRows(n);
  out.bottomRows(n) = -m.topRows(n);
  return out;
}

class HamiltonianSystem {
 public:
  using ValueFn = std::function<double(std::size_t, const Vec&, double)>;
  using GradientFn = std::function<Vec(std::size_t, const Vec&, double)>;
  using HessianFn = std::function<Mat(std::size_t, const Vec&, double)>;

  HamiltonianSystem(std::size_t n, std::size_t s, ValueFn value, GradientFn gradient, HessianFn hessian = {})
      : n_(n), s_(s), value_(std::move(value)), gradient_(std::move(gradient)), hessian_(std::move(hessian)) {
    if (n == 0 || s == 0 || s > n) {
      throw Error(ErrorKind::invalid_spec, "need 1 <= s <= n (got n=" + std::to_string(n) +
                                               ", s=" + std::to_string(s) + ")");
    }
    if (!value_ || !gradient_) throw Error(ErrorKind::invalid_spec, "value and gradient callables are required");
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t s() const noexcept { return s_; }
  std::size_t dim() const noexcept { return 2 * n_; }
  bool has_analytic_hessian() const noexcept { return static_cast<bool>(hessian_); }

  double value(std::size_t i, const Vec& x, double eps) const {
    check(i, x);
    return value_(i, x, eps);
  }

  Vec gradient(std::size_t i, const Vec& x, double eps) const {
    check(i, x);
    return gradient_(i, x, eps);
  }

  /// Analytic when supplied, otherwise central differences of the gradient.
  Mat hessian(std::size_t i, const Vec& x, double eps) const {
    check(i, x);
    if (hessian_) return hessian_(i, x, eps);
    const auto d = x.size();
    Mat h(d, d);
    Vec xp = x;
    for (Eigen::Index k = 0; k < d; ++k) {
      const double step = 1e-5 * (1.0 + std::abs(x(k)));
      xp(k) = x(k) + step;
      const Vec gp = gradient_(i, xp, eps);
      xp(k) = x(k) - step;
      const Vec gm = gradient_(i, xp, eps);
      xp(k) = x(k);
      h.col(k) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
  }

  /// F_eps(x) as a vector of all s integrals.
  Vec levels(const Vec& x, double eps) const {
    Vec out(static_cast<Eigen::Index>(s_));
    for (std::size_t i = 0; i < s_; ++i) out(static_cast<Eigen::Index>(i)) = value(i, x, eps);
    return out;
  }

  /// 2n x s matrix whose columns are grad F_i.
  Mat gradients(const Vec& x, double eps) const {
    Mat out(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(s_));
    for (std::size_t i = 0; i < s_; ++i) out.col(static_cast<Eigen::Index>(i)) = gradient(i, x, eps);
    return out;
  }

  /// Throws invalid_spec when the gradient disagrees with central differences
  /// of the value (relative 1e-6) or the Hessian is asymmetric (1e-8).
  void self_test(const Vec& probe, double eps) const {
    for (std::size_t i = 0; i < s_; ++i) {
      const Vec g = gradient(i, probe, eps);
      Vec xp = probe;
      for (Eigen::Index k = 0; k < probe.size(); ++k) {
        const double step = 1e-5 * (1.0 + std::abs(probe(k)));
        xp(k) = probe(k) + step;
        const double fp = value_(i, xp, eps);
        xp(k) = probe(k) - step;
        const double fm = value_(i, xp, eps);
        xp(k) = probe(k);
        const double fd = (fp - fm) / (2.0 * step);
        if (std::abs(fd - g(k)) > 1e-6 * (1.0 + std::abs(g(k)))) {
          throw Error(ErrorKind::invalid_spec, "gradient of F_" + std::to_string(i + 1) +
                                                   " disagrees with finite differences in component " +
                                                   std::to_string(k));
        }
      }
      if (hessian_) {
        const Mat h = hessian_(i, probe, eps);
        if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
          throw Error(ErrorKind::invalid_spec, "Hessian of F_" + std::to_string(i + 1) + " is not symmetric");
        }
      }
    }
  }

 private:
  void check(std::size_t i, const Vec& x) const {
    if (i >= s_) {
      throw Error(ErrorKind::index_out_of_range,
                  "integral index " + std::to_string(i) + " with s=" + std::to_string(s_));
    }
    if (static_cast<std::size_t>(x.size()) != dim()) {
      throw Error(ErrorKind::dimension, "state of size " + std::to_string(x.size()) + ", expected " +
                                            std::to_string(dim()));
    }
  }

  std::size_t n_;
  std::size_t s_;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
};

inline Vec vector_field(const HamiltonianSystem& sys, std::size_t i, const Vec& x, double eps) {
  return apply_symplectic(sys.gradient(i, x, eps));
}

/// 2n x s matrix whose columns are X_i(x).
inline Mat vector_fields(const HamiltonianSystem& sys, const Vec& x, double eps) {
  return apply_symplectic(sys.gradients(x, eps));
}

/// {F_i, F_j} = grad F_i^T J grad F_j. Written term by term so that swapping
/// i and j flips the sign exactly.
inline double poisson_bracket(const HamiltonianSystem& sys, std::size_t i, std::size_t j, const Vec& x,
                              double eps) {
  const Vec gi = sys.gradient(i, x, eps);
  const Vec gj = sys.gradient(j, x, eps);
  const auto n = static_cast<Eigen::Index>(sys.n());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) acc += gi(k) * gj(n + k) - gi(n + k) * gj(k);
  return acc;
}

struct HypothesisReport {
  double max_bracket = 0.0;
  double min_singular_value = std::numeric_limits<double>::infinity();
  std::size_t sample_count = 0;
  std::size_t worst_bracket_sample = 0;
  std::size_t worst_independence_sample = 0;
  double tol = 0.0;
  bool involution = false;
  bool independence = false;
  bool pass = false;
};

/// Sampling surrogate for "independent and in involution" on a neighbourhood:
/// largest |{F_i, F_j}| and smallest singular value of [grad F_1 .. grad F_s].
/// Failures are reported, never thrown.
inline HypothesisReport check_hypotheses(const HamiltonianSystem& sys, const std::vector<Vec>& samples, double eps,
                                         double tol) {
  HypothesisReport rep;
  rep.tol = tol;
  rep.sample_count = samples.size();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Vec& x = samples[k];
    for (std::size_t i = 0; i < sys.s(); ++i) {
      for (std::size_t j = i + 1; j < sys.s(); ++j) {
        const double b = std::abs(poisson_bracket(sys, i, j, x, eps));
        if (b > rep.max_bracket) {
          rep.max_bracket = b;
          rep.worst_bracket_sample = k;
        }
      }
    }
    const Vec sv = singular_values(sys.gradients(x, eps));
    const double smin = sv(sv.size() - 1);
    if (smin < rep.min_singular_value) {
      rep.min_singular_value = smin;
      rep.worst_independence_sample = k;
    }
  }
  rep.involution = rep.sample_count > 0 && rep.max_bracket < tol;
  rep.independence = rep.sample_count > 0 && rep.min_singular_value > tol;
  rep.pass = rep.involution && rep.independence;
  return rep;
}

/// Uniform points in Euclidean balls of the given radius around the centres,
/// cycling through the centres.
template <class Rng>
std::vector<Vec> ball_samples(const std::vector<Vec>& centres, std::size_t count, double radius, Rng& rng) {
  std::vector<Vec> out;
  if (centres.empty()) return out;
  out.reserve(count);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < count; ++k) {
    const Vec& c = centres[k % centres.size()];
    Vec dir(c.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = gauss(rng);
    const double norm = dir.norm();
    const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(c.size()));
    out.push_back(norm > 0.0 ? Vec(c + (r / norm) * dir) : c);
  }
  return out;
}

}  // namespace isotori
