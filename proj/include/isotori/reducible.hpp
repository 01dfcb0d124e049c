#pragma once

// Nondegeneracy of reducible tori from their frequency matrices.
//
// Row convention: A(i, j) is the frequency of integral F_i along torus angle j,
// and B(i, j) the frequency of F_i on the j-th transverse oscillator plane.
// Rows index integrals, columns index angles. The transverse Floquet
// exponents of the class-alpha orbit are Q(alpha) = B^T (A^T)^{-1} alpha;
// transposing A here is the easy mistake to make.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "isotori/error.hpp"
#include "isotori/numerics.hpp"

namespace isotori {

struct FrequencyData {
  Mat A;  // s x s
  Mat B;  // s x r, r = n - s

  std::size_t s() const noexcept { return static_cast<std::size_t>(A.rows()); }
  std::size_t r() const noexcept { return static_cast<std::size_t>(B.cols()); }
};

struct CriterionResult {
  IVec alpha;
  Vec Q;               // r
  Mat omega_dets;      // r x s, entry (j, k) = |Omega(k; j)|
  Vec weighted_sums;   // r, S_j = sum_k alpha_k |Omega(k; j)|
  double detA = 0.0;
  bool nondegenerate = false;
  double margin = 0.0;  // min_j distance of S_j / |A| to the nearest integer
  double tol_int = 0.0;
  double identity_defect = 0.0;  // max_j |Q_j |A| - S_j| / (1 + |Q_j| |A|)
};

inline double distance_to_integer(double x) { return std::abs(x - std::nearbyint(x)); }

namespace detail {

inline void check_frequency_shapes(const FrequencyData& fd, const IVec& alpha) {
  if (fd.A.rows() != fd.A.cols()) throw Error(ErrorKind::dimension, "A must be square");
  if (fd.B.rows() != fd.A.rows()) throw Error(ErrorKind::dimension, "B must have s rows");
  if (alpha.size() != fd.A.rows()) throw Error(ErrorKind::dimension, "alpha must have s entries");
}

inline double checked_det(const Mat& a) {
  const double d = det(a);
  if (!(std::abs(d) > 1e-12 * a.norm())) {
    throw Error(ErrorKind::singular_frequency_matrix, "|A| vanishes, (A^T)^{-1} does not exist");
  }
  return d;
}

}  // namespace detail

/// Q(alpha) = B^T (A^T)^{-1} alpha.
inline Vec compute_Q(const FrequencyData& fd, const IVec& alpha) {
  detail::check_frequency_shapes(fd, alpha);
  detail::checked_det(fd.A);
  const Vec x = fd.A.transpose().partialPivLu().solve(alpha.cast<double>());
  return fd.B.transpose() * x;
}

/// A with its k-th column replaced by the j-th column of B.
inline Mat omega_matrix(const FrequencyData& fd, std::size_t k, std::size_t j) {
  Mat out = fd.A;
  out.col(static_cast<Eigen::Index>(k)) = fd.B.col(static_cast<Eigen::Index>(j));
  return out;
}

/// Inversion-free form of the criterion: for each transverse plane j,
/// S_j = sum_k alpha_k |Omega(k; j)| must avoid every integer multiple of |A|.
/// Also evaluates Q through the inverse and checks the cofactor identity
/// Q_j |A| = S_j.
inline CriterionResult determinant_criterion(const FrequencyData& fd, const IVec& alpha, double tol_int) {
  detail::check_frequency_shapes(fd, alpha);
  CriterionResult res;
  res.alpha = alpha;
  res.tol_int = tol_int;
  res.detA = detail::checked_det(fd.A);
  res.Q = compute_Q(fd, alpha);

  const auto s = fd.s();
  const auto r = fd.r();
  res.omega_dets.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
  res.weighted_sums = Vec::Zero(static_cast<Eigen::Index>(r));
  res.margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < r; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    for (std::size_t k = 0; k < s; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      res.omega_dets(jj, kk) = det(omega_matrix(fd, k, j));
      res.weighted_sums(jj) += alpha(kk) * res.omega_dets(jj, kk);
    }
    res.margin = std::min(res.margin, distance_to_integer(res.weighted_sums(jj) / res.detA));
    const double scale = 1.0 + std::abs(res.Q(jj)) * std::abs(res.detA);
    res.identity_defect = std::max(res.identity_defect, std::abs(res.Q(jj) * res.detA - res.weighted_sums(jj)) / scale);
  }
  if (res.identity_defect > 1e-9) {
    throw Error(ErrorKind::numeric_failure,
                "cofactor identity violated (relative defect " + std::to_string(res.identity_defect) + ")");
  }
  res.nondegenerate = r == 0 || res.margin > tol_int;
  return res;
}

/// Verdict from the Q path alone: every Q_j at distance > tol_int from Z.
inline bool q_nondegenerate(const Vec& q, double tol_int) {
  for (Eigen::Index j = 0; j < q.size(); ++j)
    if (!(distance_to_integer(q(j)) > tol_int)) return false;
  return true;
}

/// Nonzero classes with |alpha|_inf <= max_norm in the fixed search order:
/// sup-norm shells, then increasing l1 norm, then descending lexicographic
/// (so e_1 comes before e_2, and +1 before -1).
inline std::vector<IVec> alpha_candidates(std::size_t s, int max_norm) {
  std::vector<IVec> out;
  if (s == 0 || max_norm <= 0) return out;
  IVec cur = IVec::Constant(static_cast<Eigen::Index>(s), -max_norm);
  for (;;) {
    if (cur.cwiseAbs().maxCoeff() > 0) out.push_back(cur);
    Eigen::Index k = cur.size() - 1;
    while (k >= 0 && cur(k) == max_norm) cur(k--) = -max_norm;
    if (k < 0) break;
    ++cur(k);
  }
  std::stable_sort(out.begin(), out.end(), [](const IVec& a, const IVec& b) {
    const int sa = a.cwiseAbs().maxCoeff(), sb = b.cwiseAbs().maxCoeff();
    if (sa != sb) return sa < sb;
    const int la = a.cwiseAbs().sum(), lb = b.cwiseAbs().sum();
    if (la != lb) return la < lb;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (a(i) != b(i)) return a(i) > b(i);
    return false;
  });
  return out;
}

inline std::optional<IVec> search_alpha(const FrequencyData& fd, int max_norm, double tol_int) {
  detail::checked_det(fd.A);
  for (const auto& alpha : alpha_candidates(fd.s(), max_norm)) {
    if (determinant_criterion(fd, alpha, tol_int).nondegenerate) return alpha;
  }
  return std::nullopt;
}

/// s = 1: nondegenerate for some class iff no nu_k / omega_1 is an integer.
inline bool lyapunov_specialization(double omega1, const std::vector<double>& nus, double tol_int) {
  if (omega1 == 0.0) throw Error(ErrorKind::singular_frequency_matrix, "omega_1 must be nonzero");
  return std::all_of(nus.begin(), nus.end(),
                     [&](double nu) { return distance_to_integer(nu / omega1) > tol_int; });
}

}  // namespace isotori
