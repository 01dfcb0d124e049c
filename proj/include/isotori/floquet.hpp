#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "isotori/flow.hpp"
#include "isotori/numerics.hpp"

namespace isotori {

struct MonodromyReport {
  Mat monodromy;
  ComplexSpectrum multipliers;
  std::size_t unit_multiplicity = 0;
  double tol_unit = 1e-6;
  Vec base_point;
  Vec period;
  /// max over multipliers of min_mu |lambda mu - 1|; zero for an exactly symplectic map.
  double reciprocal_defect = 0.0;
  double det_defect = 0.0;
};

inline std::size_t count_unit_multipliers(const ComplexSpectrum& spec, double tol_unit) {
  return static_cast<std::size_t>(std::count_if(spec.values.begin(), spec.values.end(), [&](const Complex& z) {
    return std::abs(z - Complex(1.0, 0.0)) < tol_unit;
  }));
}

inline double reciprocal_pairing_defect(const ComplexSpectrum& spec) {
  double worst = 0.0;
  for (const auto& lambda : spec.values) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& mu : spec.values) best = std::min(best, std::abs(lambda * mu - 1.0));
    worst = std::max(worst, best);
  }
  return worst;
}

/// Jacobian of g^c at m and its Floquet multipliers.
inline MonodromyReport monodromy(const HamiltonianSystem& sys, const Vec& m, const PeriodVector& pv, double eps,
                                 double tol_unit = 1e-6, const OdeOptions& ode = precise_ode()) {
  if (!(pv.residual < 1e-8)) {
    throw Error(ErrorKind::no_convergence, "period vector does not close the orbit at the base point");
  }
  MonodromyReport rep;
  rep.tol_unit = tol_unit;
  rep.base_point = m;
  rep.period = pv.c;
  rep.monodromy = *composed_flow(sys, m, pv.c, eps, true, ode).jacobian;
  rep.multipliers = eigenvalues(rep.monodromy);
  rep.unit_multiplicity = count_unit_multipliers(rep.multipliers, tol_unit);
  rep.reciprocal_defect = reciprocal_pairing_defect(rep.multipliers);
  rep.det_defect = std::abs(det(rep.monodromy) - 1.0);
  return rep;
}

struct MultiplierDiagnostic {
  Complex value;
  double distance_to_one = 0.0;
};

struct HypothesisIIIResult {
  bool pass = false;
  /// Fewer than 2s unit multipliers cannot happen analytically; seeing it
  /// means the monodromy or the clustering tolerance is off.
  bool numerical_warning = false;
  std::size_t unit_multiplicity = 0;
  std::size_t expected = 0;
  std::vector<MultiplierDiagnostic> offending;
};

/// Passes iff exactly 2s multipliers sit within tol_unit of 1. On failure the
/// diagnostics list the multipliers nearest to 1 beyond the expected 2s (excess)
/// or the closest ones that missed the cluster (deficit).
inline HypothesisIIIResult check_hypothesis_iii(const MonodromyReport& report, std::size_t s) {
  HypothesisIIIResult out;
  out.expected = 2 * s;
  out.unit_multiplicity = report.unit_multiplicity;
  out.pass = report.unit_multiplicity == out.expected;
  out.numerical_warning = report.unit_multiplicity < out.expected;
  if (out.pass) return out;

  std::vector<MultiplierDiagnostic> sorted;
  for (const auto& z : report.multipliers.values) sorted.push_back({z, std::abs(z - Complex(1.0, 0.0))});
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.distance_to_one < b.distance_to_one; });
  if (out.unit_multiplicity > out.expected) {
    out.offending.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(out.unit_multiplicity));
  } else {
    const auto upto = std::min(sorted.size(), out.expected);
    out.offending.assign(sorted.begin() + static_cast<std::ptrdiff_t>(out.unit_multiplicity),
                         sorted.begin() + static_cast<std::ptrdiff_t>(upto));
  }
  return out;
}

/// Largest pairwise multiset distance between the multiplier spectra at the
/// given points of one torus; the same period vector closes every orbit.
inline double basepoint_invariance(const HamiltonianSystem& sys, const std::vector<Vec>& m_list,
                                   const PeriodVector& pv, double eps, const OdeOptions& ode = precise_ode()) {
  std::vector<ComplexSpectrum> spectra;
  spectra.reserve(m_list.size());
  for (const auto& m : m_list) {
    const Mat mono = *composed_flow(sys, m, pv.c, eps, true, ode).jacobian;
    spectra.push_back(eigenvalues(mono));
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < spectra.size(); ++a)
    for (std::size_t b = a + 1; b < spectra.size(); ++b)
      worst = std::max(worst, spectrum_distance(spectra[a], spectra[b]));
  return worst;
}

/// Multipliers left after removing the 2s closest to 1.
inline ComplexSpectrum strip_unit_multipliers(const ComplexSpectrum& spec, std::size_t count) {
  std::vector<Complex> v = spec.values;
  std::sort(v.begin(), v.end(), [](const Complex& a, const Complex& b) {
    return std::abs(a - Complex(1.0, 0.0)) < std::abs(b - Complex(1.0, 0.0));
  });
  ComplexSpectrum out;
  out.values.assign(v.begin() + static_cast<std::ptrdiff_t>(std::min(count, v.size())), v.end());
  return out;
}

}  // namespace isotori
