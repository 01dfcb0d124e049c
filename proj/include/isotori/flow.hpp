#pragma once

// Flows of the individual integrals, their composition
//   g^tau = g_1^{tau_1} o g_2^{tau_2} o ... o g_s^{tau_s},
// the co-integrated tangent flow, and the period-vector solve g^c(m) = m.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "isotori/error.hpp"
#include "isotori/hamiltonian.hpp"
#include "isotori/numerics.hpp"

namespace isotori {

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double initial_step = 1e-2;
  std::size_t max_steps = 2'000'000;
};

/// Tolerances for monodromy matrices. The 2s unit multipliers of a twisted
/// torus form Jordan blocks, so an error d in the matrix splits them by about
/// sqrt(d); clustering them within 1e-6 needs d near 1e-14.
inline OdeOptions precise_ode() {
  OdeOptions o;
  o.rel_tol = 1e-14;
  o.abs_tol = 1e-15;
  return o;
}

struct FlowResult {
  Vec endpoint;
  std::optional<Mat> jacobian;
  std::size_t steps = 0;
  double max_energy_drift = 0.0;
};

struct PeriodVector {
  Vec c;
  IVec alpha;
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

using OdeState = std::vector<double>;

// Embedded Runge-Kutta-Fehlberg 7(8) with odeint's standard error controller.
// Steps are driven by hand so step-size underflow and blow-up can be reported.
template <class Rhs>
std::size_t integrate(Rhs&& rhs, OdeState& x, double duration, const OdeOptions& opts) {
  namespace odeint = boost::numeric::odeint;
  if (duration == 0.0) return 0;
  auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol, odeint::runge_kutta_fehlberg78<OdeState>());
  const double dir = duration > 0.0 ? 1.0 : -1.0;
  const double span = std::abs(duration);
  const double min_step = 1e-14 * span;
  double t = 0.0;
  double dt = dir * std::min(opts.initial_step, span);
  std::size_t steps = 0;
  while (dir * (duration - t) > 1e-15 * span) {
    if (dir * (t + dt - duration) > 0.0) dt = duration - t;
    const auto result = stepper.try_step(rhs, x, t, dt);
    if (result == odeint::fail) {
      if (std::abs(dt) < min_step) {
        throw Error(ErrorKind::stiffness, "step size fell below " + std::to_string(min_step));
      }
      continue;
    }
    ++steps;
    for (double v : x) {
      if (!std::isfinite(v)) throw Error(ErrorKind::blow_up, "state became non-finite at t=" + std::to_string(t));
    }
    if (steps > opts.max_steps) throw Error(ErrorKind::stiffness, "step budget exhausted");
  }
  return steps;
}

inline double energy_drift(const HamiltonianSystem& sys, const Vec& start, const Vec& end, double eps) {
  double drift = 0.0;
  for (std::size_t i = 0; i < sys.s(); ++i) {
    drift = std::max(drift, std::abs(sys.value(i, end, eps) - sys.value(i, start, eps)));
  }
  return drift;
}

}  // namespace detail

/// Time-t map of X_i from x0; with `variational` the tangent matrix
/// V' = J Hess(F_i) V, V(0) = I is integrated alongside.
inline FlowResult evolve(const HamiltonianSystem& sys, std::size_t i, const Vec& x0, double t, double eps,
                         bool variational, const OdeOptions& opts = {}) {
  if (i >= sys.s()) throw Error(ErrorKind::index_out_of_range, "flow index " + std::to_string(i));
  if (!std::isfinite(t)) throw Error(ErrorKind::numeric_failure, "non-finite flow time");
  const auto d = static_cast<Eigen::Index>(sys.dim());
  if (x0.size() != d) throw Error(ErrorKind::dimension, "initial state has wrong size");

  FlowResult out;
  if (t == 0.0) {
    out.endpoint = x0;
    if (variational) out.jacobian = Mat::Identity(d, d);
    return out;
  }

  const std::size_t size = static_cast<std::size_t>(d) * (variational ? static_cast<std::size_t>(d) + 1 : 1);
  detail::OdeState state(size, 0.0);
  Eigen::Map<Vec>(state.data(), d) = x0;
  if (variational) Eigen::Map<Mat>(state.data() + d, d, d).setIdentity();

  auto rhs = [&](const detail::OdeState& s, detail::OdeState& ds, double) {
    const Eigen::Map<const Vec> x(s.data(), d);
    Eigen::Map<Vec>(ds.data(), d) = vector_field(sys, i, x, eps);
    if (variational) {
      const Eigen::Map<const Mat> v(s.data() + d, d, d);
      Eigen::Map<Mat>(ds.data() + d, d, d) = apply_symplectic(Mat(sys.hessian(i, x, eps) * v));
    }
  };
  out.steps = detail::integrate(rhs, state, t, opts);
  out.endpoint = Eigen::Map<const Vec>(state.data(), d);
  if (variational) out.jacobian = Eigen::Map<const Mat>(state.data() + d, d, d);
  out.max_energy_drift = detail::energy_drift(sys, x0, out.endpoint, eps);
  return out;
}

/// g_1^{tau_1} o ... o g_s^{tau_s}: the factor for F_s acts first.
inline FlowResult composed_flow(const HamiltonianSystem& sys, const Vec& x0, const Vec& tau, double eps,
                                bool variational, const OdeOptions& opts = {}) {
  if (static_cast<std::size_t>(tau.size()) != sys.s()) {
    throw Error(ErrorKind::dimension, "time vector must have s entries");
  }
  const auto d = static_cast<Eigen::Index>(sys.dim());
  FlowResult out;
  out.endpoint = x0;
  if (variational) out.jacobian = Mat::Identity(d, d);
  for (std::size_t k = sys.s(); k-- > 0;) {
    const double t = tau(static_cast<Eigen::Index>(k));
    if (t == 0.0) continue;
    FlowResult stage = evolve(sys, k, out.endpoint, t, eps, variational, opts);
    out.endpoint = std::move(stage.endpoint);
    out.steps += stage.steps;
    if (variational) out.jacobian = Mat(*stage.jacobian * *out.jacobian);
  }
  out.max_energy_drift = detail::energy_drift(sys, x0, out.endpoint, eps);
  return out;
}

struct PeriodOptions {
  double tol = 1e-9;
  int max_iter = 50;
  int max_halvings = 30;
};

/// Gauss-Newton on r(c) = g^c(m) - m (2n residuals, s unknowns). The homotopy
/// class is whatever basin c_guess sits in; `alpha` is carried as a label.
/// Once below tolerance the iteration keeps polishing while it still gains a
/// factor of two, which keeps c accurate enough for multiplier clustering.
inline PeriodVector find_period_vector(const HamiltonianSystem& sys, const Vec& m, const IVec& alpha,
                                       const Vec& c_guess, double eps, const OdeOptions& ode = {},
                                       const PeriodOptions& opts = {}) {
  if (static_cast<std::size_t>(c_guess.size()) != sys.s() || static_cast<std::size_t>(alpha.size()) != sys.s()) {
    throw Error(ErrorKind::dimension, "period guess and homotopy class must have s entries");
  }
  const Mat fields = vector_fields(sys, m, eps);
  const Vec sv = singular_values(fields);
  if (!(sv(sv.size() - 1) > 1e-10 * std::max(sv(0), 1e-300))) {
    throw Error(ErrorKind::degenerate_torus, "the fields X_1..X_s are dependent at the base point");
  }

  PeriodVector pv;
  pv.alpha = alpha;
  pv.c = c_guess;
  Vec end = composed_flow(sys, m, pv.c, eps, false, ode).endpoint;
  Vec r = end - m;
  pv.residual = max_abs(r);

  for (int it = 0; it < opts.max_iter; ++it) {
    if (pv.residual < 1e-3 * opts.tol) break;
    const Mat jac = vector_fields(sys, end, eps);
    const Vec step = jac.colPivHouseholderQr().solve(-r);
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
      const Vec trial = pv.c + scale * step;
      Vec trial_end = composed_flow(sys, m, trial, eps, false, ode).endpoint;
      Vec trial_r = trial_end - m;
      const double trial_res = max_abs(trial_r);
      if (trial_res < pv.residual) {
        const bool converged = pv.residual < opts.tol;
        const double gain = pv.residual / trial_res;
        pv.c = trial;
        end = std::move(trial_end);
        r = std::move(trial_r);
        pv.residual = trial_res;
        pv.iterations = it + 1;
        accepted = !(converged && gain < 2.0);
        break;
      }
    }
    if (!accepted) break;
  }
  if (!(pv.residual < opts.tol)) {
    throw Error(ErrorKind::no_convergence,
                "period vector did not close the orbit (residual " + std::to_string(pv.residual) + ")");
  }
  return pv;
}

}  // namespace isotori
