#pragma once

// Built-in systems whose tori, frequencies and multipliers are known in
// closed form. Throughout I_j = (q_j^2 + p_j^2) / 2.
//
//   action_oscillators  F_1 = sum_j omega_j I_j + eps sum_j a_j I_j^2,  F_i = I_i (2 <= i <= s)
//   lyapunov            F_1 = omega1 I_1 + nu I_2 + eps q_1^2 q_2           (n = 2, s = 1)
//   isotropic_momentum  F_1 = omega (I_1 + I_2) + nu I_3 + eps (q_1^2 + q_2^2) q_3,
//                       F_2 = q_1 p_2 - q_2 p_1                              (n = 3, s = 2)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "isotori/continuation.hpp"
#include "isotori/error.hpp"
#include "isotori/floquet.hpp"
#include "isotori/hamiltonian.hpp"
#include "isotori/numerics.hpp"
#include "isotori/reducible.hpp"

namespace isotori {

enum class ModelKind { action_oscillators, lyapunov, isotropic_momentum };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::action_oscillators: return "action_oscillators";
    case ModelKind::lyapunov: return "lyapunov";
    case ModelKind::isotropic_momentum: return "isotropic_momentum";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "action_oscillators") return ModelKind::action_oscillators;
  if (name == "lyapunov") return ModelKind::lyapunov;
  if (name == "isotropic_momentum") return ModelKind::isotropic_momentum;
  throw Error(ErrorKind::invalid_spec, "unknown model '" + std::string(name) + "'");
}

/// Parameter keys per model (missing keys take the defaults below):
///   action_oscillators: omega[n] (sqrt(j)), a[n] (1), actions[s] (1)
///   lyapunov:           omega1 (1), nu (sqrt 2), action (1)
///   isotropic_momentum: omega (1), nu (sqrt 2), a (1), b (0.5)
struct ModelSpec {
  ModelKind kind = ModelKind::action_oscillators;
  std::size_t n = 0;  // 0: model default
  std::size_t s = 0;
  std::map<std::string, std::vector<double>> parameters;

  bool operator==(const ModelSpec&) const = default;
};

inline std::vector<std::string> model_parameter_keys(ModelKind kind) {
  switch (kind) {
    case ModelKind::action_oscillators: return {"omega", "a", "actions"};
    case ModelKind::lyapunov: return {"omega1", "nu", "action"};
    case ModelKind::isotropic_momentum: return {"omega", "nu", "a", "b"};
  }
  return {};
}

/// Fills in n, s (fixed for lyapunov and isotropic_momentum) and every
/// parameter default, then validates.
inline ModelSpec normalized(ModelSpec spec) {
  auto& p = spec.parameters;
  const auto keys = model_parameter_keys(spec.kind);
  for (const auto& [key, _] : p) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorKind::invalid_spec, "unknown parameter '" + key + "' for model " +
                                               std::string(to_string(spec.kind)));
    }
  }
  auto scalar = [&](const std::string& key, double fallback) {
    auto it = p.find(key);
    if (it == p.end()) {
      p[key] = {fallback};
    } else if (it->second.size() != 1) {
      throw Error(ErrorKind::invalid_spec, "parameter '" + key + "' must be a single value");
    }
    return p[key][0];
  };
  auto vector = [&](const std::string& key, std::size_t size, auto fallback) {
    auto it = p.find(key);
    if (it == p.end()) {
      std::vector<double> v(size);
      for (std::size_t j = 0; j < size; ++j) v[j] = fallback(j);
      p[key] = v;
    } else if (it->second.size() != size) {
      throw Error(ErrorKind::invalid_spec, "parameter '" + key + "' must have " + std::to_string(size) + " entries");
    }
    return p[key];
  };

  switch (spec.kind) {
    case ModelKind::action_oscillators: {
      if (spec.n == 0) spec.n = 3;
      if (spec.s == 0) spec.s = std::min<std::size_t>(2, spec.n);
      if (spec.s > spec.n) {
        throw Error(ErrorKind::invalid_spec, "action_oscillators needs 1 <= s <= n");
      }
      const auto omega = vector("omega", spec.n, [](std::size_t j) { return std::sqrt(static_cast<double>(j + 1)); });
      vector("a", spec.n, [](std::size_t) { return 1.0; });
      const auto actions = vector("actions", spec.s, [](std::size_t) { return 1.0; });
      if (omega[0] == 0.0) throw Error(ErrorKind::invalid_spec, "omega_1 must be nonzero");
      for (double v : actions)
        if (!(v > 0.0)) throw Error(ErrorKind::invalid_spec, "seed actions must be positive");
      break;
    }
    case ModelKind::lyapunov: {
      if ((spec.n != 2 && spec.n != 0) || (spec.s != 1 && spec.s != 0)) {
        throw Error(ErrorKind::invalid_spec, "lyapunov has n = 2, s = 1");
      }
      spec.n = 2;
      spec.s = 1;
      if (scalar("omega1", 1.0) == 0.0) throw Error(ErrorKind::invalid_spec, "omega1 must be nonzero");
      scalar("nu", std::numbers::sqrt2);
      if (!(scalar("action", 1.0) > 0.0)) throw Error(ErrorKind::invalid_spec, "seed action must be positive");
      break;
    }
    case ModelKind::isotropic_momentum: {
      if ((spec.n != 3 && spec.n != 0) || (spec.s != 2 && spec.s != 0)) {
        throw Error(ErrorKind::invalid_spec, "isotropic_momentum has n = 3, s = 2");
      }
      spec.n = 3;
      spec.s = 2;
      if (scalar("omega", 1.0) == 0.0) throw Error(ErrorKind::invalid_spec, "omega must be nonzero");
      scalar("nu", std::numbers::sqrt2);
      const double a = scalar("a", 1.0);
      const double b = scalar("b", 0.5);
      if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::invalid_spec, "seed amplitudes a, b must be positive");
      if (a == b) throw Error(ErrorKind::invalid_spec, "isotropic_momentum needs a != b on the seed torus");
      break;
    }
  }
  for (const auto& [key, values] : p)
    for (double v : values)
      if (!std::isfinite(v)) throw Error(ErrorKind::invalid_spec, "parameter '" + key + "' is not finite");
  return spec;
}

struct ModelSystem {
  ModelSpec spec;
  HamiltonianSystem system;
  TorusSeed seed;
  FrequencyData frequencies;  // at the seed torus, eps = 0
};

namespace detail {

inline HamiltonianSystem action_oscillators_system(std::size_t n, std::size_t s, std::vector<double> omega,
                                                   std::vector<double> a) {
  const auto nn = static_cast<Eigen::Index>(n);
  auto value = [=](std::size_t i, const Vec& x, double eps) {
    if (i > 0) return 0.5 * (x(static_cast<Eigen::Index>(i)) * x(static_cast<Eigen::Index>(i)) +
                             x(nn + static_cast<Eigen::Index>(i)) * x(nn + static_cast<Eigen::Index>(i)));
    double f = 0.0;
    for (Eigen::Index j = 0; j < nn; ++j) {
      const double I = 0.5 * (x(j) * x(j) + x(nn + j) * x(nn + j));
      f += omega[static_cast<std::size_t>(j)] * I + eps * a[static_cast<std::size_t>(j)] * I * I;
    }
    return f;
  };
  auto gradient = [=](std::size_t i, const Vec& x, double eps) {
    Vec g = Vec::Zero(2 * nn);
    if (i > 0) {
      const auto k = static_cast<Eigen::Index>(i);
      g(k) = x(k);
      g(nn + k) = x(nn + k);
      return g;
    }
    for (Eigen::Index j = 0; j < nn; ++j) {
      const double I = 0.5 * (x(j) * x(j) + x(nn + j) * x(nn + j));
      const double w = omega[static_cast<std::size_t>(j)] + 2.0 * eps * a[static_cast<std::size_t>(j)] * I;
      g(j) = w * x(j);
      g(nn + j) = w * x(nn + j);
    }
    return g;
  };
  auto hessian = [=](std::size_t i, const Vec& x, double eps) {
    Mat h = Mat::Zero(2 * nn, 2 * nn);
    if (i > 0) {
      const auto k = static_cast<Eigen::Index>(i);
      h(k, k) = 1.0;
      h(nn + k, nn + k) = 1.0;
      return h;
    }
    for (Eigen::Index j = 0; j < nn; ++j) {
      const double aj = a[static_cast<std::size_t>(j)];
      const double I = 0.5 * (x(j) * x(j) + x(nn + j) * x(nn + j));
      const double w = omega[static_cast<std::size_t>(j)] + 2.0 * eps * aj * I;
      h(j, j) = w + 2.0 * eps * aj * x(j) * x(j);
      h(nn + j, nn + j) = w + 2.0 * eps * aj * x(nn + j) * x(nn + j);
      h(j, nn + j) = h(nn + j, j) = 2.0 * eps * aj * x(j) * x(nn + j);
    }
    return h;
  };
  return HamiltonianSystem(n, s, value, gradient, hessian);
}

inline HamiltonianSystem lyapunov_system(double omega1, double nu) {
  // x = (q1, q2, p1, p2)
  auto value = [=](std::size_t, const Vec& x, double eps) {
    return 0.5 * omega1 * (x(0) * x(0) + x(2) * x(2)) + 0.5 * nu * (x(1) * x(1) + x(3) * x(3)) +
           eps * x(0) * x(0) * x(1);
  };
  auto gradient = [=](std::size_t, const Vec& x, double eps) {
    Vec g(4);
    g << omega1 * x(0) + 2.0 * eps * x(0) * x(1), nu * x(1) + eps * x(0) * x(0), omega1 * x(2), nu * x(3);
    return g;
  };
  auto hessian = [=](std::size_t, const Vec& x, double eps) {
    Mat h = Mat::Zero(4, 4);
    h(0, 0) = omega1 + 2.0 * eps * x(1);
    h(0, 1) = h(1, 0) = 2.0 * eps * x(0);
    h(1, 1) = nu;
    h(2, 2) = omega1;
    h(3, 3) = nu;
    return h;
  };
  return HamiltonianSystem(2, 1, value, gradient, hessian);
}

inline HamiltonianSystem isotropic_momentum_system(double omega, double nu) {
  // x = (q1, q2, q3, p1, p2, p3)
  auto value = [=](std::size_t i, const Vec& x, double eps) {
    if (i == 1) return x(0) * x(4) - x(1) * x(3);
    const double i12 = 0.5 * (x(0) * x(0) + x(3) * x(3) + x(1) * x(1) + x(4) * x(4));
    const double i3 = 0.5 * (x(2) * x(2) + x(5) * x(5));
    return omega * i12 + nu * i3 + eps * (x(0) * x(0) + x(1) * x(1)) * x(2);
  };
  auto gradient = [=](std::size_t i, const Vec& x, double eps) {
    Vec g(6);
    if (i == 1) {
      g << x(4), -x(3), 0.0, -x(1), x(0), 0.0;
      return g;
    }
    g << omega * x(0) + 2.0 * eps * x(0) * x(2), omega * x(1) + 2.0 * eps * x(1) * x(2),
        nu * x(2) + eps * (x(0) * x(0) + x(1) * x(1)), omega * x(3), omega * x(4), nu * x(5);
    return g;
  };
  auto hessian = [=](std::size_t i, const Vec& x, double eps) {
    Mat h = Mat::Zero(6, 6);
    if (i == 1) {
      h(0, 4) = h(4, 0) = 1.0;
      h(1, 3) = h(3, 1) = -1.0;
      return h;
    }
    h(0, 0) = h(1, 1) = omega + 2.0 * eps * x(2);
    h(2, 2) = nu;
    h(0, 2) = h(2, 0) = 2.0 * eps * x(0);
    h(1, 2) = h(2, 1) = 2.0 * eps * x(1);
    h(3, 3) = h(4, 4) = omega;
    h(5, 5) = nu;
    return h;
  };
  return HamiltonianSystem(3, 2, value, gradient, hessian);
}

/// Frequency matrices of action_oscillators at actions I (active modes) and eps.
inline FrequencyData action_oscillator_frequencies(const ModelSpec& spec, const Vec& actions, double eps) {
  const auto& omega = spec.parameters.at("omega");
  const auto& a = spec.parameters.at("a");
  const auto s = static_cast<Eigen::Index>(spec.s);
  const auto r = static_cast<Eigen::Index>(spec.n - spec.s);
  FrequencyData fd{Mat::Zero(s, s), Mat::Zero(s, r)};
  for (Eigen::Index j = 0; j < s; ++j) {
    fd.A(0, j) = omega[static_cast<std::size_t>(j)] + 2.0 * eps * a[static_cast<std::size_t>(j)] * actions(j);
  }
  for (Eigen::Index i = 1; i < s; ++i) fd.A(i, i) = 1.0;
  for (Eigen::Index j = 0; j < r; ++j) fd.B(0, j) = omega[static_cast<std::size_t>(s + j)];
  return fd;
}

}  // namespace detail

inline ModelSystem make_system(const ModelSpec& raw) {
  const ModelSpec spec = normalized(raw);
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto s = static_cast<Eigen::Index>(spec.s);
  const auto& p = spec.parameters;

  Vec base = Vec::Zero(2 * n);
  FrequencyData fd;
  std::optional<HamiltonianSystem> sys;
  switch (spec.kind) {
    case ModelKind::action_oscillators: {
      const auto& actions = p.at("actions");
      for (Eigen::Index j = 0; j < s; ++j) base(j) = std::sqrt(2.0 * actions[static_cast<std::size_t>(j)]);
      sys.emplace(detail::action_oscillators_system(spec.n, spec.s, p.at("omega"), p.at("a")));
      fd = detail::action_oscillator_frequencies(spec, Eigen::Map<const Vec>(actions.data(), s), 0.0);
      break;
    }
    case ModelKind::lyapunov: {
      base(0) = std::sqrt(2.0 * p.at("action")[0]);
      sys.emplace(detail::lyapunov_system(p.at("omega1")[0], p.at("nu")[0]));
      fd = FrequencyData{Mat::Constant(1, 1, p.at("omega1")[0]), Mat::Constant(1, 1, p.at("nu")[0])};
      break;
    }
    case ModelKind::isotropic_momentum: {
      const double omega = p.at("omega")[0];
      base(0) = std::sqrt(2.0 * p.at("a")[0]);
      base(1) = std::sqrt(2.0 * p.at("b")[0]);
      sys.emplace(detail::isotropic_momentum_system(omega, p.at("nu")[0]));
      fd.A.resize(2, 2);
      fd.A << omega, omega, -1.0, 1.0;
      fd.B.resize(2, 1);
      fd.B << p.at("nu")[0], 0.0;
      break;
    }
  }
  sys->self_test(base, 0.0);
  sys->self_test(base, 0.1);

  TorusSeed seed;
  seed.base = base;
  seed.beta0 = sys->levels(base, 0.0);
  seed.periods = 2.0 * std::numbers::pi * fd.A.transpose().partialPivLu().inverse();
  seed.alpha = IVec::Unit(s, 0);
  return ModelSystem{spec, std::move(*sys), std::move(seed), std::move(fd)};
}

/// Actions (I_1..I_s) of the action_oscillators torus with levels beta and no
/// transverse amplitude.
inline Vec model_actions(const ModelSpec& raw, const Vec& beta, double eps) {
  const ModelSpec spec = normalized(raw);
  if (spec.kind != ModelKind::action_oscillators) {
    throw Error(ErrorKind::unsupported_oracle, "closed-form actions only for action_oscillators");
  }
  const auto& omega = spec.parameters.at("omega");
  const auto& a = spec.parameters.at("a");
  const auto s = static_cast<Eigen::Index>(spec.s);
  Vec actions(s);
  double rest = 0.0;
  for (Eigen::Index i = 1; i < s; ++i) {
    actions(i) = beta(i);
    rest += omega[static_cast<std::size_t>(i)] * beta(i) + eps * a[static_cast<std::size_t>(i)] * beta(i) * beta(i);
  }
  // eps a_1 I^2 + omega_1 I - (beta_1 - rest) = 0, root continuous at eps = 0.
  const double c = beta(0) - rest;
  const double qa = eps * a[0];
  const double disc = omega[0] * omega[0] + 4.0 * qa * c;
  if (disc < 0.0) throw Error(ErrorKind::unsupported_oracle, "levels outside the range of the model");
  actions(0) = 2.0 * c / (omega[0] + std::copysign(std::sqrt(disc), omega[0]));
  return actions;
}

enum class OracleQuery { rho, multipliers, frequencies, twist_det };

struct OraclePoint {
  Vec beta;
  double epsilon = 0.0;
  IVec alpha;
};

using OracleValue = std::variant<Vec, ComplexSpectrum, double>;

/// Closed-form ground truth where the model admits it:
///   rho          action_oscillators only: the transverse origin, y* = 0
///   multipliers  {1 x 2s} and exp(+-2 pi i Q_j); action_oscillators at any eps,
///                the other models at eps = 0
///   frequencies  dF_1/dI_j on the torus (same applicability)
///   twist_det    (2 eps)^s prod_{j<=s} a_j for action_oscillators with kappa = 1
inline OracleValue oracle(const ModelSpec& raw, OracleQuery query, const OraclePoint& at) {
  const ModelSpec spec = normalized(raw);
  const bool actions_only = spec.kind == ModelKind::action_oscillators;
  if (!actions_only && (query == OracleQuery::rho || query == OracleQuery::twist_det)) {
    throw Error(ErrorKind::unsupported_oracle, "no closed form for this query on " + std::string(to_string(spec.kind)));
  }
  if (!actions_only && at.epsilon != 0.0) {
    throw Error(ErrorKind::unsupported_oracle, "closed forms for " + std::string(to_string(spec.kind)) +
                                                   " exist only at eps = 0");
  }

  FrequencyData fd;
  if (actions_only) {
    fd = detail::action_oscillator_frequencies(spec, model_actions(spec, at.beta, at.epsilon), at.epsilon);
  } else {
    fd = make_system(spec).frequencies;
  }

  switch (query) {
    case OracleQuery::rho: return Vec(Vec::Zero(static_cast<Eigen::Index>(2 * (spec.n - spec.s))));
    case OracleQuery::frequencies: return Vec(fd.A.row(0).transpose());
    case OracleQuery::twist_det: {
      const auto& a = spec.parameters.at("a");
      double d = 1.0;
      for (std::size_t j = 0; j < spec.s; ++j) d *= 2.0 * at.epsilon * a[j];
      return d;
    }
    case OracleQuery::multipliers: {
      ComplexSpectrum spec_out;
      spec_out.values.assign(2 * spec.s, Complex(1.0, 0.0));
      const Vec q = compute_Q(fd, at.alpha);
      for (Eigen::Index j = 0; j < q.size(); ++j) {
        spec_out.values.push_back(std::polar(1.0, 2.0 * std::numbers::pi * q(j)));
        spec_out.values.push_back(std::polar(1.0, -2.0 * std::numbers::pi * q(j)));
      }
      return spec_out;
    }
  }
  throw Error(ErrorKind::unsupported_oracle, "unknown query");
}

}  // namespace isotori
