#pragma once

// Continuation of invariant s-tori through a section transverse to the
// group orbit.
//
// At a base point m the chart uses four frames:
//   T = [X_1(m) .. X_s(m)]        group directions (the tau coordinates)
//   G = [grad F_1(m) .. grad F_s(m)]
//   E = orthonormal basis of span(T, G)^perp       transverse coordinates y
//   W = orthonormal basis of span(G, E)^perp       section normals
// and the section is the affine space m + span(G, E). A point (beta, y) of the
// section is m + G a + E y with a chosen so that F(point) = beta. The return
// map flows by the period vector c, slides back along the group orbit until
// the W-components vanish, and reads off the new y. Its fixed points are the
// persisted tori; their transverse spectrum is what remains of the monodromy
// after the 2s unit multipliers are removed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isotori/error.hpp"
#include "isotori/floquet.hpp"
#include "isotori/flow.hpp"
#include "isotori/hamiltonian.hpp"
#include "isotori/numerics.hpp"

namespace isotori {

/// Starting data for a family: a point on the distinguished torus, its levels,
/// period-vector guesses for the basis classes e_1..e_s (columns of `periods`)
/// and the class whose orbits drive the return map.
struct TorusSeed {
  Vec base;
  Vec beta0;
  Mat periods;
  IVec alpha;

  Vec c_guess(const IVec& a) const { return periods * a.cast<double>(); }
};

struct AdaptedChart {
  Vec base;
  Mat T;
  Mat G;
  Mat E;
  Mat W;
  Vec beta0;
  double epsilon = 0.0;

  std::size_t transverse_dim() const noexcept { return static_cast<std::size_t>(E.cols()); }
};

enum class ReturnJacobian { variational, finite_difference };

struct ContinuationOptions {
  OdeOptions ode;
  /// Used for the class-alpha period re-solve and the monodromy of each record.
  OdeOptions monodromy_ode = precise_ode();
  PeriodOptions period;
  double fixed_point_tol = 1e-10;
  int max_newton = 25;
  /// Eigenvalues of the return Jacobian this close to 1 count as a violation
  /// of the nondegeneracy hypothesis.
  double margin_tol = 1e-6;
  double max_condition = 1e12;
  /// Largest |G a| + |E y| accepted before the point is declared outside the chart.
  double chart_radius = 1.0;
  double lift_tol = 1e-12;
  double project_tol = 1e-12;
  int max_sub_iter = 30;
  ReturnJacobian jacobian = ReturnJacobian::variational;
  double tol_unit = 1e-6;
  /// Zero-based index of the integral whose frequencies are recorded.
  std::size_t kappa = 0;
};

inline AdaptedChart build_chart(const HamiltonianSystem& sys, const Vec& m, double eps) {
  AdaptedChart chart;
  chart.base = m;
  chart.epsilon = eps;
  chart.G = sys.gradients(m, eps);
  chart.T = apply_symplectic(chart.G);
  chart.beta0 = sys.levels(m, eps);

  Mat tg(m.size(), chart.T.cols() + chart.G.cols());
  tg << chart.T, chart.G;
  const Vec sv = singular_values(tg);
  if (!(sv(sv.size() - 1) > 1e-8)) {
    throw Error(ErrorKind::degenerate_point,
                "X_i(m) and grad F_i(m) are not jointly of rank 2s (smallest singular value " +
                    std::to_string(sv(sv.size() - 1)) + ")");
  }
  chart.E = orthonormal_complement(tg);
  Mat ge(m.size(), chart.G.cols() + chart.E.cols());
  ge << chart.G, chart.E;
  chart.W = orthonormal_complement(ge);
  return chart;
}

struct ReturnMapResult {
  Vec y_hat;
  Vec a;              // lift offset along G
  Vec theta;          // group time removed by the projection
  Vec lift_point;     // m + G a + E y, on the level set beta
  Vec landing_point;  // g^{-theta}(g^c(lift_point))
  std::optional<Mat> jacobian;  // d y_hat / d y
};

namespace detail {

inline Vec lift_to_level(const HamiltonianSystem& sys, const AdaptedChart& chart, const Vec& beta, const Vec& y,
                         double eps, const ContinuationOptions& opts, Vec a) {
  const Vec offset = chart.base + chart.E * y;
  for (int it = 0;; ++it) {
    const Vec p = offset + chart.G * a;
    const Vec r = sys.levels(p, eps) - beta;
    if (!all_finite(r)) throw Error(ErrorKind::chart_overflow, "levels became non-finite during lift");
    if (max_abs(r) < opts.lift_tol * (1.0 + max_abs(beta))) return a;
    if (it >= opts.max_sub_iter) throw Error(ErrorKind::chart_overflow, "lift to the level set did not converge");
    const Mat jac = sys.gradients(p, eps).transpose() * chart.G;
    if (!(condition_number(jac) < opts.max_condition)) {
      throw Error(ErrorKind::chart_overflow, "lift Jacobian is singular");
    }
    a -= jac.partialPivLu().solve(r);
    if ((chart.G * a).norm() + (chart.E * y).norm() > opts.chart_radius) {
      throw Error(ErrorKind::chart_overflow, "lifted point left the chart neighbourhood");
    }
  }
}

inline Vec project_to_section(const HamiltonianSystem& sys, const AdaptedChart& chart, const Vec& p_hat, double eps,
                              const ContinuationOptions& opts) {
  Vec theta = Vec::Zero(static_cast<Eigen::Index>(sys.s()));
  // The section meets each torus more than once; pull the orbit point towards
  // the base first so the Newton stage below picks the nearby intersection.
  Vec q = p_hat;
  double dist = (q - chart.base).norm();
  for (int it = 0; it < opts.max_sub_iter; ++it) {
    const Mat fields = vector_fields(sys, q, eps);
    const Vec step = fields.colPivHouseholderQr().solve(q - chart.base);
    if (!all_finite(step) || step.norm() < 1e-6) break;
    bool moved = false;
    for (double scale = 1.0; scale > 1e-3; scale *= 0.5) {
      const Vec trial = theta + scale * step;
      Vec tq = composed_flow(sys, p_hat, -trial, eps, false, opts.ode).endpoint;
      const double td = (tq - chart.base).norm();
      if (td < dist) {
        theta = trial;
        q = std::move(tq);
        dist = td;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  for (int it = 0;; ++it) {
    const Vec q = composed_flow(sys, p_hat, -theta, eps, false, opts.ode).endpoint;
    const Vec r = chart.W.transpose() * (q - chart.base);
    if (max_abs(r) < opts.project_tol) return theta;
    if (it >= opts.max_sub_iter) throw Error(ErrorKind::chart_overflow, "projection onto the section did not converge");
    const Mat jac = -chart.W.transpose() * vector_fields(sys, q, eps);
    if (!(condition_number(jac) < opts.max_condition)) {
      throw Error(ErrorKind::chart_overflow, "group orbit is tangent to the section");
    }
    theta -= jac.partialPivLu().solve(r);
    if (!all_finite(theta) || theta.norm() > 1e3) {
      throw Error(ErrorKind::chart_overflow, "projection drifted away from the section");
    }
  }
}

}  // namespace detail

/// (beta, y) -> y_hat. With `with_jacobian` also returns d y_hat / d y, from
/// the tangent flow (default) or forward differences per `opts.jacobian`.
inline ReturnMapResult return_map(const HamiltonianSystem& sys, const AdaptedChart& chart, const PeriodVector& pv,
                                  const Vec& beta, const Vec& y, double eps, const ContinuationOptions& opts = {},
                                  bool with_jacobian = false) {
  if (static_cast<std::size_t>(y.size()) != chart.transverse_dim() ||
      static_cast<std::size_t>(beta.size()) != sys.s()) {
    throw Error(ErrorKind::dimension, "return map expects beta in R^s and y in R^{2(n-s)}");
  }
  const bool variational = with_jacobian && opts.jacobian == ReturnJacobian::variational;

  ReturnMapResult out;
  out.a = detail::lift_to_level(sys, chart, beta, y, eps, opts, Vec::Zero(static_cast<Eigen::Index>(sys.s())));
  out.lift_point = chart.base + chart.G * out.a + chart.E * y;
  const FlowResult forward = composed_flow(sys, out.lift_point, pv.c, eps, variational, opts.ode);
  out.theta = detail::project_to_section(sys, chart, forward.endpoint, eps, opts);
  const FlowResult back = composed_flow(sys, forward.endpoint, -out.theta, eps, variational, opts.ode);
  out.landing_point = back.endpoint;
  out.y_hat = chart.E.transpose() * (out.landing_point - chart.base);

  if (!with_jacobian) return out;
  const auto r2 = y.size();
  if (variational) {
    // y -> lift point -> g^c -> g^{-theta(y)}, differentiated along the level set.
    const Mat grads = sys.gradients(out.lift_point, eps);
    const Mat da = -(grads.transpose() * chart.G).partialPivLu().solve(grads.transpose() * chart.E);
    const Mat dp = chart.G * da + chart.E;
    const Mat k = *back.jacobian * (*forward.jacobian * dp);
    const Mat x_land = vector_fields(sys, out.landing_point, eps);
    const Mat dtheta = (chart.W.transpose() * x_land).partialPivLu().solve(chart.W.transpose() * k);
    out.jacobian = chart.E.transpose() * (k - x_land * dtheta);
  } else {
    Mat jac(r2, r2);
    Vec yp = y;
    for (Eigen::Index j = 0; j < r2; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(y(j)));
      yp(j) = y(j) + h;
      jac.col(j) = (return_map(sys, chart, pv, beta, yp, eps, opts, false).y_hat - out.y_hat) / h;
      yp(j) = y(j);
    }
    out.jacobian = std::move(jac);
  }
  return out;
}

struct TorusRecord {
  Vec beta;
  double epsilon = 0.0;
  Vec y_star;
  Vec section_point;
  double residual = 0.0;
  Mat return_jacobian;
  ComplexSpectrum transverse_multipliers;  // spectrum of return_jacobian
  Vec lift_offset;
  Vec theta;
  int newton_iterations = 0;
  PeriodVector alpha_period;  // re-solved on this torus
  Mat periods;                // s x s, column k closes the class e_k
  Mat frequency_matrix;       // 2 pi periods^{-T}; row i = frequencies of F_i
  Vec frequencies;            // row kappa of frequency_matrix
  std::size_t kappa = 0;
  MonodromyReport monodromy;
  std::vector<Vec> samples;
};

/// Frequencies of every integral over the angle basis defined by the period
/// lattice: A = 2 pi L^{-T}, so that the flow of F_i advances angle j at rate A(i, j).
inline Mat frequency_matrix_from_periods(const Mat& periods) {
  const double two_pi = 2.0 * std::numbers::pi;
  return two_pi * periods.transpose().partialPivLu().inverse();
}

inline Mat resolve_period_lattice(const HamiltonianSystem& sys, const Vec& point, const Mat& guesses, double eps,
                                  const ContinuationOptions& opts) {
  const auto s = static_cast<Eigen::Index>(sys.s());
  Mat lattice(s, s);
  for (Eigen::Index k = 0; k < s; ++k) {
    const IVec ek = IVec::Unit(s, k);
    lattice.col(k) = find_period_vector(sys, point, ek, guesses.col(k), eps, opts.ode, opts.period).c;
  }
  return lattice;
}

/// Newton on y_hat(beta, y) - y. The return Jacobian is checked at the guess:
/// a multiplier within margin_tol of 1 means the fixed point is not isolated.
inline TorusRecord solve_torus(const HamiltonianSystem& sys, const AdaptedChart& chart, const PeriodVector& pv,
                               const Vec& beta, double eps, const Vec& y_guess, const Mat& lattice_guess,
                               const ContinuationOptions& opts = {}) {
  const auto r2 = static_cast<Eigen::Index>(chart.transverse_dim());
  std::optional<std::pair<Vec, ReturnMapResult>> cache;
  auto evaluate = [&](const Vec& y) -> const ReturnMapResult& {
    if (!cache || cache->first.size() != y.size() || cache->first != y) {
      cache.emplace(y, return_map(sys, chart, pv, beta, y, eps, opts, true));
    }
    return cache->second;
  };

  const ReturnMapResult& at_guess = evaluate(y_guess);
  const ComplexSpectrum guess_spec = eigenvalues(*at_guess.jacobian);
  for (const auto& z : guess_spec.values) {
    if (std::abs(z - Complex(1.0, 0.0)) < opts.margin_tol) {
      throw Error(ErrorKind::nondegeneracy_failure,
                  "return map has a multiplier within " + std::to_string(opts.margin_tol) +
                      " of 1; the torus is not isolated in its section");
    }
  }

  NewtonOptions nopts;
  nopts.tol = opts.fixed_point_tol;
  nopts.max_iter = opts.max_newton;
  nopts.max_condition = opts.max_condition;
  const NewtonResult sol = newton_solve(
      [&](const Vec& y) -> Vec { return evaluate(y).y_hat - y; }, y_guess, nopts,
      [&](const Vec& y) -> Mat { return *evaluate(y).jacobian - Mat::Identity(r2, r2); });
  const ReturnMapResult& fixed = evaluate(sol.root);

  TorusRecord rec;
  rec.beta = beta;
  rec.epsilon = eps;
  rec.y_star = sol.root;
  rec.residual = sol.residual;
  rec.newton_iterations = sol.iterations;
  rec.return_jacobian = *fixed.jacobian;
  rec.transverse_multipliers = eigenvalues(rec.return_jacobian);
  rec.section_point = fixed.lift_point;
  rec.lift_offset = fixed.a;
  rec.theta = fixed.theta;
  rec.alpha_period =
      find_period_vector(sys, rec.section_point, pv.alpha, pv.c - fixed.theta, eps, opts.monodromy_ode, opts.period);
  rec.periods = resolve_period_lattice(sys, rec.section_point, lattice_guess, eps, opts);
  rec.frequency_matrix = frequency_matrix_from_periods(rec.periods);
  rec.kappa = opts.kappa;
  rec.frequencies = rec.frequency_matrix.row(static_cast<Eigen::Index>(opts.kappa)).transpose();
  rec.monodromy = monodromy(sys, rec.section_point, rec.alpha_period, eps, opts.tol_unit, opts.monodromy_ode);
  return rec;
}

/// Tensor grid of levels: axis k has count[k] nodes spaced step[k] and
/// centred on center[k].
struct BetaGrid {
  Vec center;
  Vec step;
  std::vector<int> count;

  std::size_t axes() const noexcept { return count.size(); }

  std::size_t size() const {
    std::size_t total = 1;
    for (int c : count) total *= static_cast<std::size_t>(std::max(c, 0));
    return count.empty() ? 0 : total;
  }

  Vec node(const std::vector<int>& index) const {
    Vec out = center;
    for (std::size_t k = 0; k < count.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      out(kk) += (index[k] - 0.5 * (count[k] - 1)) * step(kk);
    }
    return out;
  }

  static BetaGrid single(const Vec& beta) {
    return BetaGrid{beta, Vec::Zero(beta.size()), std::vector<int>(static_cast<std::size_t>(beta.size()), 1)};
  }
};

enum class NodeStatus { converged, failed, unreached };

inline std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::converged: return "converged";
    case NodeStatus::failed: return "failed";
    case NodeStatus::unreached: return "unreached";
  }
  return "unknown";
}

struct FamilyNode {
  std::vector<int> beta_index;
  int eps_index = 0;
  Vec beta;
  double epsilon = 0.0;
  NodeStatus status = NodeStatus::unreached;
  std::optional<std::size_t> predictor;  // node whose solution seeded this one
  std::string message;
  std::optional<TorusRecord> record;
};

struct TorusFamily {
  BetaGrid beta_grid;
  std::vector<double> eps_grid;
  std::vector<FamilyNode> nodes;
  AdaptedChart chart;
  std::size_t start = 0;

  std::size_t converged_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const FamilyNode& n) {
      return n.status == NodeStatus::converged;
    }));
  }

  std::optional<std::size_t> find(const std::vector<int>& beta_index, int eps_index) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].eps_index == eps_index && nodes[i].beta_index == beta_index) return i;
    return std::nullopt;
  }
};

/// Walks the (beta, eps) grid breadth-first from the node nearest (beta0, 0).
/// Each node starts from the converged neighbour that reached it; a failed node
/// is recorded and not expanded, so the converged set marks the realized extent
/// of the family. The chart is frozen at the seed point with eps = 0.
inline TorusFamily continue_family(const HamiltonianSystem& sys, const TorusSeed& seed, const BetaGrid& grid,
                                   const std::vector<double>& eps_grid, const ContinuationOptions& opts = {}) {
  if (grid.size() == 0 || eps_grid.empty()) throw Error(ErrorKind::geometry, "empty continuation grid");
  if (grid.axes() != sys.s()) throw Error(ErrorKind::dimension, "beta grid must have s axes");

  TorusFamily fam;
  fam.beta_grid = grid;
  fam.eps_grid = eps_grid;
  fam.chart = build_chart(sys, seed.base, 0.0);

  std::vector<int> idx(grid.axes(), 0);
  for (int e = 0; e < static_cast<int>(eps_grid.size()); ++e) {
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      FamilyNode node;
      node.beta_index = idx;
      node.eps_index = e;
      node.beta = grid.node(idx);
      node.epsilon = eps_grid[static_cast<std::size_t>(e)];
      fam.nodes.push_back(std::move(node));
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == grid.count[k]) idx[k++] = 0;
      if (k == idx.size()) break;
    }
  }

  auto distance_to_seed = [&](const FamilyNode& n) {
    double d = 0.0;
    for (std::size_t k = 0; k < grid.axes(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double scale = grid.step(kk) != 0.0 ? std::abs(grid.step(kk)) : 1.0;
      d += std::pow((n.beta(kk) - seed.beta0(kk)) / scale, 2);
    }
    return std::make_pair(std::abs(n.epsilon), d);
  };
  fam.start = 0;
  for (std::size_t i = 1; i < fam.nodes.size(); ++i)
    if (distance_to_seed(fam.nodes[i]) < distance_to_seed(fam.nodes[fam.start])) fam.start = i;

  const PeriodVector seed_pv = find_period_vector(sys, seed.base, seed.alpha, seed.c_guess(seed.alpha), 0.0,
                                                  opts.ode, opts.period);
  const Vec zero_y = Vec::Zero(static_cast<Eigen::Index>(fam.chart.transverse_dim()));

  std::vector<bool> queued(fam.nodes.size(), false);
  std::deque<std::size_t> queue{fam.start};
  queued[fam.start] = true;
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    FamilyNode& node = fam.nodes[cur];
    const TorusRecord* pred = node.predictor ? &*fam.nodes[*node.predictor].record : nullptr;
    try {
      node.record = solve_torus(sys, fam.chart, pred ? pred->alpha_period : seed_pv, node.beta, node.epsilon,
                                pred ? pred->y_star : zero_y, pred ? pred->periods : seed.periods, opts);
      node.status = NodeStatus::converged;
    } catch (const Error& err) {
      node.status = NodeStatus::failed;
      node.message = err.what();
      continue;
    }
    auto visit = [&](const std::vector<int>& bi, int ei) {
      if (auto j = fam.find(bi, ei); j && !queued[*j]) {
        queued[*j] = true;
        fam.nodes[*j].predictor = cur;
        queue.push_back(*j);
      }
    };
    for (std::size_t k = 0; k < grid.axes(); ++k) {
      for (int delta : {-1, 1}) {
        std::vector<int> bi = node.beta_index;
        bi[k] += delta;
        if (bi[k] >= 0 && bi[k] < grid.count[k]) visit(bi, node.eps_index);
      }
    }
    for (int delta : {-1, 1}) {
      const int ei = node.eps_index + delta;
      if (ei >= 0 && ei < static_cast<int>(eps_grid.size())) visit(node.beta_index, ei);
    }
  }
  return fam;
}

/// Convenience for a single node: the family of one record.
inline TorusRecord solve_seed_torus(const HamiltonianSystem& sys, const TorusSeed& seed, const Vec& beta, double eps,
                                    const ContinuationOptions& opts = {}) {
  const AdaptedChart chart = build_chart(sys, seed.base, 0.0);
  const PeriodVector pv =
      find_period_vector(sys, seed.base, seed.alpha, seed.c_guess(seed.alpha), 0.0, opts.ode, opts.period);
  return solve_torus(sys, chart, pv, beta, eps, Vec::Zero(static_cast<Eigen::Index>(chart.transverse_dim())),
                     seed.periods, opts);
}

struct SampleOptions {
  std::size_t grid_per_cycle = 16;
  /// Flow time used for the invariance check under each X_i.
  double invariance_time = 0.1;
  bool check_invariance = true;
  /// Step (in units of a lattice cycle) for the tangent-vector differences.
  double tangent_step = 1e-4;
  bool check_isotropy = true;
};

struct TorusSamples {
  std::vector<Vec> thetas;  // in [0, 1)^s, lattice coordinates
  std::vector<Vec> points;
  std::vector<double> f_dev;  // max_i |F_i - beta_i| per sample
  double max_f_dev = 0.0;
  double invariance_distance = 0.0;
  double isotropy_defect = 0.0;
};

namespace detail {

inline Vec torus_point(const HamiltonianSystem& sys, const Vec& origin, const Mat& periods, const Vec& theta,
                       double eps, const OdeOptions& ode) {
  return composed_flow(sys, origin, periods * theta, eps, false, ode).endpoint;
}

/// Euclidean distance from x to the torus theta -> g^{L theta}(origin),
/// refined by Gauss-Newton in theta from the given start.
inline double distance_to_torus(const HamiltonianSystem& sys, const Vec& origin, const Mat& periods, Vec theta,
                                const Vec& x, double eps, const OdeOptions& ode) {
  Vec p = torus_point(sys, origin, periods, theta, eps, ode);
  double best = (p - x).norm();
  for (int it = 0; it < 12; ++it) {
    const Mat jac = vector_fields(sys, p, eps) * periods;
    const Vec step = jac.colPivHouseholderQr().solve(x - p);
    theta += step;
    p = torus_point(sys, origin, periods, theta, eps, ode);
    const double d = (p - x).norm();
    const bool small_gain = d > 0.5 * best;
    best = std::min(best, d);
    if (step.norm() < 1e-14 || (small_gain && best < 1e-9)) break;
  }
  return best;
}

}  // namespace detail

/// Samples the torus of a converged record on a uniform lattice grid and
/// measures level pinning, invariance under each flow, and isotropy.
inline TorusSamples sample_torus(const HamiltonianSystem& sys, const TorusRecord& record, double eps,
                                 const SampleOptions& sopts = {}, const OdeOptions& ode = {}) {
  const auto s = static_cast<Eigen::Index>(sys.s());
  const std::size_t per = std::max<std::size_t>(sopts.grid_per_cycle, 1);
  std::size_t total = 1;
  for (Eigen::Index k = 0; k < s; ++k) total *= per;

  TorusSamples out;
  out.thetas.reserve(total);
  out.points.reserve(total);
  std::vector<std::size_t> idx(static_cast<std::size_t>(s), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Vec theta(s);
    for (Eigen::Index k = 0; k < s; ++k) theta(k) = static_cast<double>(idx[static_cast<std::size_t>(k)]) / per;
    Vec point = n == 0 ? record.section_point : detail::torus_point(sys, record.section_point, record.periods, theta, eps, ode);
    const double dev = max_abs(sys.levels(point, eps) - record.beta);
    out.f_dev.push_back(dev);
    out.max_f_dev = std::max(out.max_f_dev, dev);
    out.thetas.push_back(std::move(theta));
    out.points.push_back(std::move(point));
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == per) idx[k++] = 0;
  }

  if (sopts.check_invariance && total > 1) {
    for (std::size_t n = 0; n < total; ++n) {
      for (std::size_t i = 0; i < sys.s(); ++i) {
        const Vec image = evolve(sys, i, out.points[n], sopts.invariance_time, eps, false, ode).endpoint;
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < total; ++m) {
          const double d = (out.points[m] - image).squaredNorm();
          if (d < best) {
            best = d;
            nearest = m;
          }
        }
        const double dist = detail::distance_to_torus(sys, record.section_point, record.periods,
                                                      out.thetas[nearest], image, eps, ode);
        out.invariance_distance = std::max(out.invariance_distance, dist);
      }
    }
  }

  if (sopts.check_isotropy && s > 1) {
    const Mat jmat = symplectic_matrix(sys.n());
    for (std::size_t n = 0; n < total; ++n) {
      Mat tangents(static_cast<Eigen::Index>(sys.dim()), s);
      for (Eigen::Index k = 0; k < s; ++k) {
        const Vec shift = sopts.tangent_step * record.periods.col(k);
        const Vec fwd = composed_flow(sys, out.points[n], shift, eps, false, ode).endpoint;
        const Vec bwd = composed_flow(sys, out.points[n], -shift, eps, false, ode).endpoint;
        tangents.col(k) = (fwd - bwd) / (2.0 * sopts.tangent_step);
      }
      const Mat form = tangents.transpose() * jmat * tangents;
      out.isotropy_defect = std::max(out.isotropy_defect, form.cwiseAbs().maxCoeff());
    }
  }
  return out;
}

struct TwistEntry {
  std::size_t node = 0;
  Vec beta;
  double epsilon = 0.0;
  Mat d_freq_d_beta;  // s x s central differences
  Mat twist;          // d freq / d actions = d_freq_d_beta * A
  double det = 0.0;
  double det_beta = 0.0;
};

struct TwistSummary {
  double epsilon = 0.0;
  std::size_t entries = 0;
  double min_abs_det = 0.0;
  double max_abs_det = 0.0;
  double mean_det = 0.0;
  bool sign_stable = false;
  bool degenerate = false;
};

struct TwistReport {
  std::size_t kappa = 0;
  double tol = 0.0;
  std::vector<TwistEntry> entries;
  std::vector<TwistSummary> per_epsilon;
  bool nondegenerate = false;  // every epsilon level sign-stable and non-degenerate
};

/// Frequency-action Jacobian from central differences over the beta grid,
/// converted to actions with the chain rule d beta / d I = A.
inline TwistReport frequency_twist(const TorusFamily& family, std::size_t kappa, double tol_twist = 1e-6) {
  TwistReport rep;
  rep.kappa = kappa;
  rep.tol = tol_twist;
  const auto& grid = family.beta_grid;
  const std::size_t s = grid.axes();

  auto record_at = [&](const std::vector<int>& bi, int ei) -> const TorusRecord* {
    const auto j = family.find(bi, ei);
    if (!j || family.nodes[*j].status != NodeStatus::converged) return nullptr;
    return &*family.nodes[*j].record;
  };
  auto freq_of = [&](const TorusRecord& r) -> Vec {
    return r.frequency_matrix.row(static_cast<Eigen::Index>(kappa)).transpose();
  };

  for (std::size_t i = 0; i < family.nodes.size(); ++i) {
    const auto& node = family.nodes[i];
    if (node.status != NodeStatus::converged) continue;
    Mat d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
    bool interior = true;
    for (std::size_t k = 0; k < s && interior; ++k) {
      std::vector<int> lo = node.beta_index, hi = node.beta_index;
      --lo[k];
      ++hi[k];
      const double h = grid.step(static_cast<Eigen::Index>(k));
      if (lo[k] < 0 || hi[k] >= grid.count[k] || h == 0.0) {
        interior = false;
        break;
      }
      const TorusRecord* rlo = record_at(lo, node.eps_index);
      const TorusRecord* rhi = record_at(hi, node.eps_index);
      if (!rlo || !rhi) {
        interior = false;
        break;
      }
      d.col(static_cast<Eigen::Index>(k)) = (freq_of(*rhi) - freq_of(*rlo)) / (2.0 * h);
    }
    if (!interior) continue;
    TwistEntry e;
    e.node = i;
    e.beta = node.beta;
    e.epsilon = node.epsilon;
    e.d_freq_d_beta = d;
    e.twist = d * node.record->frequency_matrix;
    e.det = det(e.twist);
    e.det_beta = det(d);
    rep.entries.push_back(std::move(e));
  }
  if (rep.entries.empty()) {
    throw Error(ErrorKind::geometry, "no converged node has converged neighbours on both sides of every beta axis");
  }

  for (std::size_t ei = 0; ei < family.eps_grid.size(); ++ei) {
    TwistSummary sum;
    sum.epsilon = family.eps_grid[ei];
    sum.min_abs_det = std::numeric_limits<double>::infinity();
    int positive = 0, negative = 0;
    for (const auto& e : rep.entries) {
      if (family.nodes[e.node].eps_index != static_cast<int>(ei)) continue;
      ++sum.entries;
      sum.min_abs_det = std::min(sum.min_abs_det, std::abs(e.det));
      sum.max_abs_det = std::max(sum.max_abs_det, std::abs(e.det));
      sum.mean_det += e.det;
      (e.det > 0.0 ? positive : negative) += 1;
    }
    if (sum.entries == 0) continue;
    sum.mean_det /= static_cast<double>(sum.entries);
    sum.degenerate = sum.min_abs_det <= tol_twist;
    sum.sign_stable = !sum.degenerate && (positive == 0 || negative == 0);
    rep.per_epsilon.push_back(sum);
  }
  rep.nondegenerate = !rep.per_epsilon.empty() &&
                      std::all_of(rep.per_epsilon.begin(), rep.per_epsilon.end(),
                                  [](const TwistSummary& t) { return t.sign_stable; });
  return rep;
}

}  // namespace isotori
