#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "isotori/floquet.hpp"
#include "isotori/models.hpp"
#include "support/error_kind.hpp"
#include "support/oracles.hpp"

using namespace isotori;

namespace {

ModelSpec system_c() {
  ModelSpec c;
  c.kind = ModelKind::isotropic_momentum;
  return c;
}

ModelSpec resonant_a() {
  ModelSpec a;
  a.parameters["omega"] = {1.0, std::sqrt(2.0), 2.0};
  return a;
}

struct Seeded {
  ModelSystem model;
  PeriodVector pv;
};

Seeded seeded(const ModelSpec& spec, double eps = 0.0) {
  auto model = make_system(spec);
  auto pv = find_period_vector(model.system, model.seed.base, model.seed.alpha, model.seed.c_guess(model.seed.alpha),
                               eps, precise_ode());
  return {std::move(model), std::move(pv)};
}

ComplexSpectrum expected(std::size_t s, const std::vector<double>& q) {
  ComplexSpectrum out;
  out.values.assign(2 * s, 1.0);
  for (double qj : q) {
    out.values.push_back(oracles::unit_phase(qj));
    out.values.push_back(oracles::unit_phase(-qj));
  }
  return out;
}

}  // namespace

TEST(Monodromy, SystemAMatchesRotation) {
  const auto [model, pv] = seeded(ModelSpec{});
  const auto rep = monodromy(model.system, model.seed.base, pv, 0.0);
  // transverse plane turns by omega_3 c_1 = 2 pi sqrt(3) over the class (1, 0)
  EXPECT_LT(spectrum_distance(rep.multipliers, expected(2, {std::sqrt(3.0)})), 1e-6);
  EXPECT_EQ(rep.unit_multiplicity, 4u);
  EXPECT_EQ(rep.base_point, model.seed.base);
  EXPECT_EQ(rep.period, pv.c);
}

TEST(Monodromy, LiouvilleCaseHasOnlyUnitMultipliers) {
  ModelSpec spec;
  spec.n = 2;
  spec.s = 2;
  const auto [model, pv] = seeded(spec);
  EXPECT_EQ(monodromy(model.system, model.seed.base, pv, 0.0).unit_multiplicity, 4u);
}

TEST(Monodromy, SystemCTransversePair) {
  const auto [model, pv] = seeded(system_c());
  const auto rep = monodromy(model.system, model.seed.base, pv, 0.0);
  EXPECT_LT(spectrum_distance(rep.multipliers, expected(2, {std::sqrt(2.0) / 2.0})), 1e-6);
  EXPECT_EQ(rep.unit_multiplicity, 4u);
}

TEST(Monodromy, SymplecticInvariants) {
  for (const auto& spec : {ModelSpec{}, system_c()}) {
    const auto [model, pv] = seeded(spec);
    const auto rep = monodromy(model.system, model.seed.base, pv, 0.0);
    EXPECT_LT(rep.reciprocal_defect, 1e-6);
    EXPECT_LT(rep.det_defect, 1e-6);
    EXPECT_LT(std::abs(det(rep.monodromy) - 1.0), 1e-6);
  }
}

TEST(Monodromy, RequiresClosedOrbit) {
  auto [model, pv] = seeded(ModelSpec{});
  pv.residual = 1e-3;
  EXPECT_EQ(kind_of([&] { monodromy(model.system, model.seed.base, pv, 0.0); }), ErrorKind::no_convergence);
}

TEST(HypothesisIII, PassesAtExactly2s) {
  const auto [model, pv] = seeded(ModelSpec{});
  const auto h = check_hypothesis_iii(monodromy(model.system, model.seed.base, pv, 0.0), 2);
  EXPECT_TRUE(h.pass);
  EXPECT_FALSE(h.numerical_warning);
  EXPECT_TRUE(h.offending.empty());
}

TEST(HypothesisIII, ResonantTransverseFrequencyFails) {
  const auto [model, pv] = seeded(resonant_a());
  const auto h = check_hypothesis_iii(monodromy(model.system, model.seed.base, pv, 0.0), 2);
  EXPECT_FALSE(h.pass);
  EXPECT_EQ(h.unit_multiplicity, 6u);
  EXPECT_FALSE(h.numerical_warning);
  EXPECT_EQ(h.offending.size(), 6u);
}

TEST(HypothesisIII, DeficitIsFlaggedAsNumerics) {
  MonodromyReport rep;
  rep.multipliers.values = {1.0, 1.0, Complex(0.0, 1.0), Complex(0.0, -1.0)};
  rep.unit_multiplicity = count_unit_multipliers(rep.multipliers, 1e-6);
  const auto h = check_hypothesis_iii(rep, 2);
  EXPECT_FALSE(h.pass);
  EXPECT_TRUE(h.numerical_warning);
  ASSERT_EQ(h.offending.size(), 2u);
  EXPECT_NEAR(h.offending[0].distance_to_one, std::sqrt(2.0), 1e-15);
}

TEST(BasepointInvariance, Singleton) {
  const auto [model, pv] = seeded(ModelSpec{});
  EXPECT_EQ(basepoint_invariance(model.system, {model.seed.base}, pv, 0.0), 0.0);
}

TEST(BasepointInvariance, FivePointsOnTheTorus) {
  for (const auto& spec : {ModelSpec{}, system_c()}) {
    const auto [model, pv] = seeded(spec);
    std::mt19937_64 rng(41);
    std::vector<Vec> points;
    for (int k = 0; k < 5; ++k) {
      const Vec tau = oracles::random_matrix(rng, 2, 1, 0.0, 6.0);
      points.push_back(composed_flow(model.system, model.seed.base, tau, 0.0, false, precise_ode()).endpoint);
    }
    EXPECT_LT(basepoint_invariance(model.system, points, pv, 0.0), 1e-6) << to_string(spec.kind);
  }
}

TEST(StripUnitMultipliers, RemovesNearestToOne) {
  ComplexSpectrum s;
  s.values = {Complex(0.0, 1.0), 1.0 + 1e-9, Complex(0.0, -1.0), 1.0 - 1e-9};
  const auto out = strip_unit_multipliers(s, 2);
  ASSERT_EQ(out.size(), 2u);
  for (auto z : out.values) EXPECT_NEAR(std::abs(z.imag()), 1.0, 1e-15);
}
