#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "graphnls/minimize.hpp"
#include "graphnls/stationary.hpp"
#include "oracles.hpp"

using namespace graphnls;

namespace {

const MultiStartResult& ground_state_mu2() {
  static const MultiStartResult r = [] {
    MinimizeConfig cfg;
    cfg.mass = 2.0;
    return minimize_multistart(build_tadpole(1.0, 50.0, 0.01), cfg);
  }();
  return r;
}

}  // namespace

TEST(IntegrateLoop, LinearOracle) {
  for (double L : {0.5, 1.0, 2.0}) {
    const LoopOrbit o = integrate_loop(1.0, 1.0, 0.0, L, 2000, false);
    EXPECT_NEAR(o.end_value, std::cosh(L), 1e-8);
    EXPECT_NEAR(o.end_slope, std::sinh(L), 1e-8);
    // Integrals of cosh^2 and sinh^2 over [0, L].
    EXPECT_NEAR(o.mass, 0.5 * L + 0.25 * std::sinh(2.0 * L), 1e-8);
    EXPECT_NEAR(o.kinetic, 0.25 * std::sinh(2.0 * L) - 0.5 * L, 1e-8);
  }
}

TEST(IntegrateLoop, ZeroIsAnEquilibrium) {
  const LoopOrbit o = integrate_loop(2.0, 0.0, 0.0, 1.0, 500);
  EXPECT_EQ(o.end_value, 0.0);
  EXPECT_EQ(o.end_slope, 0.0);
  for (double v : o.profile) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(o.profile.size(), 501u);
}

TEST(IntegrateLoop, FirstIntegralIsConserved) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lam(0.2, 6.0), amp(0.1, 1.4), slope(-1.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const double l = lam(rng), a = amp(rng), b = slope(rng);
    const LoopOrbit o = integrate_loop(l, a, b, 1.0, 2000);
    if (o.blew_up) continue;
    const double drift = std::abs(loop_first_integral(l, o.end_value, o.end_slope) - loop_first_integral(l, a, b));
    EXPECT_LE(drift, 1e-8) << "lambda=" << l << " a=" << a << " b=" << b;
  }
}

TEST(IntegrateLoop, BlowUpIsReported) {
  const LoopOrbit o = integrate_loop(1.0, 50.0, 0.0, 1.0, 200, true, 1e3);
  EXPECT_TRUE(o.blew_up);
  EXPECT_THROW(integrate_loop(1.0, 1.0, 0.0, 1.0, 10), std::invalid_argument);
}

TEST(Shoot, ResidualsAndPositivity) {
  for (double lambda : {0.5, 1.17, 3.0, 10.0}) {
    const ShootingSolution s = shoot_ground(lambda, 1.0);
    EXPECT_LE(std::abs(s.match_value), 1e-8) << lambda;
    EXPECT_LE(std::abs(s.match_slope), 1e-8) << lambda;
    EXPECT_GT(s.a, 0.0) << lambda;
    for (double v : s.loop_profile) EXPECT_GT(v, 0.0);
    // Independent mass: loop integral plus the exact exponential tail.
    const double loop_mass = oracle::simpson(
        [&](double x) {
          const double pos = x * static_cast<double>(s.loop_profile.size() - 1);
          const auto k = static_cast<std::size_t>(pos);
          const double f = pos - static_cast<double>(k);
          const double v = k + 1 < s.loop_profile.size() ? (1 - f) * s.loop_profile[k] + f * s.loop_profile[k + 1]
                                                          : s.loop_profile.back();
          return v * v;
        },
        0.0, 1.0, 4000);
    EXPECT_NEAR(s.mass, loop_mass + s.a * s.a / (2.0 * std::sqrt(lambda)), 1e-5) << lambda;
  }
}

TEST(Shoot, RejectsBadInputAndHopelessGuesses) {
  EXPECT_THROW(shoot(0.0, 1.0, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(shoot(1.0, -1.0, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(shoot(1.0, 1.0, {1e4, 0.0}), ShootingFailure);
}

TEST(Shoot, MassCurveCrossesTheWitnessWindow) {
  std::vector<double> lambdas;
  for (double l = 0.05; l < 400.0; l *= 1.25) lambdas.push_back(l);
  const auto sols = sweep_lambda(lambdas, 1.0);
  ASSERT_GE(sols.size(), lambdas.size() - 2);
  double lo = 1e9, hi = 0.0;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    lo = std::min(lo, sols[i].mass);
    hi = std::max(hi, sols[i].mass);
    if (i > 0) EXPECT_LT(std::abs(sols[i].mass - sols[i - 1].mass), 0.25) << "jump at lambda=" << sols[i].lambda;
  }
  EXPECT_LE(lo, std::sqrt(3.0));
  EXPECT_GE(hi, 2.6);
  // Concentrated states look like a soliton centred at the far loop point,
  // so the mass tends to that of the soliton on the line.
  EXPECT_NEAR(sols.back().mass, oracle::mu_line(), 1e-3);
  EXPECT_GT(sols.back().mass, oracle::mu_line());
}

TEST(Shoot, AtMassTwoAgreesWithTheMinimizer) {
  const MultiStartResult& gs = ground_state_mu2();
  ASSERT_EQ(gs.status, FlowStatus::converged);
  const ShootingSolution s = shoot_at_mass(2.0, 1.0, 1.0);
  EXPECT_NEAR(s.mass, 2.0, 1e-6);
  EXPECT_NEAR(s.lambda / gs.best.lambda, 1.0, 1e-3);
  EXPECT_NEAR(s.energy, gs.best.final_energy, 1e-3);
  // Fed back through the discrete energy on the same grid.
  const GridFunction u = sample_on(s, gs.best.profile.graph_ptr());
  EXPECT_NEAR(energy_localized(u).total, gs.best.final_energy, 1e-3);
  EXPECT_NEAR(lambda_estimate(u) / s.lambda, 1.0, 1e-3);
}

TEST(SampleOn, KirchhoffResidualOfShootingSolution) {
  const ShootingSolution s = shoot_ground(1.17, 1.0);
  const GridFunction u = sample_on(s, build_tadpole(1.0, 40.0, 5e-4));
  EXPECT_LE(kirchhoff_residual(u), 1e-6);
  EXPECT_NEAR(u.vertex_value(0), s.a, 1e-14);
}

TEST(SampleOn, EulerLagrangeResidual) {
  // g = -lambda u at a stationary point (g the L2 gradient of E(., K)). The
  // vertex row is first order in h, so the check runs on a fine grid with a
  // tightly closed orbit.
  ShootingOptions opt;
  opt.steps = 20000;
  opt.tolerance = 1e-14;
  opt.max_iterations = 80;
  const ShootingSolution s = shoot_ground(1.17, 1.0, opt);
  std::vector<double> worst;
  for (double h : {1e-4, 5e-5}) {
    const GridFunction u = sample_on(s, build_tadpole(1.0, 40.0, h));
    const GridFunction g = energy_gradient(u);
    double r = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) r = std::max(r, std::abs(g[i] + s.lambda * u[i]));
    worst.push_back(r);
  }
  EXPECT_LE(worst.back(), 1e-4);
  EXPECT_NEAR(worst[0] / worst[1], 2.0, 0.3);
}

TEST(Verify, GroundStateMatchesShooting) {
  const MultiStartResult& gs = ground_state_mu2();
  const VerifyResult v = verify_against_minimizer(gs.best, 1e-3);
  EXPECT_TRUE(v.ok) << v.reason;
  EXPECT_LE(v.distance, 1e-3);
  ASSERT_TRUE(v.solution.has_value());
  EXPECT_NEAR(v.solution->lambda, gs.best.lambda, 1e-12);
}

TEST(Verify, DetectsPerturbedProfile) {
  MinimizeReport r = ground_state_mu2().best;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (double& v : r.profile.values()) v += 0.1 * n01(rng);
  const VerifyResult v = verify_against_minimizer(r, 1e-3);
  EXPECT_FALSE(v.ok);
  if (v.solution) EXPECT_GT(v.distance, 1e-2);
}

TEST(Verify, RejectsVanishingReports) {
  MinimizeConfig cfg;
  cfg.mass = 1.2;
  const MultiStartResult r = minimize_multistart(build_tadpole(1.0, 50.0, 0.01), cfg);
  ASSERT_TRUE(r.best.vanishing_detected);
  EXPECT_THROW(verify_against_minimizer(r.best, 1e-3), std::invalid_argument);
}
