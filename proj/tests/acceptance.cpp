// Acceptance suite. Prints one PASS/FAIL line per criterion with its
// measured values and wall time, and exits nonzero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "graphnls/energy.hpp"
#include "graphnls/minimize.hpp"
#include "graphnls/stationary.hpp"
#include "graphnls/thresholds.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace graphnls;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // <= 0 means no runtime bound
  std::function<Outcome()> body;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GridFunction const_exp(const GraphPtr& g, double c, double alpha) {
  return GridFunction::sample(g, [&](std::size_t e, double x) { return e == g->loop_edge() ? c : c * std::exp(-alpha * x); });
}

Outcome closed_form() {
  std::vector<double> err;
  for (double h : {4e-3, 2e-3, 1e-3}) {
    const double e = energy_localized(const_exp(build_tadpole(1.0, 50.0, h), 1.0, 0.5)).total;
    err.push_back(std::abs(e - oracle::test_energy(1.0, 0.5, 1.0)));
  }
  const double order = oracle::observed_order(err[0], err[1], err[2]);
  return {err[2] <= 1e-5 && order >= 1.8, fmt("err(h=1e-3)=%.3g order=%.3f", err[2], order)};
}

Outcome line_critical_mass() {
  double worst_mass = 0.0, worst_energy = 0.0;
  for (double lambda : {0.5, 1.0, 4.0}) {
    const double r = std::sqrt(lambda);
    const GridFunction u = soliton_profile(lambda, {0, 0.0}, build_line(40.0 / r, 1e-3 / r));
    worst_mass = std::max(worst_mass, std::abs(mass(u) - 2.7206990));
    worst_energy = std::max(worst_energy, std::abs(energy_full(u).total));
  }
  return {worst_mass <= 1e-6 && worst_energy <= 1e-4, fmt("max|mass-2.7206990|=%.3g max|E|=%.3g", worst_mass, worst_energy)};
}

Outcome witness_threshold() {
  bool ok = true;
  std::string d;
  for (double mu : {1.50, 1.70, 1.73}) {
    const bool none = !optimal_witness(mu, 1.0).has_value();
    ok = ok && none;
    d += fmt("%.4g:%s ", mu, none ? "none" : "FOUND");
  }
  for (double mu : {1.7321, 2.0, 2.5, 2.72}) {
    const auto w = optimal_witness(mu, 1.0);
    const bool neg = w.has_value() && w->energy < 0.0;
    ok = ok && neg;
    d += neg ? fmt("%.5g:E=%.3g ", mu, w->energy) : fmt("%.5g:MISSING ", mu);
  }
  return {ok, d};
}

struct CliRun {
  int code = -1;
  nlohmann::json report;
};

CliRun solve_cli(double mu) {
  const fs::path out = fs::temp_directory_path() / fmt("graphnls_accept_%d_%g.json", static_cast<int>(::getpid()), mu);
  const std::string cmd = fmt("\"%s\" solve --mu %.17g --L 1 --R 50 --h 0.01 --restarts 3 --no-profile --out \"%s\" > /dev/null 2>&1",
                              GRAPHNLS_CLI, mu, out.c_str());
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(out);
  if (in) r.report = nlohmann::json::parse(in);
  fs::remove(out);
  return r;
}

Outcome regime_classification() {
  const CliRun low = solve_cli(1.2), mid = solve_cli(2.0), high = solve_cli(3.0);
  if (low.report.is_null() || mid.report.is_null() || high.report.is_null()) return {false, "missing report"};
  const double e_low = low.report["best"]["final_energy"].get<double>();
  const double e_mid = mid.report["best"]["final_energy"].get<double>();
  double e_high = 0.0;
  for (const auto& v : high.report["best"]["energy_trace"]) e_high = std::min(e_high, v.get<double>());
  const bool ok = low.code == 2 && e_low >= 0.0 && e_low <= 1e-3 && mid.code == 0 && e_mid <= -0.041 &&
                  high.code == 3 && e_high < -10.0 && mid.report["runs"].size() >= 3;
  return {ok, fmt("mu=1.2: exit %d E=%.3g; mu=2: exit %d E=%.6f; mu=3: exit %d min trace=%.4g", low.code, e_low,
                  mid.code, e_mid, high.code, e_high)};
}

Outcome cross_validation() {
  MinimizeConfig cfg;
  cfg.mass = 2.0;
  const MultiStartResult gs = minimize_multistart(build_tadpole(1.0, 50.0, 0.01), cfg);
  if (gs.status != FlowStatus::converged) return {false, "minimizer did not converge"};
  const VerifyResult v = verify_against_minimizer(gs.best, 1e-3);
  const ShootingSolution s = shoot_at_mass(2.0, 1.0, gs.best.lambda);
  const double rel = std::abs(s.lambda - gs.best.lambda) / s.lambda;
  std::vector<double> res;
  for (double h : {0.02, 0.01, 0.005}) {
    const MultiStartResult r = minimize_multistart(build_tadpole(1.0, 30.0, h), cfg);
    res.push_back(r.best.kirchhoff_residual);
  }
  const double o1 = std::log2(res[0] / res[1]), o2 = std::log2(res[1] / res[2]);
  const bool ok = v.ok && v.distance <= 1e-3 && rel <= 1e-3 && o1 >= 1.8 && o2 >= 1.8;
  return {ok, fmt("Linf=%.3g lambda rel=%.3g kirchhoff orders %.2f %.2f", v.distance, rel, o1, o2)};
}

Outcome threshold_bracket() {
  ScanConfig cfg;  // 30 points on [1.40, 2.72], L=1, R=50, h=0.01
  const ThresholdReport r = scan_mass(cfg);
  const ThresholdBracket& b = r.bracket;
  const bool ok = r.curve.size() == 30 && b.lower_from_scan && b.upper_from_scan && r.bracket_consistent() &&
                  b.lower > 1.3604 && b.upper <= 1.7321 && r.monotonicity_violations.empty();
  return {ok, fmt("bracket (%.7f, %.7f] from scan=%d/%d, violations=%zu", b.lower, b.upper, b.lower_from_scan,
                  b.upper_from_scan, r.monotonicity_violations.size())};
}

Outcome gn_diagnostic() {
  const double line = estimate_gn_constant(build_line(20.0, 0.01), GnVariant::p6, 8);
  const double half = estimate_gn_constant(build_halfline(30.0, 0.01), GnVariant::infty, 8);
  const double r1 = line / oracle::gn_p6_line(), r2 = half / std::sqrt(2.0);
  return {std::abs(r1 - 1.0) <= 0.05 && std::abs(r2 - 1.0) <= 0.05,
          fmt("line p6 %.6f (ratio %.4f), half-line sup %.6f (ratio %.4f)", line, r1, half, r2)};
}

GridFunction random_smooth(const GraphPtr& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double L = g->grid_length(g->loop_edge());
  const double a = 2.0 * u01(rng) - 1.0, b = 2.0 * u01(rng) - 1.0, base = 0.5 + u01(rng), decay = 0.3 + u01(rng);
  const double k = 1.0 + std::floor(4.0 * u01(rng));
  return GridFunction::sample(g, [&](std::size_t e, double x) {
    if (e == g->loop_edge()) return base + a * std::sin(2.0 * oracle::pi * k * x / L) + b * std::sin(oracle::pi * x / L);
    return (base + b * x) * std::exp(-decay * x);
  });
}

Outcome property_suites() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  const GraphPtr g = build_tadpole(1.0, 6.0, 0.01);

  const GridFunction u = random_smooth(g, rng);
  const GridFunction grad = energy_gradient(u);
  double fd_worst = 0.0;
  for (int d = 0; d < 20; ++d) {
    GridFunction phi = random_smooth(g, rng);
    if (d % 2 == 1) {
      for (double& v : phi.values()) v = n01(rng);
    }
    auto at = [&](double t) {
      std::vector<double> w(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] + t * phi[i];
      return energy_localized(GridFunction(g, std::move(w))).total;
    };
    const double fd = (at(1e-5) - at(-1e-5)) / 2e-5;
    fd_worst = std::max(fd_worst, std::abs(inner(grad, phi) - fd) / std::abs(fd));
  }

  MinimizeConfig cfg;
  cfg.mass = 2.0;
  double mass_worst = 0.0;
  const GraphPtr flow_graph = build_tadpole(1.0, 50.0, 0.01);
  for (const LabeledInit& init : preset_inits(flow_graph, cfg.mass)) {
    const MinimizeReport r = minimize(flow_graph, cfg, init.profile, init.label);
    for (double m : r.mass_trace) mass_worst = std::max(mass_worst, std::abs(m - cfg.mass) / cfg.mass);
  }

  double drift = 0.0;
  std::uniform_real_distribution<double> lam(0.2, 6.0), amp(0.1, 1.4), slope(-1.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const double l = lam(rng), a = amp(rng), b = slope(rng);
    const LoopOrbit o = integrate_loop(l, a, b, 1.0, 2000);
    if (o.blew_up) continue;
    drift = std::max(drift, std::abs(loop_first_integral(l, o.end_value, o.end_slope) - loop_first_integral(l, a, b)));
  }

  int ordering_failures = 0;
  const GraphPtr small = build_tadpole(1.0, 10.0, 0.02);
  for (int t = 0; t < 100; ++t) {
    GridFunction v = random_smooth(small, rng);
    if (t % 2 == 1) {
      for (double& x : v.values()) x = n01(rng);
    }
    ordering_failures += energy_localized(v).total < energy_full(v).total;
  }

  const bool ok = fd_worst <= 1e-5 && mass_worst <= 1e-10 && drift <= 1e-8 && ordering_failures == 0;
  return {ok, fmt("fd rel=%.3g mass rel=%.3g drift=%.3g ordering failures=%d", fd_worst, mass_worst, drift,
                  ordering_failures)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "closed-form test function energy", 1.0, closed_form},
      {2, "critical mass of the line", 5.0, line_critical_mass},
      {3, "witness threshold", 0.0, witness_threshold},
      {4, "regime classification", 120.0, regime_classification},
      {5, "minimizer vs shooting", 60.0, cross_validation},
      {6, "threshold bracket", 600.0, threshold_bracket},
      {7, "GN diagnostic", 60.0, gn_diagnostic},
      {8, "property suites", 0.0, property_suites},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_seconds <= 0.0 || secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d (%s): %s [%.2fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(),
                secs, in_time ? "" : fmt(", over %.0fs budget", c.budget_seconds).c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
