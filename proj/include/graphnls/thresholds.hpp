#pragma once

// Mass thresholds on the tadpole: closed-form witnesses, the divergence
// witness above the critical mass, and a numerical bracket for the sharp
// onset of ground states.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "graphnls/energy.hpp"
#include "graphnls/graph.hpp"
#include "graphnls/minimize.hpp"

namespace graphnls {

struct MassEnergy {
  double mass = 0.0;
  double energy = 0.0;
};

/// Closed form for u = c on a loop of length L and u = c e^{-alpha x} on the
/// half-line.
inline MassEnergy test_function_energy(double c, double alpha, double L) {
  if (!(c > 0.0) || !(alpha > 0.0) || !(L > 0.0)) {
    throw std::invalid_argument("test_function_energy: c, alpha and L must be positive");
  }
  const double c2 = c * c;
  return {c2 * L + c2 / (2.0 * alpha), c2 * alpha / 4.0 - c2 * c2 * c2 * L / 6.0};
}

/// Sampled version of the same test function on a tadpole.
inline GridFunction test_function_profile(double c, double alpha, const GraphPtr& graph) {
  if (!graph->is_tadpole()) throw std::invalid_argument("test_function_profile: graph must be a tadpole");
  const std::size_t loop = graph->loop_edge();
  return GridFunction::sample(graph, [&](std::size_t e, double x) { return e == loop ? c : c * std::exp(-alpha * x); });
}

struct Witness {
  double c = 0.0;
  double alpha = 0.0;
  double big_lambda = 0.0;  // c^2 L
  double energy = 0.0;
};

/// Minimum over Lambda of Lambda^2 - mu Lambda + 3/4, attained at mu/2.
inline double witness_quadratic_minimum(double mu) { return 0.75 - 0.25 * mu * mu; }

/// The best constant-plus-exponential function of mass mu: Lambda = c^2 L sits
/// at the vertex mu/2 of the quadratic, which gives c = sqrt(mu/(2L)) and
/// alpha = 1/(2L). Returns nothing unless its energy is strictly negative,
/// i.e. unless mu > sqrt(3). At mu = sqrt(3) the energy is exactly 0.
inline std::optional<Witness> optimal_witness(double mu, double L) {
  if (!(mu > 0.0) || !(L > 0.0)) throw std::invalid_argument("optimal_witness: mu and L must be positive");
  const double q = witness_quadratic_minimum(mu);
  // The sign of the energy is the sign of q; decide it from mu^2 vs 3 with a
  // rounding guard so that mu = sqrt(3) lands on the zero boundary.
  const double gap = mu * mu - 3.0;
  if (!(gap > 8.0 * std::numeric_limits<double>::epsilon() * 3.0) || !(q < 0.0)) return std::nullopt;
  Witness w;
  w.big_lambda = 0.5 * mu;
  w.c = std::sqrt(w.big_lambda / L);
  w.alpha = w.c * w.c / (2.0 * (mu - w.c * w.c * L));
  w.energy = test_function_energy(w.c, w.alpha, L).energy;
  if (!(w.energy < 0.0)) return std::nullopt;
  return w;
}

struct UnboundedWitness {
  GridFunction profile;
  double energy = 0.0;
};

/// Critical soliton of parameter lambda centred at the loop midpoint, scaled
/// up to mass mu. For mu above the critical mass of the line the excess
/// amplitude makes E(u,K) ~ -C lambda, so the energy decreases without bound
/// as lambda grows. The grid must resolve the soliton width 1/(2 sqrt(lambda)).
inline UnboundedWitness unbounded_witness(double mu, double lambda, const GraphPtr& graph) {
  if (!(mu > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("unbounded_witness: mu and lambda must be positive");
  if (!graph->is_tadpole()) throw std::invalid_argument("unbounded_witness: graph must be a tadpole");
  const std::size_t loop = graph->loop_edge();
  const double L = graph->grid_length(loop);
  const double r = std::sqrt(lambda);
  if (r * L < 6.0) {
    throw std::invalid_argument("unbounded_witness: loop too short to hold the soliton at this lambda; "
                                "increase lambda to at least " + std::to_string(36.0 / (L * L)));
  }
  if (2.0 * r * graph->spacing() > 0.5) {
    throw std::invalid_argument("unbounded_witness: grid too coarse for this lambda; need h <= " +
                                std::to_string(0.25 / r));
  }
  GridFunction u = normalized(soliton_profile(lambda, {loop, 0.5 * L}, graph), mu);
  const double e = energy_localized(u).total;
  return {std::move(u), e};
}

struct ScanPoint {
  double mu = 0.0;
  double best_energy = 0.0;
  // Upper bound for the ground level: the vanishing family drives E to 0 at
  // every mass, so the level is at most min(best_energy, 0).
  double level_estimate = 0.0;
  bool attained = false;
  double lambda = 0.0;
  double tail_mass_fraction = 0.0;
  FlowStatus status = FlowStatus::budget_exhausted;
};

/// Bracket (lower, upper] for the onset of negative ground-state energy. An
/// end that the scan could not pin falls back to the analytic bound and is
/// flagged.
struct ThresholdBracket {
  double lower = 0.0;
  double upper = 0.0;
  bool lower_from_scan = false;
  bool upper_from_scan = false;
};

struct ThresholdReport {
  double mu_line = constants::mu_line;
  double mu_halfline = constants::mu_halfline;
  double mu_two = constants::mu_two;
  ThresholdBracket bracket;
  std::vector<ScanPoint> curve;
  // Indices i where curve[i+1].level_estimate exceeds curve[i].level_estimate
  // by more than the attainment tolerance.
  std::vector<std::size_t> monotonicity_violations;

  /// mu_halfline < lower <= upper <= mu_two.
  bool bracket_consistent() const {
    return mu_halfline < bracket.lower && bracket.lower <= bracket.upper && bracket.upper <= mu_two;
  }
};

struct ScanConfig {
  double mu_min = 1.40;
  double mu_max = 2.72;
  std::size_t steps = 30;
  double loop_length = 1.0;
  double radius = 50.0;
  double spacing = 0.01;
  MinimizeConfig solver{};
  // E < -attained_tol counts as strictly negative.
  double attained_tol = 1e-6;
  std::size_t threads = 1;
};

inline std::vector<double> scan_masses(const ScanConfig& cfg) {
  std::vector<double> mus(cfg.steps);
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    mus[i] = cfg.steps == 1 ? cfg.mu_min
                            : cfg.mu_min + (cfg.mu_max - cfg.mu_min) * static_cast<double>(i) /
                                               static_cast<double>(cfg.steps - 1);
  }
  return mus;
}

/// lower = largest scanned mu with best energy >= -tol, upper = smallest
/// scanned mu with best energy < -tol. A non-monotone curve can invert the
/// bracket, which bracket_consistent() then reports.
inline ThresholdBracket bracket_from_curve(const std::vector<ScanPoint>& curve, double attained_tol) {
  ThresholdBracket b{constants::mu_halfline, constants::mu_two, false, false};
  for (const ScanPoint& p : curve) {
    if (p.best_energy < -attained_tol) {
      if (!b.upper_from_scan || p.mu < b.upper) b.upper = p.mu;
      b.upper_from_scan = true;
    } else {
      if (!b.lower_from_scan || p.mu > b.lower) b.lower = p.mu;
      b.lower_from_scan = true;
    }
  }
  return b;
}

/// Multi-start ground-state search on a mass grid. Points run in parallel;
/// results are stored by index, so the report does not depend on `threads`.
inline ThresholdReport scan_mass(const ScanConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("scan_mass: need at least one step");
  if (!(cfg.mu_min > constants::mu_halfline)) throw std::invalid_argument("scan_mass: mu_min must exceed the half-line critical mass");
  if (!(cfg.mu_max <= constants::mu_line)) throw std::invalid_argument("scan_mass: mu_max must not exceed the line critical mass");
  if (cfg.steps > 1 ? !(cfg.mu_min < cfg.mu_max) : !(cfg.mu_min <= cfg.mu_max)) {
    throw std::invalid_argument("scan_mass: need mu_min < mu_max");
  }
  if (!(cfg.attained_tol > 0.0)) throw std::invalid_argument("scan_mass: attained_tol must be positive");
  const GraphPtr graph = build_tadpole(cfg.loop_length, cfg.radius, cfg.spacing);
  const auto mus = scan_masses(cfg);
  std::vector<ScanPoint> curve(mus.size());
  std::vector<std::exception_ptr> errors(mus.size());

  auto work = [&](std::size_t i) {
    try {
      MinimizeConfig mc = cfg.solver;
      mc.mass = mus[i];
      const MultiStartResult r = minimize_multistart(graph, mc);
      ScanPoint& p = curve[i];
      p.mu = mus[i];
      p.best_energy = r.best.final_energy;
      p.level_estimate = std::min(p.best_energy, 0.0);
      p.lambda = r.best.lambda;
      p.tail_mass_fraction = r.best.tail_mass_fraction;
      p.status = r.status;
      p.attained = r.status == FlowStatus::converged && r.best.final_energy < -cfg.attained_tol;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t nthreads = std::clamp<std::size_t>(cfg.threads, 1, mus.size());
  if (nthreads == 1) {
    for (std::size_t i = 0; i < mus.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < mus.size(); i += nthreads) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ThresholdReport rep;
  rep.curve = std::move(curve);
  rep.bracket = bracket_from_curve(rep.curve, cfg.attained_tol);
  for (std::size_t i = 0; i + 1 < rep.curve.size(); ++i) {
    if (rep.curve[i + 1].level_estimate > rep.curve[i].level_estimate + cfg.attained_tol) {
      rep.monotonicity_violations.push_back(i);
    }
  }
  return rep;
}

}  // namespace graphnls
