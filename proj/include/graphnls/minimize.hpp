#pragma once

// Normalized gradient flow for E(.,K) on the mass sphere, with detection of
// the two ways a minimizing sequence can fail to converge on the tadpole:
// mass escaping along the half-line (vanishing) and collapse (unboundedness).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphnls/detail/preconditioner.hpp"
#include "graphnls/energy.hpp"
#include "graphnls/graph.hpp"

namespace graphnls {

enum class FlowStatus { converged, vanishing, unbounded, budget_exhausted, stalled };

inline const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::converged: return "converged";
    case FlowStatus::vanishing: return "vanishing";
    case FlowStatus::unbounded: return "unbounded";
    case FlowStatus::budget_exhausted: return "budget_exhausted";
    case FlowStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct MinimizeConfig {
  double mass = 2.0;
  // Step schedule: steps start at initial_step, are multiplied by
  // backtrack_factor on energy increase and by growth_factor after each
  // accepted step, capped at max_step.
  double initial_step = 1.0;
  double backtrack_factor = 0.5;
  double growth_factor = 1.5;
  double max_step = 1.0;
  double min_step = 1e-14;
  std::size_t max_iterations = 20000;
  double energy_tol = 1e-12;
  double grad_tol = 1e-8;
  // Vanishing: the outer `tail_window` fraction of the truncated half-line
  // holds more than `tail_mass_threshold` of the mass while E >= -vanishing_energy_tol.
  double tail_window = 0.8;
  double tail_mass_threshold = 0.5;
  double vanishing_energy_tol = 1e-6;
  // Unboundedness: energy below divergence_floor, or the profile collapsing to
  // grid scale (int |u'|^2 * h^2 / mu above collapse_ratio).
  double divergence_floor = -1e6;
  double collapse_ratio = 0.05;
  // Number of constant-plus-exponential starts in the multi-start.
  std::size_t restarts = 3;
  // H^1-preconditioned steps; plain L2 gradient steps otherwise.
  bool preconditioned = true;

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
    };
    positive(mass, "mass");
    positive(initial_step, "initial_step");
    positive(max_step, "max_step");
    positive(min_step, "min_step");
    positive(energy_tol, "energy_tol");
    positive(grad_tol, "grad_tol");
    positive(vanishing_energy_tol, "vanishing_energy_tol");
    positive(collapse_ratio, "collapse_ratio");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) throw std::invalid_argument("backtrack_factor must lie in (0,1)");
    if (!(growth_factor >= 1.0)) throw std::invalid_argument("growth_factor must be >= 1");
    if (!(tail_window > 0.0 && tail_window < 1.0)) throw std::invalid_argument("tail_window must lie in (0,1)");
    if (!(tail_mass_threshold > 0.0 && tail_mass_threshold < 1.0)) {
      throw std::invalid_argument("tail_mass_threshold must lie in (0,1)");
    }
    if (!(divergence_floor < 0.0)) throw std::invalid_argument("divergence_floor must be negative");
    if (max_iterations == 0) throw std::invalid_argument("max_iterations must be positive");
  }
};

struct MinimizeReport {
  GridFunction profile;
  std::vector<double> energy_trace;
  std::vector<double> mass_trace;  // mass of every iterate, starting point included
  double final_energy = 0.0;
  double lambda = 0.0;
  bool converged = false;
  bool vanishing_detected = false;
  bool unbounded = false;
  double tail_mass_fraction = 0.0;
  double kirchhoff_residual = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  FlowStatus status = FlowStatus::budget_exhausted;
  std::string init_label;
};

/// Multiplier of the stationary equation u'' + chi_K u^5 = lambda u, from
/// pairing it with u: lambda = (int_K u^6 - int |u'|^2) / mu.
inline double lambda_estimate(const GridFunction& u) {
  const double m = mass(u);
  if (!(m > 0.0)) throw std::domain_error("lambda_estimate: zero mass");
  return (detail::sextic_integral(u, true) - kinetic(u)) / m;
}

/// Fraction of the mass carried by the outer `window` fraction of the first
/// half-line, i.e. by x >= (1 - window) R.
inline double tail_mass_fraction(const GridFunction& u, double window) {
  const MetricGraph& g = u.graph();
  const std::size_t e = g.halfline_edge();
  const double total = mass(u);
  if (e == npos || !(total > 0.0)) return 0.0;
  const std::size_t n = g.intervals(e);
  const auto start = static_cast<std::size_t>(std::ceil((1.0 - window) * static_cast<double>(n)));
  const double h = g.spacing();
  double s = 0.0;
  for (std::size_t k = std::max<std::size_t>(start, 1); k < n; ++k) {
    const double v = u.at(e, k);
    s += h * v * v;
  }
  return s / total;
}

/// Plateau of height alpha_n on (1, n) of the half-line with unit linear
/// ramps, zero elsewhere, scaled to mass mu. Its energy tends to 0 as n grows
/// while the mass escapes to infinity.
inline GridFunction vanishing_family(double mu, std::size_t n, const GraphPtr& graph) {
  if (!(mu > 0.0)) throw std::invalid_argument("vanishing_family: mass must be positive");
  if (n < 2) throw std::invalid_argument("vanishing_family: need n >= 2");
  const std::size_t hl = graph->halfline_edge();
  if (hl == npos) throw std::invalid_argument("vanishing_family: graph has no half-line");
  const double nn = static_cast<double>(n);
  if (!(graph->grid_length(hl) > nn + 1.0)) {
    throw std::invalid_argument("vanishing_family: half-line truncation R must exceed n + 1");
  }
  auto u = GridFunction::sample(graph, [&](std::size_t e, double x) {
    if (e != hl) return 0.0;
    if (x <= 1.0) return x;
    if (x <= nn) return 1.0;
    if (x <= nn + 1.0) return nn + 1.0 - x;
    return 0.0;
  });
  return normalized(std::move(u), mu);
}

struct LabeledInit {
  std::string label;
  GridFunction profile;
};

/// Starting profiles for the multi-start, all of mass mu:
/// constant on the loop with an exponential tail for Lambda = c^2 L in
/// {mu/(k+1), ..., k mu/(k+1)} (k = restarts), a soliton centred on the loop,
/// and a member of the vanishing plateau family.
inline std::vector<LabeledInit> preset_inits(const GraphPtr& graph, double mu, std::size_t restarts = 3) {
  if (!(mu > 0.0)) throw std::invalid_argument("preset_inits: mass must be positive");
  if (!graph->is_tadpole()) throw std::invalid_argument("preset_inits: graph must be a tadpole");
  const std::size_t loop = graph->loop_edge();
  const double L = graph->grid_length(loop);
  std::vector<LabeledInit> out;
  for (std::size_t j = 1; j <= restarts; ++j) {
    const double big_lambda = mu * static_cast<double>(j) / static_cast<double>(restarts + 1);
    const double c = std::sqrt(big_lambda / L);
    const double alpha = c * c / (2.0 * (mu - big_lambda));
    auto u = GridFunction::sample(graph, [&](std::size_t e, double x) {
      return e == loop ? c : c * std::exp(-alpha * x);
    });
    out.push_back({"const_exp(alpha=" + std::to_string(alpha) + ")", normalized(std::move(u), mu)});
  }
  const double sqrt_lambda = 8.0 / L;
  out.push_back({"soliton_on_loop",
                 normalized(soliton_profile(sqrt_lambda * sqrt_lambda, {loop, 0.5 * L}, graph), mu)});
  const double R = graph->grid_length(graph->halfline_edge());
  const auto n = static_cast<std::size_t>(std::max(2.0, std::floor(0.5 * R)));
  if (R > static_cast<double>(n) + 1.0) out.push_back({"vanishing_plateau", vanishing_family(mu, n, graph)});
  return out;
}

namespace detail {

struct FlowState {
  double energy = 0.0;
  double kin = 0.0;
  double lambda = 0.0;
  double grad_norm = 0.0;
  std::vector<double> residual;  // raw partials of E + lambda * mass / 2
};

inline FlowState evaluate_flow(const GridFunction& u, double mu) {
  FlowState s;
  const auto w = u.graph().weights();
  s.kin = kinetic(u);
  const double sextic = sextic_integral(u, true);
  s.energy = 0.5 * s.kin - sextic / 6.0;
  s.lambda = (sextic - s.kin) / mu;
  s.residual = energy_partials(u, true);
  double g2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    s.residual[i] += s.lambda * w[i] * u[i];
    g2 += s.residual[i] * s.residual[i] / w[i];
  }
  s.grad_norm = std::sqrt(g2);
  return s;
}

}  // namespace detail

/// Normalized gradient flow from `init` (rescaled to cfg.mass): each step
/// moves against the projected gradient, rescales to the mass sphere, and
/// backtracks while the energy increases.
inline MinimizeReport minimize(const GraphPtr& graph, const MinimizeConfig& cfg, const GridFunction& init,
                               std::string label = "custom") {
  cfg.validate();
  if (init.graph_ptr() != graph) throw std::invalid_argument("minimize: init lives on a different graph");
  if (!(mass(init) > 0.0)) throw std::invalid_argument("minimize: initial profile has zero mass");
  const double mu = cfg.mass;
  const double h = graph->spacing();
  const auto w = graph->weights();

  MinimizeReport rep{
      .profile = normalized(init, mu), .energy_trace = {}, .mass_trace = {}, .init_label = std::move(label)};
  GridFunction& u = rep.profile;
  std::optional<detail::SobolevPreconditioner> precond;
  if (cfg.preconditioned) precond.emplace(*graph);

  detail::FlowState st = detail::evaluate_flow(u, mu);
  rep.energy_trace.push_back(st.energy);
  rep.mass_trace.push_back(mass(u));
  double last_change = std::numeric_limits<double>::infinity();
  double step = std::min(cfg.initial_step, cfg.max_step);
  if (!cfg.preconditioned) step = std::min(step, 0.25 * h * h);
  const double max_step = cfg.preconditioned ? cfg.max_step : 0.5 * h * h;

  std::size_t it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (st.grad_norm <= cfg.grad_tol && last_change <= cfg.energy_tol) {
      rep.converged = true;
      rep.status = FlowStatus::converged;
      break;
    }
    if (st.energy < cfg.divergence_floor || st.kin * h * h / mu > cfg.collapse_ratio) {
      rep.unbounded = true;
      rep.status = FlowStatus::unbounded;
      break;
    }
    std::vector<double> dir;
    if (precond) {
      precond->set_metric(1.0, std::max(st.lambda, 1e-8));
      dir = precond->solve(st.residual);
    } else {
      dir = st.residual;
      for (std::size_t i = 0; i < dir.size(); ++i) dir[i] /= w[i];
    }
    bool accepted = false;
    while (step >= cfg.min_step) {
      std::vector<double> trial(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] - step * dir[i];
      bool finite = std::all_of(trial.begin(), trial.end(), [](double v) { return std::isfinite(v); });
      if (finite) {
        GridFunction cand(graph, std::move(trial));
        const double m = mass(cand);
        if (m > 0.0) {
          cand *= std::sqrt(mu / m);
          const auto e = energy_localized(cand);
          // Slack at the level of rounding in E, far below energy_tol.
          const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(st.energy));
          if (std::isfinite(e.total) && e.total <= st.energy + slack) {
            last_change = std::abs(st.energy - e.total);
            u = std::move(cand);
            accepted = true;
            break;
          }
        }
      }
      step *= cfg.backtrack_factor;
    }
    if (!accepted) {
      rep.status = FlowStatus::stalled;
      break;
    }
    st = detail::evaluate_flow(u, mu);
    rep.energy_trace.push_back(st.energy);
    rep.mass_trace.push_back(mass(u));
    step = std::min(step * cfg.growth_factor, max_step);
  }
  if (it == cfg.max_iterations) {
    // The loop may have reached the budget right as it converged.
    if (st.grad_norm <= cfg.grad_tol && last_change <= cfg.energy_tol) {
      rep.converged = true;
      rep.status = FlowStatus::converged;
    } else {
      rep.status = FlowStatus::budget_exhausted;
    }
  }

  rep.iterations = it;
  rep.final_energy = st.energy;
  rep.lambda = st.lambda;
  rep.grad_norm = st.grad_norm;
  rep.tail_mass_fraction = tail_mass_fraction(u, cfg.tail_window);
  rep.kirchhoff_residual = kirchhoff_residual(u);
  if (!rep.unbounded && rep.tail_mass_fraction > cfg.tail_mass_threshold &&
      rep.final_energy >= -cfg.vanishing_energy_tol) {
    rep.vanishing_detected = true;
    rep.status = FlowStatus::vanishing;
  }
  return rep;
}

struct RunSummary {
  std::string init_label;
  FlowStatus status = FlowStatus::budget_exhausted;
  double final_energy = 0.0;
  double lambda = 0.0;
  std::size_t iterations = 0;
};

struct MultiStartResult {
  MinimizeReport best;
  std::vector<RunSummary> runs;
  FlowStatus status = FlowStatus::budget_exhausted;
};

/// Runs the flow from every preset and keeps the lowest final energy. Any
/// divergent run classifies the mass as unbounded.
inline MultiStartResult minimize_multistart(const GraphPtr& graph, const MinimizeConfig& cfg) {
  cfg.validate();
  auto inits = preset_inits(graph, cfg.mass, cfg.restarts);
  std::optional<MinimizeReport> best;
  std::vector<RunSummary> runs;
  bool any_unbounded = false;
  for (auto& init : inits) {
    MinimizeReport r = minimize(graph, cfg, init.profile, init.label);
    runs.push_back({r.init_label, r.status, r.final_energy, r.lambda, r.iterations});
    const bool better = !best || (r.unbounded && !best->unbounded) ||
                        (r.unbounded == best->unbounded && r.final_energy < best->final_energy);
    any_unbounded = any_unbounded || r.unbounded;
    if (better) best = std::move(r);
  }
  MultiStartResult out{.best = std::move(*best), .runs = std::move(runs)};
  out.status = any_unbounded ? FlowStatus::unbounded : out.best.status;
  return out;
}

}  // namespace graphnls
