#pragma once

// Critical (sextic) NLS energies on sampled metric graphs, their discrete
// gradients, and Gagliardo-Nirenberg quotients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "graphnls/detail/preconditioner.hpp"
#include "graphnls/graph.hpp"

namespace graphnls {

namespace constants {
inline const double pi = std::acos(-1.0);
/// Critical mass of the real line.
inline const double mu_line = std::sqrt(3.0) * pi / 2.0;
/// Critical mass of the half-line.
inline const double mu_halfline = std::sqrt(3.0) * pi / 4.0;
/// Mass above which the constant-plus-exponential witness has negative energy.
inline const double mu_two = std::sqrt(3.0);
}  // namespace constants

struct EnergyBreakdown {
  double kinetic_half = 0.0;  // 1/2 int |u'|^2
  double nonlinear = 0.0;     // 1/6 int |u|^6 over the active region
  double total = 0.0;         // kinetic_half - nonlinear
};

namespace detail {

inline EnergyBreakdown make_energy(double kin, double sextic) {
  EnergyBreakdown e;
  e.kinetic_half = 0.5 * kin;
  e.nonlinear = sextic / 6.0;
  e.total = e.kinetic_half - e.nonlinear;
  return e;
}

inline double sextic_integral(const GridFunction& u, bool localized) {
  const MetricGraph& g = u.graph();
  return weighted_sum(localized ? g.core_weights() : g.weights(), u.values(), 6);
}

}  // namespace detail

/// E(u,K): kinetic term over the whole graph, sextic term over the compact
/// core only.
inline EnergyBreakdown energy_localized(const GridFunction& u) {
  return detail::make_energy(kinetic(u), detail::sextic_integral(u, true));
}

/// E(u): sextic term over every edge.
inline EnergyBreakdown energy_full(const GridFunction& u) {
  return detail::make_energy(kinetic(u), detail::sextic_integral(u, false));
}

/// Raw partial derivatives dE/du_i of the discrete energy.
inline std::vector<double> energy_partials(const GridFunction& u, bool localized) {
  const MetricGraph& g = u.graph();
  std::vector<double> d = detail::apply_stiffness(g, u.values());
  const auto w = localized ? g.core_weights() : g.weights();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double a = u[i];
    const double a2 = a * a;
    d[i] -= w[i] * a2 * a2 * a;
  }
  return d;
}

/// L2 gradient of the discrete energy: the vector g with
/// sum_i w_i g_i phi_i = dE(u + eps phi)/deps at eps = 0, where w are the
/// trapezoidal weights. Interior rows are -u'' - chi u^5; vertex rows carry
/// the Kirchhoff flux balance.
inline GridFunction energy_gradient(const GridFunction& u, bool localized = true) {
  std::vector<double> d = energy_partials(u, localized);
  const auto w = u.graph().weights();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] /= w[i];
  return GridFunction(u.graph_ptr(), std::move(d));
}

/// Weighted L2 inner product sum_i w_i a_i b_i.
inline double inner(const GridFunction& a, const GridFunction& b) {
  const auto w = a.graph().weights();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * a[i] * b[i];
  return s;
}

/// ||u||_6^6 / (||u||_2^4 ||u'||_2^2) over the whole graph.
inline double gn_quotient(const GridFunction& u) {
  const double m = mass(u);
  const double k = kinetic(u);
  if (!(m > 0.0) || !(k > 0.0)) throw std::domain_error("gn_quotient: zero denominator");
  return detail::sextic_integral(u, false) / (m * m * k);
}

inline double sup_norm(const GridFunction& u) {
  double s = 0.0;
  for (double v : u.values()) s = std::max(s, std::abs(v));
  return s;
}

/// ||u||_inf / (||u||_2^{1/2} ||u'||_2^{1/2}).
inline double gn_infty_quotient(const GridFunction& u) {
  const double m = mass(u);
  const double k = kinetic(u);
  if (!(m > 0.0) || !(k > 0.0)) throw std::domain_error("gn_infty_quotient: zero denominator");
  return sup_norm(u) / std::pow(m * k, 0.25);
}

/// Critical soliton (3 lambda)^{1/4} sech^{1/2}(2 sqrt(lambda) d), with d the
/// geodesic distance to `center`. On the line its mass is the critical mass
/// for every lambda.
inline GridFunction soliton_profile(double lambda, const GraphPoint& center, const GraphPtr& graph) {
  if (!(lambda > 0.0)) throw std::invalid_argument("soliton_profile: lambda must be positive");
  const auto vdist = graph->vertex_distances(center);  // throws if center is off the graph
  const double amp = std::pow(3.0 * lambda, 0.25);
  const double rate = 2.0 * std::sqrt(lambda);
  return GridFunction::sample(graph, [&](std::size_t e, double x) {
    const double d = graph->distance(center, vdist, e, x);
    return amp / std::sqrt(std::cosh(rate * d));
  });
}

enum class GnVariant { p6, infty };

struct GnAscentOptions {
  std::size_t max_iterations = 400;
  double initial_step = 0.5;
  double tolerance = 1e-10;
};

namespace detail {

/// log of the chosen GN quotient and its gradient (raw partials).
inline double log_quotient(const GridFunction& u, GnVariant variant, std::vector<double>* grad,
                           double* kin_out = nullptr, double* mass_out = nullptr) {
  const MetricGraph& g = u.graph();
  const auto w = g.weights();
  const double m = mass(u);
  const double k = kinetic(u);
  if (kin_out) *kin_out = k;
  if (mass_out) *mass_out = m;
  if (variant == GnVariant::p6) {
    const double n6 = sextic_integral(u, false);
    if (grad) {
      *grad = apply_stiffness(g, u.values());
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i];
        const double a5 = a * a * a * a * a;
        (*grad)[i] = 6.0 * w[i] * a5 / n6 - 4.0 * w[i] * a / m - 2.0 * (*grad)[i] / k;
      }
    }
    return std::log(n6) - 2.0 * std::log(m) - std::log(k);
  }
  std::size_t imax = 0;
  for (std::size_t i = 1; i < u.size(); ++i) {
    if (std::abs(u[i]) > std::abs(u[imax])) imax = i;
  }
  const double peak = std::abs(u[imax]);
  if (grad) {
    *grad = apply_stiffness(g, u.values());
    for (std::size_t i = 0; i < u.size(); ++i) {
      (*grad)[i] = -0.5 * w[i] * u[i] / m - 0.5 * (*grad)[i] / k;
    }
    (*grad)[imax] += 1.0 / u[imax];
  }
  return std::log(peak) - 0.25 * std::log(m) - 0.25 * std::log(k);
}

}  // namespace detail

/// Preconditioned gradient ascent of a GN quotient from `start`, with
/// backtracking and unit-mass normalization. Returns the quotient reached.
inline double ascend_gn_quotient(GridFunction u, GnVariant variant, const GnAscentOptions& opt = {}) {
  const MetricGraph& g = u.graph();
  detail::SobolevPreconditioner precond(g);
  u = normalized(std::move(u), 1.0);
  std::vector<double> grad;
  double kin = 0.0;
  double m = 0.0;
  double f = detail::log_quotient(u, variant, &grad, &kin, &m);
  double step = opt.initial_step;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    precond.set_metric(2.0 / kin, 2.0 / m, 1e-2);
    const std::vector<double> dir = precond.solve(grad);
    bool accepted = false;
    while (step > 1e-12) {
      std::vector<double> trial(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] + step * dir[i];
      GridFunction cand(u.graph_ptr(), std::move(trial));
      if (!(mass(cand) > 0.0) || !(kinetic(cand) > 0.0)) {
        step *= 0.5;
        continue;
      }
      cand = normalized(std::move(cand), 1.0);
      const double fc = detail::log_quotient(cand, variant, nullptr);
      if (fc > f) {
        const double gain = fc - f;
        u = std::move(cand);
        f = detail::log_quotient(u, variant, &grad, &kin, &m);
        accepted = true;
        step = std::min(2.0 * step, 1.0);
        if (gain < opt.tolerance) return std::exp(f);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return std::exp(f);
}

/// Random smooth positive bump exp(-d^2/s^2). Half of the draws are centred
/// at a vertex: quotients involving the sup norm peak there, and an interior
/// peak migrates to a vertex only very slowly under ascent.
inline GridFunction random_bump(const GraphPtr& graph, std::mt19937_64& rng) {
  const MetricGraph& g = *graph;
  std::uniform_int_distribution<std::size_t> pick_edge(0, g.edge_count() - 1);
  std::uniform_int_distribution<std::size_t> pick_vertex(0, g.vertex_count() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GraphPoint c{};
  if (unit(rng) < 0.5) {
    const Incidence inc = g.incidence(pick_vertex(rng)).front();
    c = {inc.edge, inc.at_tail ? 0.0 : g.grid_length(inc.edge)};
  } else {
    c.edge = pick_edge(rng);
    const double len = g.grid_length(c.edge);
    c.x = unit(rng) * (g.edge(c.edge).is_halfline ? 0.25 * len : len);
  }
  const double len = g.grid_length(c.edge);
  const double smin = 20.0 * g.spacing();
  const double smax = std::max(smin * 1.5, 0.15 * len);
  const double s = smin * std::pow(smax / smin, unit(rng));
  const auto vdist = g.vertex_distances(c);
  return GridFunction::sample(graph, [&](std::size_t edge, double y) {
    const double d = g.distance(c, vdist, edge, y) / s;
    return std::exp(-d * d);
  });
}

/// Best GN quotient found by multi-start ascent from `seeds` random bumps.
/// A lower bound for the optimal constant; non-decreasing in `seeds` for a
/// fixed rng seed.
inline double estimate_gn_constant(const GraphPtr& graph, GnVariant variant, std::size_t seeds,
                                   std::uint64_t rng_seed = 20240601, const GnAscentOptions& opt = {}) {
  if (seeds < 1) throw std::invalid_argument("estimate_gn_constant: need at least one seed");
  std::mt19937_64 rng(rng_seed);
  double best = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    GridFunction start = random_bump(graph, rng);
    const double q0 = variant == GnVariant::p6 ? gn_quotient(start) : gn_infty_quotient(start);
    best = std::max({best, q0, ascend_gn_quotient(std::move(start), variant, opt)});
  }
  return best;
}

}  // namespace graphnls
