#pragma once

// Stationary states on the tadpole by shooting: v'' = lambda v - v^5 on the
// loop, w = a exp(-sqrt(lambda) x) on the half-line, glued by continuity and
// the Kirchhoff condition at the vertex.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphnls/energy.hpp"
#include "graphnls/graph.hpp"
#include "graphnls/minimize.hpp"

namespace graphnls {

class ShootingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoopOrbit {
  double end_value = 0.0;  // v(L)
  double end_slope = 0.0;  // v'(L)
  std::vector<double> profile;  // steps + 1 samples of v
  // Integrals over the loop, carried along as extra RK4 components.
  double mass = 0.0;     // int v^2
  double kinetic = 0.0;  // int v'^2
  double sextic = 0.0;   // int v^6
  bool blew_up = false;
};

/// Classical RK4 for v'' = lambda v - s v^5 from v(0)=a, v'(0)=b over [0,L],
/// with s = 1 (or 0 when `nonlinear` is false).
inline LoopOrbit integrate_loop(double lambda, double a, double b, double length, std::size_t steps,
                                bool nonlinear = true, double overflow_guard = 1e6) {
  if (steps < 100) throw std::invalid_argument("integrate_loop: need at least 100 steps");
  if (!(length > 0.0)) throw std::invalid_argument("integrate_loop: loop length must be positive");
  const double s5 = nonlinear ? 1.0 : 0.0;
  using State = std::array<double, 5>;
  auto rhs = [&](const State& y) {
    const double v = y[0];
    const double p = y[1];
    const double v2 = v * v;
    return State{p, lambda * v - s5 * v2 * v2 * v, v2, p * p, v2 * v2 * v2};
  };
  const double dt = length / static_cast<double>(steps);
  State y{a, b, 0.0, 0.0, 0.0};
  LoopOrbit out;
  out.profile.reserve(steps + 1);
  out.profile.push_back(a);
  for (std::size_t i = 0; i < steps; ++i) {
    const State k1 = rhs(y);
    State t;
    for (int j = 0; j < 5; ++j) t[j] = y[j] + 0.5 * dt * k1[j];
    const State k2 = rhs(t);
    for (int j = 0; j < 5; ++j) t[j] = y[j] + 0.5 * dt * k2[j];
    const State k3 = rhs(t);
    for (int j = 0; j < 5; ++j) t[j] = y[j] + dt * k3[j];
    const State k4 = rhs(t);
    for (int j = 0; j < 5; ++j) y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    if (!std::isfinite(y[0]) || !std::isfinite(y[1]) || std::abs(y[0]) > overflow_guard) {
      out.blew_up = true;
      break;
    }
    out.profile.push_back(y[0]);
  }
  out.end_value = y[0];
  out.end_slope = y[1];
  out.mass = y[2];
  out.kinetic = y[3];
  out.sextic = y[4];
  return out;
}

/// First integral 1/2 v'^2 - 1/2 lambda v^2 + 1/6 v^6 of the loop equation.
inline double loop_first_integral(double lambda, double v, double slope) {
  return 0.5 * slope * slope - 0.5 * lambda * v * v + v * v * v * v * v * v / 6.0;
}

struct ShootingOptions {
  std::size_t steps = 2000;
  double tolerance = 1e-10;
  std::size_t max_iterations = 50;
  double fd_step = 1e-6;
};

struct ShootingSolution {
  double lambda = 0.0;
  double loop_length = 0.0;
  double a = 0.0;  // v(0) = v(L) = w(0)
  double b = 0.0;  // v'(0)
  std::vector<double> loop_profile;
  double match_value = 0.0;  // v(L) - a
  double match_slope = 0.0;  // v'(L) - (b - sqrt(lambda) a)
  double mass = 0.0;
  double energy = 0.0;
  double kinetic = 0.0;  // int |u'|^2 over the whole tadpole
  std::size_t iterations = 0;
};

namespace detail {

inline std::array<double, 2> shooting_residual(double lambda, double L, double a, double b, std::size_t steps,
                                               bool* blew_up = nullptr) {
  const LoopOrbit o = integrate_loop(lambda, a, b, L, steps);
  if (blew_up) *blew_up = o.blew_up;
  return {o.end_value - a, o.end_slope - (b - std::sqrt(lambda) * a)};
}

inline ShootingSolution finish_solution(double lambda, double L, double a, double b, std::size_t steps,
                                        std::size_t iterations) {
  if (a < 0.0) {
    a = -a;
    b = -b;
  }
  const LoopOrbit o = integrate_loop(lambda, a, b, L, steps);
  const double r = std::sqrt(lambda);
  ShootingSolution s;
  s.lambda = lambda;
  s.loop_length = L;
  s.a = a;
  s.b = b;
  s.loop_profile = o.profile;
  s.match_value = o.end_value - a;
  s.match_slope = o.end_slope - (b - r * a);
  // Half-line tail a e^{-rx}: mass a^2/(2r), kinetic a^2 r/2.
  s.mass = o.mass + a * a / (2.0 * r);
  s.kinetic = o.kinetic + 0.5 * a * a * r;
  s.energy = 0.5 * s.kinetic - o.sextic / 6.0;
  s.iterations = iterations;
  return s;
}

}  // namespace detail

/// Damped Newton on (a, b) -> (v(L) - a, v'(L) - (b - sqrt(lambda) a)) with a
/// central-difference Jacobian. Returns the solution with a > 0.
inline ShootingSolution shoot(double lambda, double L, std::array<double, 2> guess, const ShootingOptions& opt = {}) {
  if (!(lambda > 0.0)) throw std::invalid_argument("shoot: lambda must be positive");
  if (!(L > 0.0)) throw std::invalid_argument("shoot: loop length must be positive");
  double a = guess[0];
  double b = guess[1];
  bool blew = false;
  auto f = detail::shooting_residual(lambda, L, a, b, opt.steps, &blew);
  if (blew) throw ShootingFailure("shoot: initial guess blows up");
  auto norm = [](const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); };
  std::size_t it = 0;
  for (; it < opt.max_iterations && norm(f) > opt.tolerance; ++it) {
    double jac[2][2];
    const double ha = opt.fd_step * std::max(1.0, std::abs(a));
    const double hb = opt.fd_step * std::max(1.0, std::abs(b));
    const auto fap = detail::shooting_residual(lambda, L, a + ha, b, opt.steps);
    const auto fam = detail::shooting_residual(lambda, L, a - ha, b, opt.steps);
    const auto fbp = detail::shooting_residual(lambda, L, a, b + hb, opt.steps);
    const auto fbm = detail::shooting_residual(lambda, L, a, b - hb, opt.steps);
    for (int i = 0; i < 2; ++i) {
      jac[i][0] = (fap[i] - fam[i]) / (2.0 * ha);
      jac[i][1] = (fbp[i] - fbm[i]) / (2.0 * hb);
    }
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if (!std::isfinite(det) || std::abs(det) < 1e-300) throw ShootingFailure("shoot: singular Jacobian");
    const double da = -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det;
    const double db = -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det;
    double t = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
      bool trial_blew = false;
      const auto ft = detail::shooting_residual(lambda, L, a + t * da, b + t * db, opt.steps, &trial_blew);
      if (!trial_blew && std::isfinite(norm(ft)) && norm(ft) < norm(f)) {
        a += t * da;
        b += t * db;
        f = ft;
        improved = true;
        break;
      }
    }
    if (!improved) throw ShootingFailure("shoot: Newton stagnated");
  }
  if (norm(f) > opt.tolerance) throw ShootingFailure("shoot: no convergence within the iteration budget");
  if (std::abs(a) < 1e-8) throw ShootingFailure("shoot: converged to the trivial solution");
  return detail::finish_solution(lambda, L, a, b, opt.steps, it);
}

/// Guess on the symmetric ground branch: the smallest vertex value a whose
/// orbit, started with the symmetric Kirchhoff slope sqrt(lambda) a / 2,
/// turns at the loop midpoint.
inline std::array<double, 2> symmetric_guess(double lambda, double L, std::size_t steps = 400) {
  if (!(lambda > 0.0)) throw std::invalid_argument("symmetric_guess: lambda must be positive");
  const double r = std::sqrt(lambda);
  auto mid_slope = [&](double a, bool* blew) {
    const LoopOrbit o = integrate_loop(lambda, a, 0.5 * r * a, 0.5 * L, steps);
    *blew = o.blew_up;
    return o.end_slope;
  };
  // For large lambda the ground-state vertex value is exponentially small in
  // sqrt(lambda) L, so the scan runs on a geometric grid down to 1e-12 a_max.
  const double a_max = 2.0 * std::pow(3.0 * lambda, 0.25) + 2.0;
  constexpr int samples = 600;
  double prev_a = 0.0;
  double prev = 0.0;
  bool have_prev = false;
  for (int i = 0; i <= samples; ++i) {
    const double a = a_max * std::pow(10.0, -12.0 * (1.0 - static_cast<double>(i) / samples));
    bool blew = false;
    const double s = mid_slope(a, &blew);
    if (blew || !std::isfinite(s)) {
      have_prev = false;
      continue;
    }
    if (have_prev && (s > 0.0) != (prev > 0.0)) {
      double lo = prev_a;
      double hi = a;
      double slo = prev;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        bool b2 = false;
        const double sm = mid_slope(mid, &b2);
        if ((sm > 0.0) == (slo > 0.0)) {
          lo = mid;
          slo = sm;
        } else {
          hi = mid;
        }
      }
      const double a0 = 0.5 * (lo + hi);
      return {a0, 0.5 * r * a0};
    }
    prev_a = a;
    prev = s;
    have_prev = true;
  }
  throw ShootingFailure("symmetric_guess: no symmetric stationary state found");
}

/// Ground-branch solution at a given lambda.
inline ShootingSolution shoot_ground(double lambda, double L, const ShootingOptions& opt = {}) {
  return shoot(lambda, L, symmetric_guess(lambda, L), opt);
}

/// Ground-branch solutions along a lambda grid; points where shooting fails
/// are skipped.
inline std::vector<ShootingSolution> sweep_lambda(std::span<const double> lambdas, double L,
                                                  const ShootingOptions& opt = {}) {
  std::vector<ShootingSolution> out;
  for (double lam : lambdas) {
    try {
      out.push_back(shoot_ground(lam, L, opt));
    } catch (const ShootingFailure&) {
    }
  }
  return out;
}

/// Ground-branch solution of prescribed mass: brackets mu(lambda) = mu by
/// geometric marching from lambda_guess, then bisects. Takes the bracket
/// nearest to lambda_guess.
inline ShootingSolution shoot_at_mass(double mu, double L, double lambda_guess, const ShootingOptions& opt = {},
                                      double mass_tol = 1e-12) {
  if (!(mu > 0.0) || !(lambda_guess > 0.0)) throw std::invalid_argument("shoot_at_mass: need mu, lambda > 0");
  auto mass_at = [&](double lam) { return shoot_ground(lam, L, opt).mass - mu; };
  double f0 = mass_at(lambda_guess);
  if (f0 == 0.0) return shoot_ground(lambda_guess, L, opt);
  std::optional<std::pair<double, double>> bracket;
  constexpr double ratio = 1.02;
  double up = lambda_guess;
  double down = lambda_guess;
  double fup = f0;
  double fdown = f0;
  for (int k = 0; k < 400 && !bracket; ++k) {
    const double nu = up * ratio;
    const double fnu = mass_at(nu);
    if ((fnu > 0.0) != (fup > 0.0)) bracket = std::make_pair(up, nu);
    up = nu;
    fup = fnu;
    if (bracket) break;
    const double nd = down / ratio;
    const double fnd = mass_at(nd);
    if ((fnd > 0.0) != (fdown > 0.0)) bracket = std::make_pair(nd, down);
    down = nd;
    fdown = fnd;
  }
  if (!bracket) throw ShootingFailure("shoot_at_mass: could not bracket the target mass");
  auto [lo, hi] = *bracket;
  double flo = mass_at(lo);
  for (int k = 0; k < 100 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double fm = mass_at(mid);
    if (std::abs(fm) <= mass_tol) {
      lo = hi = mid;
      break;
    }
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return shoot_ground(0.5 * (lo + hi), L, opt);
}

/// Resamples a shooting solution on a tadpole grid: the loop is re-integrated
/// at a multiple of the grid resolution, the half-line is the exact tail.
inline GridFunction sample_on(const ShootingSolution& s, const GraphPtr& graph, std::size_t substeps = 0) {
  if (!graph->is_tadpole()) throw std::invalid_argument("sample_on: graph must be a tadpole");
  const std::size_t loop = graph->loop_edge();
  const std::size_t n = graph->intervals(loop);
  if (substeps == 0) substeps = (2000 + n - 1) / n;
  const std::size_t stride = std::max(substeps, (100 + n - 1) / n);
  const LoopOrbit o = integrate_loop(s.lambda, s.a, s.b, graph->grid_length(loop), n * stride);
  if (o.blew_up) throw ShootingFailure("sample_on: loop orbit blew up");
  const double r = std::sqrt(s.lambda);
  const double h = graph->spacing();
  return GridFunction::sample(graph, [&](std::size_t e, double x) {
    if (e == loop) {
      const auto k = static_cast<std::size_t>(std::llround(x / h));
      return o.profile[k * stride];
    }
    return s.a * std::exp(-r * x);
  });
}

struct VerifyResult {
  bool ok = false;
  double distance = 0.0;  // L-infinity distance on the loop
  std::string reason;
  std::optional<ShootingSolution> solution;
};

/// Shoots at the minimizer's lambda from its vertex data and compares loop
/// profiles in L-infinity.
inline VerifyResult verify_against_minimizer(const MinimizeReport& report, double tol,
                                             const ShootingOptions& opt = {}) {
  if (!report.converged || report.vanishing_detected || report.unbounded) {
    throw std::invalid_argument("verify_against_minimizer: report is not a converged ground state");
  }
  const GridFunction& u = report.profile;
  const MetricGraph& g = u.graph();
  if (!g.is_tadpole()) throw std::invalid_argument("verify_against_minimizer: graph must be a tadpole");
  VerifyResult out;
  if (!(report.lambda > 0.0)) {
    out.reason = "non-positive lambda estimate";
    return out;
  }
  const std::size_t loop = g.loop_edge();
  const double a = u.vertex_value(0);
  const double b = outgoing_derivative(u, Incidence{loop, true});
  try {
    ShootingSolution s = shoot(report.lambda, g.grid_length(loop), {a, b}, opt);
    const GridFunction v = sample_on(s, u.graph_ptr());
    double d = 0.0;
    for (std::size_t k = 0; k <= g.intervals(loop); ++k) {
      d = std::max(d, std::abs(v.at(loop, k) - u.at(loop, k)));
    }
    out.distance = d;
    out.ok = d <= tol;
    if (!out.ok) out.reason = "profiles differ by " + std::to_string(d);
    out.solution = std::move(s);
  } catch (const ShootingFailure& e) {
    out.reason = e.what();
  }
  return out;
}

}  // namespace graphnls
