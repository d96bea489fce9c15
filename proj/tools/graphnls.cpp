// graphnls: command-line front end for the tadpole ground-state solver.
//
// Exit codes: 0 converged / success, 1 usage or configuration error,
// 2 vanishing detected, 3 unbounded from below, 4 flow did not converge.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graphnls/energy.hpp"
#include "graphnls/graph.hpp"
#include "graphnls/minimize.hpp"
#include "graphnls/stationary.hpp"
#include "graphnls/thresholds.hpp"
#include "report_json.hpp"

namespace {

using namespace graphnls;
using io::ordered_json;

enum Exit : int { kOk = 0, kConfig = 1, kVanishing = 2, kUnbounded = 3, kNotConverged = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  double L = 1.0;
  double R = 50.0;
  double h = 0.01;
  std::uint64_t seed = 20240601;
  std::string out;
  std::string format = "json";
};

struct SolveOpts {
  double mu = 2.0;
  MinimizeConfig solver{};
  double xval_tol = 1e-3;
  bool no_profile = false;
};

struct ScanOpts {
  ScanConfig scan{};
  bool emit_plot = false;
  int threads = 0;
};

struct WitnessOpts {
  double mu = 2.0;
  std::vector<double> lambdas;
  std::vector<std::size_t> plateau_n{2, 4, 8, 16};
};

struct StationaryOpts {
  std::optional<double> lambda;
  std::optional<double> mu;
  ShootingOptions shooting{};
};

struct GnOpts {
  std::string variant = "p6";
  std::string oracle = "line";
  std::size_t seeds = 8;
};

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be a positive finite number");
}

void validate_common(const Common& c) {
  require_positive(c.L, "--L");
  require_positive(c.R, "--R");
  require_positive(c.h, "--h");
  if (c.format != "json" && c.format != "csv") throw ConfigError("--format must be json or csv");
}

ordered_json common_json(const std::string& command, const Common& c) {
  return {{"command", command}, {"L", c.L}, {"R", c.R}, {"h", c.h}, {"seed", c.seed}, {"format", c.format}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file " + path);
  f << text;
  if (!f) throw ConfigError("failed writing " + path);
}

/// Writes `text` to --out when given, otherwise to stdout.
void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
  } else {
    write_text(c.out, text);
  }
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

int exit_for(FlowStatus s) {
  switch (s) {
    case FlowStatus::converged: return kOk;
    case FlowStatus::vanishing: return kVanishing;
    case FlowStatus::unbounded: return kUnbounded;
    default: return kNotConverged;
  }
}

int threads_from_env() {
  const char* env = std::getenv("GRAPHNLS_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("GRAPHNLS_THREADS must be a positive integer");
  return static_cast<int>(v);
}

// ---------------------------------------------------------------------------

int cmd_solve(const Common& c, SolveOpts o) {
  validate_common(c);
  if (c.format != "json") throw ConfigError("solve writes JSON reports only");
  o.solver.mass = o.mu;
  o.solver.validate();
  require_positive(o.xval_tol, "--xval-tol");
  const GraphPtr graph = build_tadpole(c.L, c.R, c.h);
  const MultiStartResult res = minimize_multistart(graph, o.solver);

  ordered_json xval = {{"performed", false}};
  if (res.status == FlowStatus::converged) {
    const VerifyResult v = verify_against_minimizer(res.best, o.xval_tol);
    xval = {{"performed", true}, {"ok", v.ok}, {"distance", v.distance}, {"tolerance", o.xval_tol},
            {"reason", v.reason}};
    if (v.solution) {
      xval["shooting_lambda"] = v.solution->lambda;
      xval["shooting_mass"] = v.solution->mass;
      xval["shooting_energy"] = v.solution->energy;
    }
  }

  ordered_json runs = ordered_json::array();
  for (const RunSummary& r : res.runs) runs.push_back(io::to_json(r));
  ordered_json config = common_json("solve", c);
  config["mu"] = o.mu;
  config["xval_tol"] = o.xval_tol;
  config["solver"] = io::to_json(o.solver);
  ordered_json report = {{"config", std::move(config)},
                         {"status", to_string(res.status)},
                         {"best", io::to_json(res.best, !o.no_profile)},
                         {"runs", std::move(runs)},
                         {"cross_validation", std::move(xval)}};
  if (!c.out.empty()) write_text(c.out, dump(report));

  std::cout << "status: " << to_string(res.status) << "\n"
            << "energy: " << io::fmt(res.best.final_energy) << "\n"
            << "lambda: " << io::fmt(res.best.lambda) << "\n"
            << "best start: " << res.best.init_label << "\n";
  if (report["cross_validation"]["performed"].get<bool>()) {
    std::cout << "shooting distance (loop, sup norm): " << io::fmt(report["cross_validation"]["distance"].get<double>())
              << "\n";
  }
  return exit_for(res.status);
}

// ---------------------------------------------------------------------------

std::string plot_script(const std::string& csv_name) {
  std::ostringstream s;
  s << "# gnuplot script: best energy against mass from " << csv_name << "\n"
    << "set datafile separator ','\n"
    << "set xlabel 'mass'\n"
    << "set ylabel 'best energy'\n"
    << "set grid\n"
    << "set key top right\n"
    << "set arrow from " << io::fmt(constants::mu_halfline) << ", graph 0 to " << io::fmt(constants::mu_halfline)
    << ", graph 1 nohead dt 2 lc rgb 'gray40'\n"
    << "set arrow from " << io::fmt(constants::mu_two) << ", graph 0 to " << io::fmt(constants::mu_two)
    << ", graph 1 nohead dt 2 lc rgb 'gray40'\n"
    << "set arrow from " << io::fmt(constants::mu_line) << ", graph 0 to " << io::fmt(constants::mu_line)
    << ", graph 1 nohead dt 2 lc rgb 'gray40'\n"
    << "set label 'sqrt(3)pi/4' at " << io::fmt(constants::mu_halfline) << ", graph 0.95 right offset -0.5,0\n"
    << "set label 'sqrt(3)' at " << io::fmt(constants::mu_two) << ", graph 0.95 right offset -0.5,0\n"
    << "set label 'sqrt(3)pi/2' at " << io::fmt(constants::mu_line) << ", graph 0.95 right offset -0.5,0\n"
    << "plot '" << csv_name << "' skip 1 using 1:2 with linespoints pt 7 title 'best energy'\n";
  return s.str();
}

int cmd_scan(const Common& c, ScanOpts o) {
  validate_common(c);
  o.scan.loop_length = c.L;
  o.scan.radius = c.R;
  o.scan.spacing = c.h;
  o.scan.threads = static_cast<std::size_t>(o.threads > 0 ? o.threads : threads_from_env());
  o.scan.solver.validate();
  require_positive(o.scan.attained_tol, "--attained-tol");
  if (o.scan.steps < 1) throw ConfigError("--steps must be at least 1");
  if (o.emit_plot && c.out.empty()) throw ConfigError("--emit-plot needs --out");
  if (o.scan.steps == 1 ? !(o.scan.mu_min <= o.scan.mu_max) : !(o.scan.mu_min < o.scan.mu_max)) {
    throw ConfigError("need --mu-min < --mu-max");
  }
  if (!(o.scan.mu_min > constants::mu_halfline) || !(o.scan.mu_max <= constants::mu_line)) {
    throw ConfigError("mass range must lie in (" + io::fmt(constants::mu_halfline) + ", " +
                      io::fmt(constants::mu_line) + "]");
  }

  const ThresholdReport rep = scan_mass(o.scan);

  std::ostringstream csv;
  io::write_scan_csv(csv, rep);
  ordered_json config = common_json("scan", c);
  config["mu_min"] = o.scan.mu_min;
  config["mu_max"] = o.scan.mu_max;
  config["steps"] = o.scan.steps;
  config["attained_tol"] = o.scan.attained_tol;
  config["threads"] = o.scan.threads;
  config["solver"] = io::to_json(o.scan.solver);
  ordered_json j = {{"config", std::move(config)}};
  const ordered_json body = io::to_json(rep);
  for (const auto& item : body.items()) j[item.key()] = item.value();

  emit(c, c.format == "csv" ? csv.str() : dump(j));
  if (o.emit_plot) {
    std::filesystem::path base(c.out);
    std::filesystem::path csv_path = base;
    if (c.format != "csv") {
      csv_path.replace_extension(".csv");
      write_text(csv_path.string(), csv.str());
    }
    std::filesystem::path gp = base;
    gp.replace_extension(".gp");
    write_text(gp.string(), plot_script(csv_path.filename().string()));
  }

  std::ostream& info = c.out.empty() ? std::cerr : std::cout;
  info << "bracket: (" << io::fmt(rep.bracket.lower) << ", " << io::fmt(rep.bracket.upper) << "]"
       << (rep.bracket.lower_from_scan ? "" : " lower end not pinned by scan")
       << (rep.bracket.upper_from_scan ? "" : " upper end not pinned by scan") << "\n"
       << "bracket consistent: " << (rep.bracket_consistent() ? "yes" : "no") << "\n"
       << "monotonicity violations: " << rep.monotonicity_violations.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_witness(const Common& c, const WitnessOpts& o) {
  validate_common(c);
  require_positive(o.mu, "--mu");
  const std::optional<Witness> w = optimal_witness(o.mu, c.L);

  ordered_json config = common_json("witness", c);
  config["mu"] = o.mu;
  ordered_json j = {{"config", config}};
  if (w) {
    std::cout << "c = " << io::fmt(w->c) << "\nalpha = " << io::fmt(w->alpha) << "\nE = " << io::fmt(w->energy) << "\n";
    j["witness"] = {{"c", w->c}, {"alpha", w->alpha}, {"big_lambda", w->big_lambda}, {"energy", w->energy}};
  } else {
    std::cout << "none (mu < sqrt(3))\n";
    j["witness"] = nullptr;
  }

  const GraphPtr graph = build_tadpole(c.L, c.R, c.h);
  ordered_json plateau = ordered_json::array();
  for (std::size_t n : o.plateau_n) {
    if (!(c.R > static_cast<double>(n) + 1.0)) continue;
    const double e = energy_localized(vanishing_family(o.mu, n, graph)).total;
    plateau.push_back({{"n", n}, {"energy", e}});
    std::cout << "vanishing family n = " << n << ": E = " << io::fmt(e) << "\n";
  }
  j["vanishing_family"] = std::move(plateau);

  ordered_json unbounded = ordered_json::array();
  if (o.mu > constants::mu_line) {
    std::vector<double> lambdas = o.lambdas;
    if (lambdas.empty()) {
      const double base = 10.0 / c.L;
      for (double f : {1.0, 4.0, 16.0}) lambdas.push_back(f * base * base);
    }
    for (double lam : lambdas) {
      require_positive(lam, "--lambda");
      // Resolve the soliton width 1/(2 sqrt(lambda)) with at least ten cells.
      const double hw = std::min(c.h, 0.05 / std::sqrt(lam));
      const double rw = std::max(std::min(c.R, 4.0 * c.L), 8.0 * hw);
      const UnboundedWitness uw = unbounded_witness(o.mu, lam, build_tadpole(c.L, rw, hw));
      unbounded.push_back({{"lambda", lam}, {"h", hw}, {"R", rw}, {"energy", uw.energy}});
      std::cout << "unbounded witness lambda = " << io::fmt(lam) << ": E = " << io::fmt(uw.energy) << "\n";
    }
  }
  j["unbounded_witness"] = std::move(unbounded);
  if (!c.out.empty()) write_text(c.out, dump(j));
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_stationary(const Common& c, const StationaryOpts& o) {
  require_positive(c.L, "--L");
  if (!o.lambda && !o.mu) throw ConfigError("stationary needs --lambda or --mu");
  ShootingSolution s;
  ordered_json config = common_json("stationary", c);
  if (o.mu) {
    require_positive(*o.mu, "--mu");
    const double guess = o.lambda.value_or(1.0);
    require_positive(guess, "--lambda");
    s = shoot_at_mass(*o.mu, c.L, guess, o.shooting);
    config["mu"] = *o.mu;
    config["lambda_guess"] = guess;
  } else {
    require_positive(*o.lambda, "--lambda");
    s = shoot_ground(*o.lambda, c.L, o.shooting);
    config["lambda"] = *o.lambda;
  }
  config["steps"] = o.shooting.steps;
  config["tolerance"] = o.shooting.tolerance;
  ordered_json j = {{"config", std::move(config)}, {"solution", io::to_json(s, true)}};
  if (!c.out.empty()) write_text(c.out, dump(j));
  std::cout << "lambda = " << io::fmt(s.lambda) << "\nvertex value = " << io::fmt(s.a)
            << "\nloop slope = " << io::fmt(s.b) << "\nmass = " << io::fmt(s.mass) << "\nE = " << io::fmt(s.energy)
            << "\nresidual = " << io::fmt(std::max(std::abs(s.match_value), std::abs(s.match_slope))) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_gn(const Common& c, const GnOpts& o) {
  validate_common(c);
  if (o.seeds < 1) throw ConfigError("--seeds must be at least 1");
  const GnVariant variant = o.variant == "p6" ? GnVariant::p6 : GnVariant::infty;
  GraphPtr graph;
  std::optional<double> reference;
  if (o.oracle == "line") {
    graph = build_line(c.R, c.h);
    reference = variant == GnVariant::p6 ? 4.0 / (constants::pi * constants::pi) : 1.0;
  } else if (o.oracle == "halfline") {
    graph = build_halfline(c.R, c.h);
    reference = variant == GnVariant::infty ? std::sqrt(2.0) : 16.0 / (constants::pi * constants::pi);
  } else {
    graph = build_tadpole(c.L, c.R, c.h);
  }
  const double est = estimate_gn_constant(graph, variant, o.seeds, c.seed);
  ordered_json config = common_json("gn", c);
  config["variant"] = o.variant;
  config["oracle"] = o.oracle;
  config["seeds"] = o.seeds;
  ordered_json j = {{"config", std::move(config)}, {"estimate", est}};
  std::cout << "estimate = " << io::fmt(est) << "\n";
  if (reference) {
    j["reference"] = *reference;
    j["relative_error"] = std::abs(est - *reference) / *reference;
    std::cout << "reference = " << io::fmt(*reference) << "\n";
  }
  if (!c.out.empty()) write_text(c.out, dump(j));
  return kOk;
}

void add_grid(CLI::App* app, Common& c, bool with_radius = true) {
  app->add_option("--L", c.L, "loop length")->capture_default_str();
  if (with_radius) {
    app->add_option("--R", c.R, "half-line truncation")->capture_default_str();
    app->add_option("--h", c.h, "grid spacing")->capture_default_str();
  }
  app->add_option("--out", c.out, "output file (stdout or none when omitted)");
}

void add_solver(CLI::App* app, MinimizeConfig& m) {
  app->add_option("--energy-tol", m.energy_tol, "stop when the energy change drops below this")->capture_default_str();
  app->add_option("--grad-tol", m.grad_tol, "stop when the projected gradient drops below this")->capture_default_str();
  app->add_option("--max-iter", m.max_iterations, "iteration budget per start")->capture_default_str();
  app->add_option("--restarts", m.restarts, "number of constant-plus-exponential starts")->capture_default_str();
  app->add_option("--tail-window", m.tail_window, "outer fraction of the half-line used for tail mass")
      ->capture_default_str();
  app->add_flag("!--explicit", m.preconditioned, "plain L2 gradient steps instead of the Sobolev metric");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground states of the critical NLS energy with the nonlinearity on the loop of a tadpole graph"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  Common common;
  SolveOpts solve;
  ScanOpts scan;
  WitnessOpts witness;
  StationaryOpts stationary;
  GnOpts gn;
  std::optional<double> st_lambda;
  std::optional<double> st_mu;

  auto* s = app.add_subcommand("solve", "multi-start ground-state search at one mass");
  s->add_option("--mu", solve.mu, "mass")->capture_default_str();
  add_grid(s, common);
  add_solver(s, solve.solver);
  s->add_option("--xval-tol", solve.xval_tol, "shooting cross-validation tolerance")->capture_default_str();
  s->add_flag("--no-profile", solve.no_profile, "omit the sampled profile from the report");

  auto* sc = app.add_subcommand("scan", "ground-state energies on a mass grid and the sign-change bracket");
  sc->add_option("--mu-min", scan.scan.mu_min)->capture_default_str();
  sc->add_option("--mu-max", scan.scan.mu_max)->capture_default_str();
  sc->add_option("--steps", scan.scan.steps)->capture_default_str();
  sc->add_option("--attained-tol", scan.scan.attained_tol, "energies below -tol count as negative")
      ->capture_default_str();
  sc->add_option("--threads", scan.threads, "worker threads (default: GRAPHNLS_THREADS or 1)");
  sc->add_option("--format", common.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  sc->add_flag("--emit-plot", scan.emit_plot, "write a gnuplot script next to --out");
  add_grid(sc, common);
  add_solver(sc, scan.scan.solver);

  auto* w = app.add_subcommand("witness", "closed-form test functions and divergence witnesses");
  w->add_option("--mu", witness.mu, "mass")->capture_default_str();
  w->add_option("--lambda", witness.lambdas, "soliton parameters for the divergence witness");
  add_grid(w, common);

  auto* st = app.add_subcommand("stationary", "shooting solution at fixed lambda or fixed mass");
  st->add_option("--lambda", st_lambda, "frequency (initial guess when --mu is given)");
  st->add_option("--mu", st_mu, "target mass");
  st->add_option("--rk-steps", stationary.shooting.steps, "RK4 steps on the loop")->capture_default_str();
  st->add_option("--tol", stationary.shooting.tolerance, "Newton residual tolerance")->capture_default_str();
  add_grid(st, common, false);

  auto* g = app.add_subcommand("gn", "multi-start estimate of a Gagliardo-Nirenberg constant");
  g->add_option("--variant", gn.variant)->check(CLI::IsMember({"p6", "infty"}))->capture_default_str();
  g->add_option("--oracle", gn.oracle)->check(CLI::IsMember({"line", "halfline", "tadpole"}))->capture_default_str();
  g->add_option("--seeds", gn.seeds, "number of random starts")->capture_default_str();
  g->add_option("--seed", common.seed, "random seed")->capture_default_str();
  add_grid(g, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (s->parsed()) return cmd_solve(common, solve);
    if (sc->parsed()) return cmd_scan(common, scan);
    if (w->parsed()) return cmd_witness(common, witness);
    if (st->parsed()) {
      stationary.lambda = st_lambda;
      stationary.mu = st_mu;
      return cmd_stationary(common, stationary);
    }
    if (g->parsed()) return cmd_gn(common, gn);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
