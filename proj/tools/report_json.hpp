#pragma once

// JSON and CSV writers for the graphnls tool. Field names here are part of the
// tool's output contract; keep them stable.

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "graphnls/graph.hpp"
#include "graphnls/minimize.hpp"
#include "graphnls/stationary.hpp"
#include "graphnls/thresholds.hpp"

namespace graphnls::io {

using nlohmann::ordered_json;

inline ordered_json to_json(const GridFunction& u) {
  const MetricGraph& g = u.graph();
  ordered_json edges = ordered_json::array();
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const EdgeSpec& s = g.edge(e);
    edges.push_back({{"edge", e},
                     {"length", g.grid_length(e)},
                     {"compact_core", s.is_compact_core},
                     {"halfline", s.is_halfline},
                     {"values", u.edge_values(e)}});
  }
  return {{"spacing", g.spacing()}, {"edges", std::move(edges)}};
}

inline ordered_json to_json(const MinimizeConfig& c) {
  return {{"mass", c.mass},
          {"initial_step", c.initial_step},
          {"backtrack_factor", c.backtrack_factor},
          {"growth_factor", c.growth_factor},
          {"max_step", c.max_step},
          {"min_step", c.min_step},
          {"max_iterations", c.max_iterations},
          {"energy_tol", c.energy_tol},
          {"grad_tol", c.grad_tol},
          {"tail_window", c.tail_window},
          {"tail_mass_threshold", c.tail_mass_threshold},
          {"vanishing_energy_tol", c.vanishing_energy_tol},
          {"divergence_floor", c.divergence_floor},
          {"collapse_ratio", c.collapse_ratio},
          {"restarts", c.restarts},
          {"preconditioned", c.preconditioned}};
}

inline ordered_json to_json(const MinimizeReport& r, bool with_profile) {
  ordered_json j = {{"status", to_string(r.status)},
                    {"init_label", r.init_label},
                    {"final_energy", r.final_energy},
                    {"lambda", r.lambda},
                    {"converged", r.converged},
                    {"vanishing_detected", r.vanishing_detected},
                    {"unbounded", r.unbounded},
                    {"tail_mass_fraction", r.tail_mass_fraction},
                    {"kirchhoff_residual", r.kirchhoff_residual},
                    {"grad_norm", r.grad_norm},
                    {"iterations", r.iterations},
                    {"energy_trace", r.energy_trace}};
  if (with_profile) j["profile"] = to_json(r.profile);
  return j;
}

inline ordered_json to_json(const RunSummary& r) {
  return {{"init_label", r.init_label},
          {"status", to_string(r.status)},
          {"final_energy", r.final_energy},
          {"lambda", r.lambda},
          {"iterations", r.iterations}};
}

inline ordered_json to_json(const ShootingSolution& s, bool with_profile) {
  ordered_json j = {{"lambda", s.lambda},
                    {"loop_length", s.loop_length},
                    {"vertex_value", s.a},
                    {"loop_slope", s.b},
                    {"match_value", s.match_value},
                    {"match_slope", s.match_slope},
                    {"mass", s.mass},
                    {"energy", s.energy},
                    {"kinetic", s.kinetic},
                    {"iterations", s.iterations}};
  if (with_profile) j["loop_profile"] = s.loop_profile;
  return j;
}

inline ordered_json to_json(const ScanPoint& p) {
  return {{"mu", p.mu},
          {"best_energy", p.best_energy},
          {"level_estimate", p.level_estimate},
          {"attained", p.attained},
          {"lambda", p.lambda},
          {"tail_mass_fraction", p.tail_mass_fraction},
          {"status", to_string(p.status)}};
}

inline ordered_json to_json(const ThresholdReport& r) {
  ordered_json curve = ordered_json::array();
  for (const ScanPoint& p : r.curve) curve.push_back(to_json(p));
  return {{"mu_line", r.mu_line},
          {"mu_halfline", r.mu_halfline},
          {"mu_two", r.mu_two},
          {"bracket",
           {{"lower", r.bracket.lower},
            {"upper", r.bracket.upper},
            {"lower_from_scan", r.bracket.lower_from_scan},
            {"upper_from_scan", r.bracket.upper_from_scan}}},
          {"bracket_consistent", r.bracket_consistent()},
          {"monotonicity_violations", r.monotonicity_violations},
          {"curve", std::move(curve)}};
}

/// Round-trip formatting for CSV cells.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_scan_csv(std::ostream& os, const ThresholdReport& r) {
  os << "mu,best_energy,attained,lambda,tail_mass_fraction\n";
  for (const ScanPoint& p : r.curve) {
    os << fmt(p.mu) << ',' << fmt(p.best_energy) << ',' << (p.attained ? 1 : 0) << ',' << fmt(p.lambda) << ','
       << fmt(p.tail_mass_fraction) << '\n';
  }
}

}  // namespace graphnls::io
