#pragma once

// Metric graphs made of compact edges and truncated half-lines, sampled on a
// uniform grid shared by every edge.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace graphnls {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// One edge of a metric graph. Edge coordinate x runs from 0 at `tail` to
/// `length` at `head`. A half-line is truncated at x = length (the truncation
/// radius R) and carries a homogeneous Dirichlet value there; `head` is
/// ignored for half-lines.
struct EdgeSpec {
  double length = 0.0;
  bool is_compact_core = false;
  bool is_halfline = false;
  std::size_t tail = 0;
  std::size_t head = 0;
};

/// Which end of an edge touches a vertex. The orientation sign turns the edge
/// derivative into the outgoing derivative at that vertex.
struct Incidence {
  std::size_t edge = 0;
  bool at_tail = true;
  int sign() const { return at_tail ? +1 : -1; }
};

/// A point on the graph, given by edge and edge coordinate.
struct GraphPoint {
  std::size_t edge = 0;
  double x = 0.0;
};

class MetricGraph {
 public:
  MetricGraph(std::size_t vertex_count, std::vector<EdgeSpec> edges, double spacing)
      : spacing_(spacing), edges_(std::move(edges)), incidence_(vertex_count) {
    if (!(spacing_ > 0.0) || !std::isfinite(spacing_)) {
      throw std::invalid_argument("grid spacing must be positive");
    }
    if (vertex_count == 0 || edges_.empty()) {
      throw std::invalid_argument("graph needs at least one vertex and one edge");
    }
    intervals_.reserve(edges_.size());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const EdgeSpec& s = edges_[e];
      if (!(s.length > 0.0) || !std::isfinite(s.length)) {
        throw std::invalid_argument("edge " + std::to_string(e) + ": length must be positive");
      }
      if (s.is_compact_core && s.is_halfline) {
        throw std::invalid_argument("edge " + std::to_string(e) +
                                    ": cannot be both compact core and half-line");
      }
      if (s.tail >= vertex_count || (!s.is_halfline && s.head >= vertex_count)) {
        throw std::invalid_argument("edge " + std::to_string(e) + ": vertex out of range");
      }
      const auto n = static_cast<std::size_t>(std::llround(s.length / spacing_));
      if (n < 2) {
        throw std::invalid_argument("edge " + std::to_string(e) +
                                    ": fewer than two grid intervals");
      }
      intervals_.push_back(n);
      incidence_[s.tail].push_back({e, true});
      if (!s.is_halfline) incidence_[s.head].push_back({e, false});
    }
    if (!connected()) throw std::invalid_argument("graph is not connected");

    offsets_.resize(edges_.size());
    std::size_t next = vertex_count;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      offsets_[e] = next;
      next += intervals_[e] - 1;
    }
    node_count_ = next;

    weights_.assign(node_count_, spacing_);
    core_weights_.assign(node_count_, 0.0);
    for (std::size_t v = 0; v < vertex_count; ++v) weights_[v] = 0.0;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const double half = 0.5 * spacing_;
      weights_[edges_[e].tail] += half;
      if (!edges_[e].is_halfline) weights_[edges_[e].head] += half;
      if (edges_[e].is_compact_core) {
        core_weights_[edges_[e].tail] += half;
        core_weights_[edges_[e].head] += half;
        for (std::size_t k = 1; k < intervals_[e]; ++k) core_weights_[offsets_[e] + k - 1] = spacing_;
      }
    }
  }

  double spacing() const { return spacing_; }
  std::size_t vertex_count() const { return incidence_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t node_count() const { return node_count_; }
  const EdgeSpec& edge(std::size_t e) const { return edges_.at(e); }
  std::span<const EdgeSpec> edges() const { return edges_; }
  std::span<const Incidence> incidence(std::size_t v) const { return incidence_.at(v); }
  std::size_t degree(std::size_t v) const { return incidence_.at(v).size(); }

  /// Number of grid intervals on edge e; the rounded edge length is
  /// intervals(e) * spacing().
  std::size_t intervals(std::size_t e) const { return intervals_.at(e); }
  double grid_length(std::size_t e) const { return static_cast<double>(intervals(e)) * spacing_; }

  /// Unknown index of sample k (0..intervals) on edge e, or npos for the
  /// Dirichlet far end of a half-line.
  std::size_t node(std::size_t e, std::size_t k) const {
    const std::size_t n = intervals_[e];
    if (k == 0) return edges_[e].tail;
    if (k == n) return edges_[e].is_halfline ? npos : edges_[e].head;
    return offsets_[e] + k - 1;
  }

  /// Trapezoidal quadrature weight of every unknown over the whole graph.
  std::span<const double> weights() const { return weights_; }
  /// Trapezoidal weights restricted to compact-core edges.
  std::span<const double> core_weights() const { return core_weights_; }

  bool has_compact_core() const {
    return std::any_of(edges_.begin(), edges_.end(), [](const EdgeSpec& s) { return s.is_compact_core; });
  }

  /// One vertex of degree 3 carrying a compact loop and a half-line.
  bool is_tadpole() const {
    if (vertex_count() != 1 || edges_.size() != 2) return false;
    return loop_edge() != npos && halfline_edge() != npos;
  }

  std::size_t loop_edge() const {
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (!edges_[e].is_halfline && edges_[e].tail == edges_[e].head) return e;
    }
    return npos;
  }

  std::size_t halfline_edge() const {
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edges_[e].is_halfline) return e;
    }
    return npos;
  }

  /// Geodesic distance from p to coordinate x on edge e, given the vertex
  /// distances from vertex_distances(p).
  double distance(const GraphPoint& p, std::span<const double> vdist, std::size_t e, double x) const {
    const EdgeSpec& s = edges_[e];
    double d = vdist[s.tail] + x;
    if (!s.is_halfline) d = std::min(d, vdist[s.head] + grid_length(e) - x);
    if (e == p.edge) d = std::min(d, std::abs(x - p.x));
    return d;
  }

  /// Shortest-path distances from p to every vertex.
  std::vector<double> vertex_distances(const GraphPoint& p) const {
    if (p.edge >= edges_.size() || p.x < 0.0 || p.x > grid_length(p.edge)) {
      throw std::invalid_argument("point lies outside the graph");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(vertex_count(), inf);
    const EdgeSpec& s = edges_[p.edge];
    d[s.tail] = p.x;
    if (!s.is_halfline) d[s.head] = std::min(d[s.head], grid_length(p.edge) - p.x);
    // Bellman-Ford; vertex counts here are tiny.
    for (std::size_t pass = 0; pass < vertex_count(); ++pass) {
      for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edges_[e].is_halfline) continue;
        const double len = grid_length(e);
        const auto a = edges_[e].tail;
        const auto b = edges_[e].head;
        d[b] = std::min(d[b], d[a] + len);
        d[a] = std::min(d[a], d[b] + len);
      }
    }
    return d;
  }

 private:
  bool connected() const {
    std::vector<std::size_t> parent(vertex_count());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
      return parent[i] == i ? i : parent[i] = find(parent[i]);
    };
    for (const auto& s : edges_) {
      if (!s.is_halfline) parent[find(s.tail)] = find(s.head);
    }
    const std::size_t root = find(0);
    for (std::size_t v = 0; v < vertex_count(); ++v) {
      if (find(v) != root) return false;
    }
    return true;
  }

  double spacing_;
  std::vector<EdgeSpec> edges_;
  std::vector<std::vector<Incidence>> incidence_;
  std::vector<std::size_t> intervals_;
  std::vector<std::size_t> offsets_;
  std::size_t node_count_ = 0;
  std::vector<double> weights_;
  std::vector<double> core_weights_;
};

using GraphPtr = std::shared_ptr<const MetricGraph>;

/// Tadpole: a compact loop of length L and a half-line truncated at R, both
/// attached to vertex 0. Edge 0 is the loop, edge 1 the half-line.
inline GraphPtr build_tadpole(double loop_length, double radius, double spacing) {
  if (!(loop_length > 0.0) || !(radius > 0.0) || !(spacing > 0.0)) {
    throw std::invalid_argument("build_tadpole: L, R and h must be positive");
  }
  if (spacing > std::min(loop_length, radius) / 8.0) {
    throw std::invalid_argument("build_tadpole: h too coarse, need h <= min(L,R)/8");
  }
  std::vector<EdgeSpec> edges{
      {.length = loop_length, .is_compact_core = true, .is_halfline = false, .tail = 0, .head = 0},
      {.length = radius, .is_compact_core = false, .is_halfline = true, .tail = 0, .head = 0},
  };
  return std::make_shared<const MetricGraph>(1, std::move(edges), spacing);
}

/// Line oracle [-R, R] centred at vertex 0. By default two half-lines with
/// Dirichlet far ends. With `core` set the two sides are compact-core edges
/// ending at free vertices 1 and 2, so the localized energy acts on the whole
/// line.
inline GraphPtr build_line(double radius, double spacing, bool core = false) {
  if (!(radius > 0.0) || !(spacing > 0.0) || spacing > radius / 8.0) {
    throw std::invalid_argument("build_line: need R > 0 and 0 < h <= R/8");
  }
  if (!core) {
    std::vector<EdgeSpec> edges(2, EdgeSpec{.length = radius, .is_compact_core = false,
                                            .is_halfline = true, .tail = 0, .head = 0});
    return std::make_shared<const MetricGraph>(1, std::move(edges), spacing);
  }
  std::vector<EdgeSpec> edges{
      {.length = radius, .is_compact_core = true, .is_halfline = false, .tail = 0, .head = 1},
      {.length = radius, .is_compact_core = true, .is_halfline = false, .tail = 0, .head = 2},
  };
  return std::make_shared<const MetricGraph>(3, std::move(edges), spacing);
}

/// Half-line oracle [0, R] with a free (Kirchhoff = Neumann) end at vertex 0.
inline GraphPtr build_halfline(double radius, double spacing) {
  if (!(radius > 0.0) || !(spacing > 0.0) || spacing > radius / 8.0) {
    throw std::invalid_argument("build_halfline: need R > 0 and 0 < h <= R/8");
  }
  std::vector<EdgeSpec> edges{{.length = radius, .is_compact_core = false, .is_halfline = true,
                               .tail = 0, .head = 0}};
  return std::make_shared<const MetricGraph>(1, std::move(edges), spacing);
}

/// Real samples on every node of a graph. Vertex samples are stored once, so
/// all edges meeting at a vertex see the same value.
class GridFunction {
 public:
  explicit GridFunction(GraphPtr graph) : graph_(std::move(graph)) {
    if (!graph_) throw std::invalid_argument("GridFunction: null graph");
    values_.assign(graph_->node_count(), 0.0);
  }

  GridFunction(GraphPtr graph, std::vector<double> values)
      : graph_(std::move(graph)), values_(std::move(values)) {
    if (!graph_) throw std::invalid_argument("GridFunction: null graph");
    if (values_.size() != graph_->node_count()) {
      throw std::invalid_argument("GridFunction: value count does not match graph");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("GridFunction: non-finite sample");
    }
  }

  /// Samples f(edge, x) at every node. Vertices are sampled from their first
  /// incident edge.
  template <typename F>
  static GridFunction sample(GraphPtr graph, F&& f) {
    GridFunction u(graph);
    const MetricGraph& g = *graph;
    std::vector<bool> seen(g.vertex_count(), false);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const std::size_t n = g.intervals(e);
      for (std::size_t k = 0; k <= n; ++k) {
        const std::size_t i = g.node(e, k);
        if (i == npos) continue;
        if (i < g.vertex_count()) {
          if (seen[i]) continue;
          seen[i] = true;
        }
        const double v = f(e, static_cast<double>(k) * g.spacing());
        if (!std::isfinite(v)) throw std::invalid_argument("GridFunction::sample: non-finite value");
        u.values_[i] = v;
      }
    }
    return u;
  }

  const MetricGraph& graph() const { return *graph_; }
  const GraphPtr& graph_ptr() const { return graph_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  /// Sample k of edge e (zero at the far end of a half-line).
  double at(std::size_t e, std::size_t k) const {
    const std::size_t i = graph_->node(e, k);
    return i == npos ? 0.0 : values_[i];
  }

  /// All intervals+1 samples along edge e, endpoints included.
  std::vector<double> edge_values(std::size_t e) const {
    const std::size_t n = graph_->intervals(e);
    std::vector<double> out(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out[k] = at(e, k);
    return out;
  }

  double vertex_value(std::size_t v) const { return values_.at(v); }

  GridFunction& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

 private:
  GraphPtr graph_;
  std::vector<double> values_;
};

namespace detail {

inline double weighted_sum(std::span<const double> w, std::span<const double> u, int power) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double a = u[i];
    double p = 1.0;
    for (int j = 0; j < power; ++j) p *= a;
    s += w[i] * p;
  }
  return s;
}

/// Visits every grid segment (i, j) of every edge; j is npos at a Dirichlet end.
template <typename F>
void for_each_segment(const MetricGraph& g, F&& f) {
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const std::size_t n = g.intervals(e);
    for (std::size_t k = 0; k < n; ++k) f(e, g.node(e, k), g.node(e, k + 1));
  }
}

/// Stiffness action (A u)_i = sum over segments at i of (u_i - u_j)/h, so that
/// u.A u equals the forward-difference kinetic term.
inline std::vector<double> apply_stiffness(const MetricGraph& g, std::span<const double> u) {
  std::vector<double> out(u.size(), 0.0);
  const double inv_h = 1.0 / g.spacing();
  for_each_segment(g, [&](std::size_t, std::size_t i, std::size_t j) {
    const double ui = u[i];
    const double uj = j == npos ? 0.0 : u[j];
    out[i] += (ui - uj) * inv_h;
    if (j != npos) out[j] += (uj - ui) * inv_h;
  });
  return out;
}

}  // namespace detail

/// Trapezoidal mass: integral of u^2 over every edge (half-lines over [0,R]).
inline double mass(const GridFunction& u) {
  return detail::weighted_sum(u.graph().weights(), u.values(), 2);
}

/// Integral of |u'|^2 with forward differences on each grid segment.
/// Not halved.
inline double kinetic(const GridFunction& u) {
  const MetricGraph& g = u.graph();
  const double inv_h = 1.0 / g.spacing();
  double s = 0.0;
  detail::for_each_segment(g, [&](std::size_t, std::size_t i, std::size_t j) {
    const double d = (j == npos ? 0.0 : u[j]) - u[i];
    s += d * d * inv_h;
  });
  return s;
}

/// Outgoing derivative at the vertex end of edge e, from the one-sided
/// second-order stencil (-3 u0 + 4 u1 - u2) / 2h.
inline double outgoing_derivative(const GridFunction& u, const Incidence& inc) {
  const MetricGraph& g = u.graph();
  const std::size_t n = g.intervals(inc.edge);
  const double h = g.spacing();
  if (inc.at_tail) {
    return (-3.0 * u.at(inc.edge, 0) + 4.0 * u.at(inc.edge, 1) - u.at(inc.edge, 2)) / (2.0 * h);
  }
  return (-3.0 * u.at(inc.edge, n) + 4.0 * u.at(inc.edge, n - 1) - u.at(inc.edge, n - 2)) / (2.0 * h);
}

/// |sum of outgoing derivatives| at vertex v. On the tadpole this is
/// |v'(0) - v'(L) + w'(0)|.
inline double kirchhoff_residual(const GridFunction& u, std::size_t vertex = 0) {
  double s = 0.0;
  for (const Incidence& inc : u.graph().incidence(vertex)) s += outgoing_derivative(u, inc);
  return std::abs(s);
}

/// Rescales u so that mass(u) == target.
inline GridFunction normalized(GridFunction u, double target) {
  const double m = mass(u);
  if (!(m > 0.0)) throw std::invalid_argument("cannot normalize a function of zero mass");
  u *= std::sqrt(target / m);
  return u;
}

}  // namespace graphnls
