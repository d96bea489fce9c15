#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "graphnls/graph.hpp"

namespace graphnls::detail {

/// Solves (A + sigma W) x = r, where A is the forward-difference stiffness
/// matrix of the graph and W the diagonal trapezoidal mass matrix. This is the
/// H^1-type metric used to precondition gradient steps.
class SobolevPreconditioner {
 public:
  explicit SobolevPreconditioner(const MetricGraph& g) : graph_(&g) {
    const std::size_t n = g.node_count();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * n);
    const double inv_h = 1.0 / g.spacing();
    for_each_segment(g, [&](std::size_t, std::size_t i, std::size_t j) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(i), inv_h);
      if (j == npos) return;
      trip.emplace_back(static_cast<int>(j), static_cast<int>(j), inv_h);
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), -inv_h);
      trip.emplace_back(static_cast<int>(j), static_cast<int>(i), -inv_h);
    });
    const auto w = g.weights();
    for (std::size_t i = 0; i < n; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 0.0);
    stiffness_.resize(static_cast<int>(n), static_cast<int>(n));
    stiffness_.setFromTriplets(trip.begin(), trip.end());
    mass_.resize(static_cast<int>(n));
    for (std::size_t i = 0; i < n; ++i) mass_[static_cast<int>(i)] = w[i];
    solver_.analyzePattern(stiffness_);
  }

  /// Refactorizes for the metric a * A + b * W (a, b > 0). Skips the work when
  /// the coefficients have not moved by more than `rel_change`.
  void set_metric(double a, double b, double rel_change = 1e-3) {
    if (!(a > 0.0) || !(b >= 0.0)) throw std::invalid_argument("preconditioner metric must be positive");
    if (factored_ && std::abs(a - a_) <= rel_change * a_ && std::abs(b - b_) <= rel_change * std::max(b_, 1e-300)) {
      return;
    }
    Eigen::SparseMatrix<double> m = a * stiffness_;
    for (int i = 0; i < m.rows(); ++i) m.coeffRef(i, i) += b * mass_[i];
    solver_.factorize(m);
    if (solver_.info() != Eigen::Success) throw std::runtime_error("preconditioner factorization failed");
    a_ = a;
    b_ = b;
    factored_ = true;
  }

  std::vector<double> solve(std::span<const double> r) const {
    Eigen::Map<const Eigen::VectorXd> rhs(r.data(), static_cast<Eigen::Index>(r.size()));
    Eigen::VectorXd x = solver_.solve(rhs);
    return {x.data(), x.data() + x.size()};
  }

 private:
  const MetricGraph* graph_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::VectorXd mass_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  double a_ = 0.0;
  double b_ = 0.0;
  bool factored_ = false;
};

}  // namespace graphnls::detail
