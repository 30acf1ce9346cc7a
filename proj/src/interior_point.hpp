#pragma once

// Log-barrier interior-point solver for small smooth convex programs
//   minimize f0(z)  subject to  g_i(z) <= 0,
// used to project onto thin action sets where alternating projections crawl.

#include <functional>
#include <optional>
#include <vector>

#include "dirrac/core.hpp"

namespace dirrac::detail {

struct ConstraintEval {
  double value = 0.0;
  Vector grad;
  /// Empty for affine constraints.
  Matrix hess;
};

class SmoothProgram {
 public:
  virtual ~SmoothProgram() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double objective(const Vector& z) const = 0;
  virtual Vector objective_grad(const Vector& z) const = 0;
  /// Empty matrix when the objective is linear.
  virtual Matrix objective_hess(const Vector& z) const = 0;
  virtual std::size_t num_constraints() const = 0;
  virtual void constraint_values(const Vector& z, Vector& out) const = 0;
  virtual std::vector<ConstraintEval> constraints(const Vector& z) const = 0;
};

struct BarrierOptions {
  double tau0 = 1.0;
  double tau_growth = 10.0;
  double gap_tol = 1e-13;
  int max_newton = 100;
  int max_outer = 40;
  /// Called after every centering step; returning true stops early.
  std::function<bool(const Vector&)> stop;
};

struct BarrierResult {
  Vector z;
  double gap = 0.0;
  bool stopped_early = false;
};

/// z0 must be strictly feasible.
BarrierResult solve_barrier(const SmoothProgram& program, Vector z0, const BarrierOptions& options);

/// Finds a strictly feasible point by minimizing the largest constraint value
/// (an auxiliary slack variable). Returns nothing when the optimal slack is
/// nonnegative, i.e. the constraint system has no interior.
std::optional<Vector> find_interior_point(const SmoothProgram& program, const Vector& z0);

}  // namespace dirrac::detail
