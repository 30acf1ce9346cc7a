#pragma once

#include <vector>

#include "dirrac/core.hpp"

namespace dirrac {

/// Robust margin constraint  radius * ||x||_2 - mean^T x <= -margin.
struct ConeConstraint {
  Vector mean;
  double radius = 0.0;
};

/// The action set: cost ball around x0, one robust margin constraint per
/// mixture component, and per-coordinate actionability restrictions.
struct FeasibleSetSpec {
  Vector x0;
  double delta = 0.0;
  CostKind cost = CostKind::kL1;
  double margin = 1e-3;
  std::vector<ConeConstraint> cones;
  ActionabilitySpec actionability;

  static FeasibleSetSpec from_problem(const RecourseProblem& problem);
};

double cost(const Vector& x, const Vector& x0, CostKind kind);

/// Largest value of radius * ||x|| - mean^T x + margin over the cones
/// (<= 0 means every margin constraint holds).
double max_margin_violation(const Vector& x, const FeasibleSetSpec& spec);

bool is_feasible(const Vector& x, const FeasibleSetSpec& spec, double tol);

/// Euclidean projection onto { y : radius ||y|| - mean^T y <= -margin }.
Vector project_cone(const Vector& xp, const Vector& mean, double radius, double margin);

/// Euclidean projection onto { y : cost(y, x0) <= delta }.
Vector project_cost_ball(const Vector& xp, const Vector& x0, double delta, CostKind kind);

/// Per-coordinate interval implied by the actionability restrictions.
struct CoordinateBounds {
  Vector lo;
  Vector hi;
};

CoordinateBounds actionability_bounds(const FeasibleSetSpec& spec);

enum class ProjectionMethod {
  /// Dykstra first; if it has not settled within max_iter cycles, an
  /// interior-point solve of the same projection problem takes over.
  kAuto,
  kDykstra,
  kInteriorPoint,
};

struct ProjectionOptions {
  int max_iter = 500;
  double tol = 1e-8;
  ProjectionMethod method = ProjectionMethod::kAuto;
};

/// Euclidean projection onto the whole action set.
///
/// Dykstra's algorithm cycles over the cost ball, each margin cone and the
/// actionability box (in that order) and is considered settled once no single
/// projection in a cycle moves the iterate by tol or more. Alternating
/// projections converge very slowly when the sets meet at a shallow angle,
/// which is the normal situation for budgets close to delta_min, hence the
/// interior-point fallback.
///
/// Errors: EmptyFeasibleSet when no point of the set exists (Dykstra: the
/// cycle stalls away from feasibility; interior point: no strictly feasible
/// point), MaxIterExceeded when pure Dykstra is feasible but unsettled.
Vector project_feasible(const Vector& xp, const FeasibleSetSpec& spec,
                        const ProjectionOptions& options = {});

struct DeltaMinOptions {
  double tol = 1e-6;
  double cap = 1024.0;
  ProjectionOptions projection;
};

/// Smallest cost budget for which the action set is nonempty, by bisection on
/// the budget with project_feasible as the membership test. spec.delta is ignored.
double delta_min(const FeasibleSetSpec& spec, const DeltaMinOptions& options = {});

}  // namespace dirrac
