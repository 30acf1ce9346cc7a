#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dirrac/core.hpp"
#include "dirrac/feasibility.hpp"
#include "dirrac/objective.hpp"

namespace dirrac {

struct SolverConfig {
  /// Backtracking shrink factor, in (0, 1).
  double lambda_ls = 0.7;
  /// Initial step size.
  double zeta = 1.0;
  int max_iter = 200;
  double station_tol = 1e-4;
  int max_backtracks = 50;
  /// Number of starts; 1 runs only from the projected instance.
  int restarts = 3;
  /// Standard deviation of the random perturbations used for extra starts.
  double restart_scale = 0.1;
  std::uint64_t seed = 0;
  /// Central finite differences instead of the analytic gradient (debugging).
  bool finite_difference = false;
  /// Keep the iterate history of the selected run.
  bool record_trace = false;
  ProjectionOptions projection;
};

void validate(const SolverConfig& config);

enum class DescentStatus { kStationary, kMaxIter, kLineSearchStalled };

struct DescentTrace {
  std::vector<Vector> iterates;
  std::vector<double> objectives;
  std::vector<double> stationarity;
};

struct DescentOutcome {
  Vector x;
  ObjectiveEval eval;
  int iterations = 0;
  double stationarity = 0.0;
  DescentStatus status = DescentStatus::kMaxIter;
  DescentTrace trace;
};

using ObjectiveFn = std::function<ObjectiveEval(const Vector&)>;
using Projector = std::function<Vector(const Vector&)>;
/// Optional extra acceptance test on trial points (false forces a backtrack).
using Admissible = std::function<bool(const Vector&)>;

/// Projected gradient descent with Armijo-type backtracking: from a feasible
/// start, accept the first step length lambda_ls^i * zeta whose projected
/// point y satisfies f(y) <= f(x) - ||x - y||^2 / (2 * step). Stops when
/// ||x - P(x - zeta * grad)|| / zeta <= station_tol.
DescentOutcome projected_descent(const ObjectiveFn& objective, const Projector& project,
                                 const Vector& start, const SolverConfig& config,
                                 const Admissible& admissible = {});

struct SolveReport {
  RecourseResult result;
  DescentStatus status = DescentStatus::kMaxIter;
  /// Index of the start that produced the result (0 = projected instance).
  int best_start = 0;
  DescentTrace trace;
};

/// End-to-end recourse for a problem with an absolute budget problem.delta.
/// Throws BudgetTooSmall when delta is below delta_min.
SolveReport solve_detailed(const RecourseProblem& problem, const SolverConfig& config = {});
RecourseResult solve(const RecourseProblem& problem, const SolverConfig& config = {});

/// Same with delta = delta_min + delta_add (problem.delta is ignored).
SolveReport solve_with_added_budget(const RecourseProblem& problem, double delta_add,
                                    const SolverConfig& config = {});

/// ||x - P(x - zeta * grad f(x))|| / zeta for the problem's objective and set.
double stationarity(const Vector& x, const RecourseProblem& problem, const SolverConfig& config = {});

}  // namespace dirrac
