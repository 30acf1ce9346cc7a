#include "dirrac/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dirrac/worst_case.hpp"

namespace dirrac {
namespace {

// Trial points this close to a + c = 0 are rejected even if the projection
// accepted them; the gradient blows up there.
constexpr double kMarginGuard = 1e-6;

bool recoverable(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kEmptyFeasibleSet:
    case ErrorCode::kMaxIterExceeded:
    case ErrorCode::kInfeasibleMargin:
    case ErrorCode::kZeroAction:
    case ErrorCode::kDualSolveFailed:
      return true;
    default:
      return false;
  }
}

ObjectiveFn problem_objective(const RecourseProblem& problem, bool finite_difference) {
  if (!finite_difference) {
    return [&problem](const Vector& x) { return evaluate_objective(x, problem); };
  }
  return [&problem](const Vector& x) {
    ObjectiveEval out = evaluate_objective(x, problem);
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
      probe(i) = x(i) + h;
      const double up = evaluate_objective(probe, problem).value;
      probe(i) = x(i) - h;
      const double down = evaluate_objective(probe, problem).value;
      probe(i) = x(i);
      out.gradient(i) = (up - down) / (2.0 * h);
    }
    return out;
  };
}

struct Prepared {
  RecourseProblem problem;
  FeasibleSetSpec spec;
  double delta_min = 0.0;
};

Prepared prepare(const RecourseProblem& problem, const SolverConfig& config) {
  validate(config);
  Prepared out{validate_problem(problem), {}, 0.0};
  out.spec = FeasibleSetSpec::from_problem(out.problem);
  DeltaMinOptions options;
  options.projection = config.projection;
  out.delta_min = delta_min(out.spec, options);
  return out;
}

SolveReport run(const Prepared& prep, const SolverConfig& config) {
  const RecourseProblem& problem = prep.problem;
  const FeasibleSetSpec& spec = prep.spec;
  if (problem.delta < prep.delta_min - DeltaMinOptions{}.tol) {
    std::ostringstream os;
    os << "budget " << problem.delta << " is below delta_min " << prep.delta_min;
    throw Error(ErrorCode::kBudgetTooSmall, os.str());
  }
  const Projector project = [&](const Vector& v) { return project_feasible(v, spec, config.projection); };
  const ObjectiveFn objective = problem_objective(problem, config.finite_difference);
  const Admissible admissible = [&](const Vector& v) {
    for (const auto& comp : problem.belief.components) {
      const AbcTriple t = abc(v, comp);
      if (t.a + t.c > -kMarginGuard) return false;
    }
    return true;
  };

  std::vector<Vector> starts{project(problem.x0.values())};
  if (config.restarts > 1) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, config.restart_scale);
    const CoordinateBounds bounds = actionability_bounds(spec);
    for (int r = 1; r < config.restarts; ++r) {
      Vector v = starts.front();
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double e = noise(rng);
        if (bounds.lo(i) < bounds.hi(i)) v(i) += e;
      }
      try {
        starts.push_back(project(v));
      } catch (const Error& e) {
        if (!recoverable(e)) throw;
      }
    }
  }

  std::optional<DescentOutcome> best;
  int best_start = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    DescentOutcome outcome = projected_descent(objective, project, starts[s], config, admissible);
    if (!best || outcome.eval.value < best->eval.value) {
      best = std::move(outcome);
      best_start = static_cast<int>(s);
    }
  }

  Vector x = best->x;
  x(x.size() - 1) = 1.0;
  RecourseResult result{FeatureVector(std::move(x)),
                        std::clamp(best->eval.value, 0.0, 1.0),
                        best->eval.component_values,
                        best->iterations,
                        best->stationarity,
                        prep.delta_min,
                        best->status == DescentStatus::kStationary};
  SolveReport report{std::move(result), best->status, best_start, std::move(best->trace)};
  return report;
}

}  // namespace

void validate(const SolverConfig& config) {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (!(config.lambda_ls > 0.0 && config.lambda_ls < 1.0)) fail("lambda_ls must lie in (0, 1)");
  if (!(config.zeta > 0.0)) fail("zeta must be positive");
  if (config.max_iter < 0) fail("max_iter must be nonnegative");
  if (!(config.station_tol >= 0.0)) fail("station_tol must be nonnegative");
  if (config.max_backtracks < 0) fail("max_backtracks must be nonnegative");
  if (config.restarts < 1) fail("restarts must be at least 1");
  if (!(config.restart_scale >= 0.0)) fail("restart_scale must be nonnegative");
}

DescentOutcome projected_descent(const ObjectiveFn& objective, const Projector& project,
                                 const Vector& start, const SolverConfig& config,
                                 const Admissible& admissible) {
  DescentOutcome out;
  out.x = start;
  out.eval = objective(out.x);
  const auto record = [&](double station) {
    if (!config.record_trace) return;
    out.trace.iterates.push_back(out.x);
    out.trace.objectives.push_back(out.eval.value);
    out.trace.stationarity.push_back(station);
  };

  for (;;) {
    const Vector full_step = project(out.x - config.zeta * out.eval.gradient);
    out.stationarity = (out.x - full_step).norm() / config.zeta;
    record(out.stationarity);
    if (out.stationarity <= config.station_tol) {
      out.status = DescentStatus::kStationary;
      return out;
    }
    if (out.iterations >= config.max_iter) {
      out.status = DescentStatus::kMaxIter;
      return out;
    }

    bool accepted = false;
    double step = config.zeta;
    for (int i = 0; i <= config.max_backtracks; ++i, step *= config.lambda_ls) {
      try {
        const Vector y = i == 0 ? full_step : project(out.x - step * out.eval.gradient);
        if (admissible && !admissible(y)) continue;
        ObjectiveEval trial = objective(y);
        const double decrease = (out.x - y).squaredNorm() / (2.0 * step);
        if (trial.value <= out.eval.value - decrease) {
          out.x = y;
          out.eval = std::move(trial);
          accepted = true;
          break;
        }
      } catch (const Error& e) {
        if (!recoverable(e)) throw;
      }
    }
    if (!accepted) {
      out.status = DescentStatus::kLineSearchStalled;
      return out;
    }
    ++out.iterations;
  }
}

SolveReport solve_detailed(const RecourseProblem& problem, const SolverConfig& config) {
  return run(prepare(problem, config), config);
}

RecourseResult solve(const RecourseProblem& problem, const SolverConfig& config) {
  return solve_detailed(problem, config).result;
}

SolveReport solve_with_added_budget(const RecourseProblem& problem, double delta_add,
                                    const SolverConfig& config) {
  if (!(delta_add >= 0.0)) throw Error(ErrorCode::kBadBudget, "delta_add must be nonnegative");
  RecourseProblem copy = problem;
  copy.delta = 0.0;
  Prepared prep = prepare(copy, config);
  prep.problem.delta = prep.delta_min + delta_add;
  prep.spec.delta = prep.problem.delta;
  return run(prep, config);
}

double stationarity(const Vector& x, const RecourseProblem& problem, const SolverConfig& config) {
  validate(config);
  const RecourseProblem checked = validate_problem(problem);
  const FeasibleSetSpec spec = FeasibleSetSpec::from_problem(checked);
  const ObjectiveEval eval = problem_objective(checked, config.finite_difference)(x);
  const Vector y = project_feasible(x - config.zeta * eval.gradient, spec, config.projection);
  return (x - y).norm() / config.zeta;
}

}  // namespace dirrac
