#pragma once

#include <optional>
#include <vector>

#include "dirrac/core.hpp"

namespace dirrac {

struct InnerDual {
  double lambda = 0.0;
  double eta = 0.0;
  /// Worst-case mixture weights recovered from the dual optimum.
  std::vector<double> weights;
};

struct ObjectiveEval {
  double value = 0.0;
  Vector gradient;
  /// Per-component worst-case probability of an unfavorable outcome.
  std::vector<double> component_values;
  std::optional<InnerDual> inner_dual;
};

/// Per-component worst-case probabilities (moment ball or Gaussian ball).
/// Throws InfeasibleMargin if some component has a + c >= 0.
std::vector<double> component_probabilities(const Vector& x, const MixtureBelief& belief,
                                            bool gaussian);

/// sum_k p_k * wc_prob_nonparametric(x, comp_k) with its analytic gradient.
ObjectiveEval eval_nonparametric(const Vector& x, const MixtureBelief& belief);

/// 1 - sum_k p_k Phi(g_k(x)) with its analytic gradient.
ObjectiveEval eval_gaussian(const Vector& x, const MixtureBelief& belief);

/// Worst case of sum_k p_k f_k(x) over mixture weights within the divergence
/// ball of the given budget around the nominal weights. The value comes from
/// the convex dual in (lambda, eta); the gradient uses the recovered
/// worst-case weights (envelope theorem).
ObjectiveEval eval_weight_robust(const Vector& x, const MixtureBelief& belief, double weight_budget,
                                 Divergence divergence, bool gaussian = false);

/// max_k f_k(x). The gradient is that of the lowest-index maximizer.
ObjectiveEval eval_worst_component(const Vector& x, const MixtureBelief& belief, bool gaussian);

/// Convex conjugate of the divergence generator:
///   KL   (t log t - t + 1): e^s - 1
///   Chi2 ((t - 1)^2):       s + s^2/4 for s >= -2, -1 otherwise
double phi_conjugate(Divergence divergence, double s);
/// Derivative of phi_conjugate; equals the maximizing t >= 0.
double phi_conjugate_derivative(Divergence divergence, double s);

struct WeightDualOptions {
  /// Starting point of the lambda search.
  double lambda_init = 1.0;
};

struct WeightDualSolution {
  double value = 0.0;
  InnerDual dual;
};

/// min over lambda >= 0, eta of
///   eta + budget * lambda + lambda * sum_k p_k phi*((f_k - eta) / lambda).
/// Equals max { sum_k q_k f_k : q in simplex, D_phi(q || p) <= budget }.
WeightDualSolution solve_weight_dual(const std::vector<double>& f, const std::vector<double>& p,
                                     double budget, Divergence divergence,
                                     const WeightDualOptions& options = {});

/// Objective selected by problem.mode.
ObjectiveEval evaluate_objective(const Vector& x, const RecourseProblem& problem);

}  // namespace dirrac
