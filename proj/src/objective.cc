#include "dirrac/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dirrac/normal.hpp"
#include "dirrac/worst_case.hpp"

namespace dirrac {
namespace {

struct ComponentTerm {
  double value;
  Vector gradient;
};

AbcTriple checked_triple(const Vector& x, const ComponentMoments& comp, std::size_t k) {
  if (x.isZero(0.0)) throw Error(ErrorCode::kZeroAction, "objective is undefined at x = 0");
  const AbcTriple t = abc(x, comp);
  if (!t.robustly_favorable()) {
    std::ostringstream os;
    os << "component " << k << " has a + c = " << t.a + t.c << " >= 0";
    throw Error(ErrorCode::kInfeasibleMargin, os.str());
  }
  return t;
}

ComponentTerm component_term(const Vector& x, const ComponentMoments& comp, std::size_t k,
                             bool gaussian) {
  const AbcTriple t = checked_triple(x, comp, k);
  if (!gaussian) {
    return {wc_prob_nonparametric(t), abc_chain_rule(wc_prob_nonparametric_partials(t), x, comp)};
  }
  const double g = gaussian_margin(t);
  AbcGradient dg = gaussian_margin_partials(t);
  const double scale = -normal_pdf(g);
  dg.da *= scale;
  dg.db *= scale;
  dg.dc *= scale;
  return {normal_cdf(-g), abc_chain_rule(dg, x, comp)};
}

std::vector<ComponentTerm> component_terms(const Vector& x, const MixtureBelief& belief,
                                           bool gaussian) {
  std::vector<ComponentTerm> terms;
  terms.reserve(belief.size());
  for (std::size_t k = 0; k < belief.size(); ++k) {
    terms.push_back(component_term(x, belief.components[k], k, gaussian));
  }
  return terms;
}

ObjectiveEval weighted_sum(const Vector& x, const std::vector<ComponentTerm>& terms,
                           const std::vector<double>& weights) {
  ObjectiveEval out;
  out.gradient = Vector::Zero(x.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    out.value += weights[k] * terms[k].value;
    out.gradient += weights[k] * terms[k].gradient;
    out.component_values.push_back(terms[k].value);
  }
  out.value = std::clamp(out.value, 0.0, 1.0);
  return out;
}

// d/d eta of the dual objective for fixed lambda; nondecreasing in eta.
double eta_derivative(const std::vector<double>& f, const std::vector<double>& p, double lambda,
                      double eta, Divergence div) {
  double sum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (p[k] > 0.0) sum += p[k] * phi_conjugate_derivative(div, (f[k] - eta) / lambda);
  }
  return 1.0 - sum;
}

double eta_second_derivative(const std::vector<double>& f, const std::vector<double>& p,
                             double lambda, double eta, Divergence div) {
  double sum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (p[k] <= 0.0) continue;
    const double s = (f[k] - eta) / lambda;
    const double curv = (div == Divergence::kKL) ? std::exp(s) : (s >= -2.0 ? 0.5 : 0.0);
    sum += p[k] * curv / lambda;
  }
  return sum;
}

double dual_objective(const std::vector<double>& f, const std::vector<double>& p, double budget,
                      double lambda, double eta, Divergence div) {
  double sum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (p[k] > 0.0) sum += p[k] * phi_conjugate(div, (f[k] - eta) / lambda);
  }
  return eta + budget * lambda + lambda * sum;
}

// The minimizing eta lies in [min f, max f] over the support of p: there the
// derivative changes sign for both supported divergences.
double solve_eta(const std::vector<double>& f, const std::vector<double>& p, double lambda,
                 Divergence div) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (p[k] <= 0.0) continue;
    lo = std::min(lo, f[k]);
    hi = std::max(hi, f[k]);
  }
  if (!(hi > lo)) return hi;
  if (div == Divergence::kKL) {
    // Closed form: eta = lambda log sum p exp(f / lambda), shifted for stability.
    double sum = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (p[k] > 0.0) sum += p[k] * std::exp((f[k] - hi) / lambda);
    }
    return std::clamp(hi + lambda * std::log(sum), lo, hi);
  }
  double eta = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    const double d1 = eta_derivative(f, p, lambda, eta, div);
    if (d1 == 0.0) return eta;
    if (d1 > 0.0) {
      hi = eta;
    } else {
      lo = eta;
    }
    const double tiny = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eta));
    if (hi - lo <= tiny) return 0.5 * (lo + hi);
    const double d2 = eta_second_derivative(f, p, lambda, eta, div);
    double next = (std::isfinite(d1) && d2 > 0.0 && std::isfinite(d2)) ? eta - d1 / d2 : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - eta) <= tiny) return next;
    eta = next;
  }
  throw Error(ErrorCode::kDualSolveFailed, "eta search did not converge");
}

constexpr double kMinLambda = 1e-12;
constexpr double kMaxLogLambda = 20.0;
constexpr double kLogLambdaTol = 1e-10;

}  // namespace

double phi_conjugate(Divergence divergence, double s) {
  if (divergence == Divergence::kKL) return std::expm1(s);
  return s >= -2.0 ? s + 0.25 * s * s : -1.0;
}

double phi_conjugate_derivative(Divergence divergence, double s) {
  if (divergence == Divergence::kKL) return std::exp(s);
  return s >= -2.0 ? 1.0 + 0.5 * s : 0.0;
}

WeightDualSolution solve_weight_dual(const std::vector<double>& f, const std::vector<double>& p,
                                     double budget, Divergence divergence,
                                     const WeightDualOptions& options) {
  if (f.size() != p.size() || f.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "values and weights must have equal nonzero length");
  }
  if (!(budget >= 0.0)) throw Error(ErrorCode::kBadBudget, "weight budget must be nonnegative");
  WeightDualSolution out;
  if (budget == 0.0) {
    // The divergence ball collapses onto the nominal weights.
    out.value = std::inner_product(f.begin(), f.end(), p.begin(), 0.0);
    out.dual = {std::numeric_limits<double>::infinity(), out.value, p};
    return out;
  }

  const auto profile = [&](double log_lambda) {
    const double lambda = std::exp(log_lambda);
    return dual_objective(f, p, budget, lambda, solve_eta(f, p, lambda, divergence), divergence);
  };

  // The profile is convex in lambda, hence unimodal in log(lambda): walk
  // downhill from the starting point to bracket the minimum, then refine by
  // golden-section search.
  const double u_min = std::log(kMinLambda);
  const double u_max = kMaxLogLambda;
  double u0 = std::clamp(std::log(std::max(options.lambda_init, kMinLambda)), u_min, u_max);
  double h0 = profile(u0);
  double step = 1.0;
  double u1 = std::min(u0 + step, u_max);
  double h1 = profile(u1);
  if (h1 > h0) {
    step = -step;
    u1 = std::max(u0 + step, u_min);
    h1 = profile(u1);
  }
  double lo, hi;
  if (h1 > h0) {
    lo = std::max(u0 - 1.0, u_min);
    hi = std::min(u0 + 1.0, u_max);
  } else {
    double prev = u0;
    while (true) {
      step *= 2.0;
      const double u2 = std::clamp(u1 + step, u_min, u_max);
      const double h2 = (u2 == u1) ? h1 : profile(u2);
      if (h2 > h1 || u2 == u1) {
        lo = std::min(prev, u2);
        hi = std::max(prev, u2);
        break;
      }
      prev = u1;
      u1 = u2;
      h1 = h2;
    }
  }

  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = profile(x1);
  double f2 = profile(x2);
  int guard = 0;
  while (hi - lo > kLogLambdaTol) {
    if (++guard > 500) throw Error(ErrorCode::kDualSolveFailed, "lambda search did not converge");
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = profile(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = profile(x2);
    }
  }
  double u_best = 0.5 * (lo + hi);
  double h_best = profile(u_best);
  for (double u : {lo, hi}) {
    const double h = profile(u);
    if (h < h_best) {
      h_best = h;
      u_best = u;
    }
  }

  const double lambda = std::exp(u_best);
  const double eta = solve_eta(f, p, lambda, divergence);
  std::vector<double> w(f.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (p[k] <= 0.0) continue;
    w[k] = p[k] * phi_conjugate_derivative(divergence, (f[k] - eta) / lambda);
    total += w[k];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    // Degenerate scaling at the lambda floor: all mass sits on the maximizer.
    std::fill(w.begin(), w.end(), 0.0);
    std::size_t best = 0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (p[k] > 0.0 && (p[best] <= 0.0 || f[k] > f[best])) best = k;
    }
    w[best] = 1.0;
  } else {
    for (double& wk : w) wk /= total;
  }
  out.value = std::clamp(h_best, 0.0, 1.0);
  out.dual = {lambda, eta, std::move(w)};
  return out;
}

std::vector<double> component_probabilities(const Vector& x, const MixtureBelief& belief,
                                            bool gaussian) {
  std::vector<double> values;
  values.reserve(belief.size());
  for (std::size_t k = 0; k < belief.size(); ++k) {
    const AbcTriple t = checked_triple(x, belief.components[k], k);
    values.push_back(gaussian ? *wc_prob_gaussian(t) : wc_prob_nonparametric(t));
  }
  return values;
}

ObjectiveEval eval_nonparametric(const Vector& x, const MixtureBelief& belief) {
  return weighted_sum(x, component_terms(x, belief, false), belief.weights);
}

ObjectiveEval eval_gaussian(const Vector& x, const MixtureBelief& belief) {
  return weighted_sum(x, component_terms(x, belief, true), belief.weights);
}

ObjectiveEval eval_weight_robust(const Vector& x, const MixtureBelief& belief, double weight_budget,
                                 Divergence divergence, bool gaussian) {
  const auto terms = component_terms(x, belief, gaussian);
  std::vector<double> f;
  f.reserve(terms.size());
  for (const auto& t : terms) f.push_back(t.value);
  WeightDualSolution dual = solve_weight_dual(f, belief.weights, weight_budget, divergence);
  ObjectiveEval out = weighted_sum(x, terms, dual.dual.weights);
  out.value = dual.value;
  out.inner_dual = std::move(dual.dual);
  return out;
}

ObjectiveEval eval_worst_component(const Vector& x, const MixtureBelief& belief, bool gaussian) {
  const auto terms = component_terms(x, belief, gaussian);
  std::size_t best = 0;
  for (std::size_t k = 1; k < terms.size(); ++k) {
    if (terms[k].value > terms[best].value) best = k;
  }
  ObjectiveEval out;
  out.value = terms[best].value;
  out.gradient = terms[best].gradient;
  for (const auto& t : terms) out.component_values.push_back(t.value);
  return out;
}

ObjectiveEval evaluate_objective(const Vector& x, const RecourseProblem& problem) {
  switch (problem.mode) {
    case SolverMode::kNonparametric:
      return eval_nonparametric(x, problem.belief);
    case SolverMode::kGaussian:
      return eval_gaussian(x, problem.belief);
    case SolverMode::kWeightRobust:
      return eval_weight_robust(x, problem.belief, problem.weight_budget, problem.divergence, false);
    case SolverMode::kGaussianWeightRobust:
      return eval_weight_robust(x, problem.belief, problem.weight_budget, problem.divergence, true);
    case SolverMode::kWorstComponent:
      return eval_worst_component(x, problem.belief, false);
    case SolverMode::kGaussianWorstComponent:
      return eval_worst_component(x, problem.belief, true);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown solver mode");
}

}  // namespace dirrac
