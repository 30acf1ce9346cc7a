#pragma once

#include <optional>

#include "dirrac/core.hpp"

namespace dirrac {

/// Scalar summary of an action against one component:
///   a = -mean^T x,  b = sqrt(x^T cov x),  c = radius * ||x||_2.
/// Every worst-case quantity below depends on x only through this triple.
struct AbcTriple {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  /// The action lies strictly on the favorable side of the robust margin.
  bool robustly_favorable() const { return a + c < 0.0; }
};

AbcTriple abc(const Vector& x, const ComponentMoments& comp);

// Worst-case Value-at-Risk of -theta^T x at level beta over the Gelbrich ball
// (any distribution with moments within the radius) and over its Gaussian
// restriction. The Gaussian variant is only defined for beta in (0, 0.5].
double wc_var_nonparametric(const AbcTriple& t, double beta);
double wc_var_nonparametric(const Vector& x, const ComponentMoments& comp, double beta);
double wc_var_gaussian(const AbcTriple& t, double beta);
double wc_var_gaussian(const Vector& x, const ComponentMoments& comp, double beta);

/// Largest probability of an unfavorable outcome (theta^T x <= 0) over the
/// moment ball. Returns 1 when a + c >= 0.
double wc_prob_nonparametric(const AbcTriple& t);
double wc_prob_nonparametric(const Vector& x, const ComponentMoments& comp);

/// Gaussian counterpart, 1 - Phi(g) with
///   g = (a^2 - c^2) / (-a b + c sqrt(a^2 + b^2 - c^2)).
/// Empty when a + c >= 0: the worst case then reaches or exceeds 1/2 and the
/// closed form no longer applies.
std::optional<double> wc_prob_gaussian(const AbcTriple& t);
std::optional<double> wc_prob_gaussian(const Vector& x, const ComponentMoments& comp);

/// The Gaussian standardized margin g above; requires a + c < 0.
double gaussian_margin(const AbcTriple& t);

/// Partial derivatives of a scalar with respect to (a, b, c).
struct AbcGradient {
  double da = 0.0;
  double db = 0.0;
  double dc = 0.0;
};

/// Derivatives of wc_prob_nonparametric and gaussian_margin on a + c < 0.
AbcGradient wc_prob_nonparametric_partials(const AbcTriple& t);
AbcGradient gaussian_margin_partials(const AbcTriple& t);

/// Chain rule from (a, b, c) partials to a gradient in x.
Vector abc_chain_rule(const AbcGradient& g, const Vector& x, const ComponentMoments& comp);

}  // namespace dirrac
