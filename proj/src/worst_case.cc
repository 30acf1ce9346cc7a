#include "dirrac/worst_case.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dirrac/normal.hpp"

namespace dirrac {
namespace {

void require_nonzero(const AbcTriple& t) {
  if (t.a == 0.0 && t.b == 0.0 && t.c == 0.0) {
    throw Error(ErrorCode::kZeroAction, "worst-case probability is undefined at x = 0");
  }
}

void require_nonzero(const Vector& x) {
  if (x.isZero(0.0)) {
    throw Error(ErrorCode::kZeroAction, "worst-case probability is undefined at x = 0");
  }
}

// a + c < 0 implies a^2 > c^2, so only roundoff can push this below zero.
double radicand_root(const AbcTriple& t) {
  return std::sqrt(std::max(0.0, t.a * t.a + t.b * t.b - t.c * t.c));
}

void check_beta(double beta, double upper, bool upper_inclusive) {
  const bool ok = beta > 0.0 && (upper_inclusive ? beta <= upper : beta < upper);
  if (!ok) {
    std::ostringstream os;
    os << "beta=" << beta << " outside (0, " << upper << (upper_inclusive ? "]" : ")");
    throw Error(ErrorCode::kBetaOutOfRange, os.str());
  }
}

}  // namespace

AbcTriple abc(const Vector& x, const ComponentMoments& comp) {
  AbcTriple t;
  t.a = -comp.mean.dot(x);
  t.b = std::sqrt(std::max(0.0, x.dot(comp.covariance * x)));
  t.c = comp.radius * x.norm();
  return t;
}

double wc_var_nonparametric(const AbcTriple& t, double beta) {
  check_beta(beta, 1.0, false);
  return t.a + std::sqrt((1.0 - beta) / beta) * t.b + t.c / std::sqrt(beta);
}

double wc_var_nonparametric(const Vector& x, const ComponentMoments& comp, double beta) {
  return wc_var_nonparametric(abc(x, comp), beta);
}

double wc_var_gaussian(const AbcTriple& t, double beta) {
  check_beta(beta, 0.5, true);
  const double q = (beta == 0.5) ? 0.0 : normal_quantile(1.0 - beta);
  return t.a + q * t.b + t.c * std::sqrt(1.0 + q * q);
}

double wc_var_gaussian(const Vector& x, const ComponentMoments& comp, double beta) {
  return wc_var_gaussian(abc(x, comp), beta);
}

double wc_prob_nonparametric(const AbcTriple& t) {
  require_nonzero(t);
  if (!t.robustly_favorable()) return 1.0;
  const double denom = t.a * t.a + t.b * t.b;
  const double s = (-t.a * t.c + t.b * radicand_root(t)) / denom;
  return std::clamp(s * s, 0.0, 1.0);
}

double wc_prob_nonparametric(const Vector& x, const ComponentMoments& comp) {
  require_nonzero(x);
  return wc_prob_nonparametric(abc(x, comp));
}

double gaussian_margin(const AbcTriple& t) {
  return (t.a * t.a - t.c * t.c) / (-t.a * t.b + t.c * radicand_root(t));
}

std::optional<double> wc_prob_gaussian(const AbcTriple& t) {
  require_nonzero(t);
  if (!t.robustly_favorable()) return std::nullopt;
  // 1 - Phi(g) evaluated as Phi(-g) to keep precision in the tail.
  return normal_cdf(-gaussian_margin(t));
}

std::optional<double> wc_prob_gaussian(const Vector& x, const ComponentMoments& comp) {
  require_nonzero(x);
  return wc_prob_gaussian(abc(x, comp));
}

AbcGradient wc_prob_nonparametric_partials(const AbcTriple& t) {
  const double a = t.a, b = t.b, c = t.c;
  const double r = radicand_root(t);
  const double den = a * a + b * b;
  const double num = -a * c + b * r;
  const double s = num / den;
  const double ds_da = ((-c + b * a / r) * den - num * 2.0 * a) / (den * den);
  const double ds_db = ((r + b * b / r) * den - num * 2.0 * b) / (den * den);
  const double ds_dc = (-a - b * c / r) / den;
  return {2.0 * s * ds_da, 2.0 * s * ds_db, 2.0 * s * ds_dc};
}

AbcGradient gaussian_margin_partials(const AbcTriple& t) {
  const double a = t.a, b = t.b, c = t.c;
  const double r = radicand_root(t);
  const double num = a * a - c * c;
  const double den = -a * b + c * r;
  const double den2 = den * den;
  return {(2.0 * a * den - num * (-b + c * a / r)) / den2,
          -num * (-a + c * b / r) / den2,
          (-2.0 * c * den - num * (r - c * c / r)) / den2};
}

Vector abc_chain_rule(const AbcGradient& g, const Vector& x, const ComponentMoments& comp) {
  const Vector cov_x = comp.covariance * x;
  const double b = std::sqrt(std::max(0.0, x.dot(cov_x)));
  const double norm = x.norm();
  Vector grad = -g.da * comp.mean;
  if (b > 0.0) grad += (g.db / b) * cov_x;
  if (norm > 0.0 && comp.radius != 0.0) grad += (g.dc * comp.radius / norm) * x;
  return grad;
}

}  // namespace dirrac
