#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

#include "dirrac/normal.hpp"
#include "dirrac/worst_case.hpp"

using namespace dirrac;
using doctest::Approx;
using testing::vec;

namespace {

// Component whose triple at x = e1 is (a, b, c): mean = -a e1, cov = diag(b^2, 1), radius = c.
ComponentMoments component_for(double a, double b, double c) {
  Matrix cov = Matrix::Identity(2, 2);
  cov(0, 0) = b * b;
  return {vec({-a, 0}), cov, c};
}

// Largest beta with wc VaR(beta) <= 0; the worst-case probability is this root.
double var_root_nonparametric(const AbcTriple& t) {
  return oracle::bisect([&](double beta) { return wc_var_nonparametric(t, beta); }, 1e-15, 1 - 1e-15);
}

struct RandomInstance {
  Vector x;
  ComponentMoments comp;
};

RandomInstance random_instance(std::mt19937_64& rng, Eigen::Index d, double max_radius) {
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, max_radius);
  for (;;) {
    RandomInstance r{Vector(d), {Vector(d), oracle::random_spd(d, rng), u(rng)}};
    for (Eigen::Index i = 0; i < d; ++i) {
      r.x(i) = n(rng);
      r.comp.mean(i) = n(rng);
    }
    // Orient the mean so the action is favorable on average.
    if (r.comp.mean.dot(r.x) < 0) r.comp.mean = -r.comp.mean;
    if (abc(r.x, r.comp).robustly_favorable()) return r;
  }
}

}  // namespace

TEST_CASE("abc examples") {
  const AbcTriple t1 = abc(vec({1, 0, 0}), {vec({1, 0, 0}), Matrix::Identity(3, 3), 0.0});
  CHECK(t1.a == -1.0);
  CHECK(t1.b == 1.0);
  CHECK(t1.c == 0.0);
  const AbcTriple t2 = abc(vec({1, 0}), {vec({1, 0}), Matrix::Identity(2, 2), 0.5});
  CHECK(t2.a == -1.0);
  CHECK(t2.b == 1.0);
  CHECK(t2.c == 0.5);
  Matrix cov = Matrix::Zero(2, 2);
  cov.diagonal() << 4, 1;
  const AbcTriple t3 = abc(vec({2, 0}), {vec({1, 0}), cov, 1.0});
  CHECK(t3.a == -2.0);
  CHECK(t3.b == 4.0);
  CHECK(t3.c == 2.0);
  const AbcTriple zero = abc(vec({0, 0}), {vec({1, 0}), Matrix::Identity(2, 2), 1.0});
  CHECK(zero.a == 0.0);
  CHECK(zero.b == 0.0);
  CHECK(zero.c == 0.0);
}

TEST_CASE("nonparametric worst-case VaR examples") {
  CHECK(wc_var_nonparametric(AbcTriple{-1, 1, 0}, 0.5) == Approx(0.0).epsilon(1e-15));
  CHECK(wc_var_nonparametric(AbcTriple{-1, 1, 0}, 0.2) == Approx(1.0).epsilon(1e-14));
  CHECK(wc_var_nonparametric(AbcTriple{-1, 1, 0.5}, 0.25) == Approx(std::sqrt(3.0)).epsilon(1e-14));
  CHECK(wc_var_nonparametric(AbcTriple{-1, 1, 0.5}, 0.25) == Approx(1.7321).epsilon(1e-4));
  CHECK_ERROR_CODE(wc_var_nonparametric(AbcTriple{-1, 1, 0}, 0.0), ErrorCode::kBetaOutOfRange);
  CHECK_ERROR_CODE(wc_var_nonparametric(AbcTriple{-1, 1, 0}, 1.0), ErrorCode::kBetaOutOfRange);
}

TEST_CASE("Gaussian worst-case VaR examples") {
  CHECK(wc_var_gaussian(AbcTriple{-1, 1, 0.5}, 0.5) == Approx(-0.5).epsilon(1e-14));
  const double beta = 1 - oracle::phi_cdf(1.0);  // t = 1
  CHECK(beta == Approx(0.158655).epsilon(1e-6));
  CHECK(std::abs(wc_var_gaussian(AbcTriple{-1, 1, 0}, beta)) < 1e-12);
  CHECK(wc_var_gaussian(vec({0.3, 0.7}), {vec({1, 2}), Matrix::Identity(2, 2), 0.0}, 0.5) ==
        Approx(-1.7).epsilon(1e-14));
  CHECK_ERROR_CODE(wc_var_gaussian(AbcTriple{-1, 1, 0}, 0.6), ErrorCode::kBetaOutOfRange);
  CHECK_ERROR_CODE(wc_var_gaussian(AbcTriple{-1, 1, 0}, 0.0), ErrorCode::kBetaOutOfRange);
}

TEST_CASE("nonparametric worst-case probability examples") {
  // Cantelli bound b^2 / (a^2 + b^2) at c = 0.
  CHECK(wc_prob_nonparametric(AbcTriple{-1, 1, 0}) == Approx(0.5).epsilon(1e-15));
  CHECK(var_root_nonparametric(AbcTriple{-1, 1, 0}) == Approx(0.5).epsilon(1e-12));
  CHECK(wc_prob_nonparametric(AbcTriple{1, 1, 0}) == 1.0);
  CHECK(wc_prob_nonparametric(AbcTriple{-1, 1, 1}) == 1.0);
  CHECK(wc_prob_nonparametric(AbcTriple{-2, 1, 1}) == Approx(0.64).epsilon(1e-15));
  CHECK(var_root_nonparametric(AbcTriple{-2, 1, 1}) == Approx(0.64).epsilon(1e-12));
  CHECK(wc_prob_nonparametric(vec({1, 0}), component_for(-2, 1, 1)) == Approx(0.64).epsilon(1e-15));
  CHECK_ERROR_CODE(wc_prob_nonparametric(vec({0, 0}), component_for(-1, 1, 0)), ErrorCode::kZeroAction);
}

TEST_CASE("Gaussian worst-case probability examples") {
  CHECK(*wc_prob_gaussian(AbcTriple{-1, 1, 0}) == Approx(1 - oracle::phi_cdf(1.0)).epsilon(1e-14));
  CHECK(*wc_prob_gaussian(AbcTriple{-1, 1, 0}) == Approx(0.158655).epsilon(1e-6));
  CHECK(*wc_prob_gaussian(AbcTriple{-2, 1, 1}) == Approx(1 - oracle::phi_cdf(0.75)).epsilon(1e-14));
  CHECK(*wc_prob_gaussian(AbcTriple{-2, 1, 1}) == Approx(0.226627).epsilon(1e-6));
  CHECK_FALSE(wc_prob_gaussian(AbcTriple{1, 1, 0}).has_value());
  CHECK_FALSE(wc_prob_gaussian(AbcTriple{-1, 1, 1}).has_value());
  CHECK_ERROR_CODE(wc_prob_gaussian(vec({0, 0}), component_for(-1, 1, 0)), ErrorCode::kZeroAction);

  // Zero radius reduces to 1 - Phi(theta^T x / sqrt(x^T Sigma x)).
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const RandomInstance r = random_instance(rng, 4, 0.0);
    const double expected = 1 - oracle::phi_cdf(r.comp.mean.dot(r.x) / std::sqrt(r.x.dot(r.comp.covariance * r.x)));
    CHECK(std::abs(*wc_prob_gaussian(r.x, r.comp) - expected) < 1e-12);
  }
}

TEST_CASE("Gaussian probability agrees with the expanded moment expression") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const RandomInstance r = random_instance(rng, 5, 1.0);
    const double mx = r.comp.mean.dot(r.x);
    const double quad = r.x.dot(r.comp.covariance * r.x);
    const double rn = r.comp.radius * r.x.norm();
    const double g = (mx * mx - rn * rn) / (mx * std::sqrt(quad) + rn * std::sqrt(mx * mx + quad - rn * rn));
    CHECK(std::abs(*wc_prob_gaussian(r.x, r.comp) - (1 - oracle::phi_cdf(g))) < 1e-12);
  }
}

TEST_CASE("probabilities equal the roots of their VaR equations") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const RandomInstance r = random_instance(rng, 3, 1.5);
    const AbcTriple t = abc(r.x, r.comp);
    CHECK(std::abs(wc_prob_nonparametric(t) - var_root_nonparametric(t)) < 1e-8);
    // Gaussian: root t* of a + t b + c sqrt(1 + t^2) = 0, probability 1 - Phi(t*).
    const double tstar =
        oracle::bisect([&](double s) { return t.a + s * t.b + t.c * std::sqrt(1 + s * s); }, 0.0, 1e3);
    CHECK(std::abs(*wc_prob_gaussian(t) - (1 - oracle::phi_cdf(tstar))) < 1e-8);
  }
}

TEST_CASE("probabilities are scale invariant") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const RandomInstance r = random_instance(rng, 4, 1.0);
    const double pn = wc_prob_nonparametric(r.x, r.comp);
    const double pg = *wc_prob_gaussian(r.x, r.comp);
    for (double s : {0.5, 2.0, 10.0}) {
      CHECK(std::abs(wc_prob_nonparametric(Vector(s * r.x), r.comp) - pn) < 1e-10);
      CHECK(std::abs(*wc_prob_gaussian(Vector(s * r.x), r.comp) - pg) < 1e-10);
    }
  }
}

TEST_CASE("probabilities are nondecreasing in the radius and the moment ball dominates") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 200; ++i) {
    RandomInstance r = random_instance(rng, 3, 0.5);
    double prev_n = wc_prob_nonparametric(r.x, r.comp);
    double prev_g = *wc_prob_gaussian(r.x, r.comp);
    CHECK(prev_n >= prev_g - 1e-15);
    for (int step = 0; step < 10; ++step) {
      r.comp.radius *= 1.1;
      const double pn = wc_prob_nonparametric(r.x, r.comp);
      CHECK(pn >= prev_n - 1e-14);
      prev_n = pn;
      const auto pg = wc_prob_gaussian(r.x, r.comp);
      if (!pg) break;
      CHECK(*pg >= prev_g - 1e-14);
      CHECK(pn >= *pg - 1e-15);
      prev_g = *pg;
    }
  }
}

TEST_CASE("nonparametric probability tends to one at the margin boundary") {
  // a + c -> 0 from below with b fixed.
  double prev = 0;
  for (double gap : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8}) {
    const double p = wc_prob_nonparametric(AbcTriple{-1.0, 0.7, 1.0 - gap});
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(prev > 1 - 1e-6);
}

TEST_CASE("partial derivatives match finite differences") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const RandomInstance r = random_instance(rng, 3, 1.0);
    const AbcTriple t = abc(r.x, r.comp);
    const auto np = [](const oracle::Vec& v) { return wc_prob_nonparametric(AbcTriple{v(0), v(1), v(2)}); };
    const auto gm = [](const oracle::Vec& v) { return gaussian_margin(AbcTriple{v(0), v(1), v(2)}); };
    const oracle::Vec at = vec({t.a, t.b, t.c});
    const oracle::Vec fd_n = oracle::fd_gradient(np, at);
    const oracle::Vec fd_g = oracle::fd_gradient(gm, at);
    const AbcGradient an = wc_prob_nonparametric_partials(t);
    const AbcGradient ag = gaussian_margin_partials(t);
    const double scale_n = std::max(1.0, fd_n.norm());
    const double scale_g = std::max(1.0, fd_g.norm());
    CHECK((vec({an.da, an.db, an.dc}) - fd_n).norm() / scale_n < 1e-5);
    CHECK((vec({ag.da, ag.db, ag.dc}) - fd_g).norm() / scale_g < 1e-5);
  }
}

TEST_CASE("standard normal helpers") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.0) == Approx(0.8413447460685429).epsilon(1e-15));
  CHECK(normal_cdf(-8.0) == Approx(6.22096057427178e-16).epsilon(1e-12));
  for (double p : {1e-12, 1e-6, 0.01, 0.158655, 0.3, 0.5, 0.7, 0.99, 1 - 1e-9}) {
    CHECK(normal_quantile(p) == Approx(oracle::phi_quantile(p)).epsilon(1e-12));
  }
  CHECK(normal_quantile(0.5) == 0.0);
}
