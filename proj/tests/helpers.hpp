#pragma once

#include <initializer_list>
#include <vector>

#include "doctest.h"

#include "dirrac/core.hpp"

namespace testing {

inline dirrac::Vector vec(std::initializer_list<double> xs) {
  dirrac::Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline dirrac::MixtureBelief single(const dirrac::Vector& mean, const dirrac::Matrix& cov, double radius) {
  return {{{mean, cov, radius}}, {1.0}};
}

inline dirrac::RecourseProblem make_problem(const dirrac::Vector& x0, const dirrac::MixtureBelief& belief,
                                            double delta) {
  dirrac::RecourseProblem p{dirrac::FeatureVector(x0), belief};
  p.delta = delta;
  return p;
}

}  // namespace testing

#define CHECK_ERROR_CODE(expr, expected)                                   \
  do {                                                                     \
    bool thrown_ = false;                                                  \
    try {                                                                  \
      (void)(expr);                                                        \
    } catch (const dirrac::Error& e_) {                                    \
      thrown_ = true;                                                      \
      CHECK_MESSAGE(e_.code() == (expected), dirrac::to_string(e_.code())); \
    }                                                                      \
    CHECK_MESSAGE(thrown_, "no dirrac::Error thrown");                     \
  } while (0)
