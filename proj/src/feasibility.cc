#include "dirrac/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "interior_point.hpp"

namespace dirrac {

FeasibleSetSpec FeasibleSetSpec::from_problem(const RecourseProblem& problem) {
  FeasibleSetSpec spec;
  spec.x0 = problem.x0.values();
  spec.delta = problem.delta;
  spec.cost = problem.cost;
  spec.margin = problem.margin;
  spec.actionability = problem.actionability;
  for (const auto& comp : problem.belief.components) {
    spec.cones.push_back({comp.mean, comp.radius});
  }
  const auto bias = static_cast<std::size_t>(problem.x0.bias_index());
  auto& imm = spec.actionability.immutable;
  if (std::find(imm.begin(), imm.end(), bias) == imm.end()) imm.push_back(bias);
  return spec;
}

double cost(const Vector& x, const Vector& x0, CostKind kind) {
  const Vector diff = x - x0;
  return kind == CostKind::kL1 ? diff.lpNorm<1>() : diff.norm();
}

double max_margin_violation(const Vector& x, const FeasibleSetSpec& spec) {
  double worst = -std::numeric_limits<double>::infinity();
  const double norm = x.norm();
  for (const auto& cone : spec.cones) {
    worst = std::max(worst, cone.radius * norm - cone.mean.dot(x) + spec.margin);
  }
  return worst;
}

CoordinateBounds actionability_bounds(const FeasibleSetSpec& spec) {
  const Eigen::Index d = spec.x0.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  CoordinateBounds bounds{Vector::Constant(d, -inf), Vector::Constant(d, inf)};
  const auto check = [d](std::size_t i) {
    if (i >= static_cast<std::size_t>(d)) {
      throw Error(ErrorCode::kDimensionMismatch, "actionability index out of range");
    }
    return static_cast<Eigen::Index>(i);
  };
  for (const auto& b : spec.actionability.box) {
    const auto i = check(b.index);
    bounds.lo(i) = std::max(bounds.lo(i), b.lo);
    bounds.hi(i) = std::min(bounds.hi(i), b.hi);
  }
  for (auto idx : spec.actionability.non_decreasing) {
    const auto i = check(idx);
    bounds.lo(i) = std::max(bounds.lo(i), spec.x0(i));
  }
  for (auto idx : spec.actionability.immutable) {
    const auto i = check(idx);
    bounds.lo(i) = spec.x0(i);
    bounds.hi(i) = spec.x0(i);
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (bounds.lo(i) > bounds.hi(i)) {
      std::ostringstream os;
      os << "coordinate " << i << " has empty actionable range";
      throw Error(ErrorCode::kEmptyFeasibleSet, os.str());
    }
  }
  return bounds;
}

bool is_feasible(const Vector& x, const FeasibleSetSpec& spec, double tol) {
  if (x.size() != spec.x0.size() || !x.allFinite()) return false;
  if (cost(x, spec.x0, spec.cost) > spec.delta + tol) return false;
  if (!spec.cones.empty() && max_margin_violation(x, spec) > tol) return false;
  for (auto i : spec.actionability.immutable) {
    if (std::abs(x(i) - spec.x0(i)) > tol) return false;
  }
  for (auto i : spec.actionability.non_decreasing) {
    if (x(i) < spec.x0(i) - tol) return false;
  }
  for (const auto& b : spec.actionability.box) {
    if (x(b.index) < b.lo - tol || x(b.index) > b.hi + tol) return false;
  }
  return true;
}

Vector project_cone(const Vector& xp, const Vector& mean, double radius, double margin) {
  const double mean_norm = mean.norm();
  if (mean_norm == 0.0) {
    throw Error(ErrorCode::kDegenerateDirection, "cone constraint with zero mean direction");
  }
  const auto violation = [&](const Vector& y) { return radius * y.norm() - mean.dot(y) + margin; };
  if (violation(xp) <= 0.0) return xp;
  if (radius == 0.0) {
    return xp + ((margin - mean.dot(xp)) / (mean_norm * mean_norm)) * mean;
  }
  if (radius >= mean_norm) {
    throw Error(ErrorCode::kEmptyFeasibleSet, "ambiguity radius is at least the norm of the mean");
  }

  // KKT: y(mu) = shrink(xp + mu * mean, mu * radius); the violation is
  // nonincreasing in mu, so bisect for the active multiplier.
  const auto point = [&](double mu) {
    Vector v = xp + mu * mean;
    const double n = v.norm();
    const double keep = n > 0.0 ? std::max(0.0, 1.0 - mu * radius / n) : 0.0;
    return Vector(keep * v);
  };
  double lo = 0.0;
  double hi = 1.0;
  Vector y_hi = point(hi);
  while (violation(y_hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    y_hi = point(hi);
    if (!std::isfinite(hi)) throw Error(ErrorCode::kEmptyFeasibleSet, "cone projection diverged");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const Vector y = point(mid);
    const double v = violation(y);
    if (v > 0.0) {
      lo = mid;
    } else {
      hi = mid;
      y_hi = y;
      if (v > -1e-13) break;
    }
  }
  return y_hi;
}

Vector project_cost_ball(const Vector& xp, const Vector& x0, double delta, CostKind kind) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::kBadBudget, "cost budget must be nonnegative");
  const Vector v = xp - x0;
  if (kind == CostKind::kL2) {
    const double n = v.norm();
    if (n <= delta) return xp;
    return x0 + (delta / n) * v;
  }
  const double l1 = v.lpNorm<1>();
  if (l1 <= delta) return xp;
  if (delta == 0.0) return x0;
  // Sort-based soft threshold onto the l1 ball.
  std::vector<double> u(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) u[static_cast<std::size_t>(i)] = std::abs(v(i));
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - delta) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) threshold = t;
  }
  Vector out = x0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::max(std::abs(v(i)) - threshold, 0.0);
    out(i) += std::copysign(mag, v(i));
  }
  return out;
}

namespace {

enum class DykstraStatus { kSettled, kUnsettled };

struct DykstraOutcome {
  Vector x;
  DykstraStatus status;
};

DykstraOutcome run_dykstra(const Vector& xp, const FeasibleSetSpec& spec,
                           const CoordinateBounds& bounds, const ProjectionOptions& options) {
  using Projector = std::function<Vector(const Vector&)>;
  std::vector<Projector> sets;
  sets.emplace_back([&](const Vector& z) { return project_cost_ball(z, spec.x0, spec.delta, spec.cost); });
  for (const auto& cone : spec.cones) {
    sets.emplace_back([&](const Vector& z) { return project_cone(z, cone.mean, cone.radius, spec.margin); });
  }
  // Box last, so immutable coordinates are exact on exit.
  sets.emplace_back([&](const Vector& z) { return Vector(z.cwiseMax(bounds.lo).cwiseMin(bounds.hi)); });

  Vector x = xp;
  std::vector<Vector> increments(sets.size(), Vector::Zero(xp.size()));
  for (int it = 0; it < options.max_iter; ++it) {
    double largest_move = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const Vector shifted = x + increments[i];
      Vector next = sets[i](shifted);
      increments[i] = shifted - next;
      largest_move = std::max(largest_move, (next - x).norm());
      x = std::move(next);
    }
    // No set moves the iterate: together with the Dykstra invariant
    // xp - x = sum of increments this is the projection's optimality condition.
    if (largest_move < options.tol) return {x, DykstraStatus::kSettled};
  }
  return {x, DykstraStatus::kUnsettled};
}

// Projection as a smooth convex program over the non-fixed coordinates.
// With the l1 cost, auxiliary variables t_i >= |y_i - x0_i| carry the cost.
class ProjectionProgram final : public detail::SmoothProgram {
 public:
  ProjectionProgram(const Vector& xp, const FeasibleSetSpec& spec, const CoordinateBounds& bounds)
      : xp_(xp), spec_(spec), bounds_(bounds), base_(bounds.lo) {
    for (Eigen::Index i = 0; i < xp.size(); ++i) {
      if (bounds.lo(i) < bounds.hi(i)) {
        free_.push_back(i);
      } else {
        fixed_cost_ += spec.cost == CostKind::kL1 ? std::abs(base_(i) - spec.x0(i))
                                                  : std::pow(base_(i) - spec.x0(i), 2);
      }
    }
    for (Eigen::Index j = 0; j < nf(); ++j) {
      const Eigen::Index i = free_[static_cast<std::size_t>(j)];
      if (std::isfinite(bounds.lo(i))) lower_.push_back(j);
      if (std::isfinite(bounds.hi(i))) upper_.push_back(j);
    }
  }

  Eigen::Index nf() const { return static_cast<Eigen::Index>(free_.size()); }
  bool l1() const { return spec_.cost == CostKind::kL1; }

  Vector point(const Vector& z) const {
    Vector y = base_;
    for (Eigen::Index j = 0; j < nf(); ++j) y(free_[static_cast<std::size_t>(j)]) = z(j);
    return y;
  }

  Vector start() const {
    Vector z(dim());
    for (Eigen::Index j = 0; j < nf(); ++j) {
      const Eigen::Index i = free_[static_cast<std::size_t>(j)];
      double v = std::clamp(xp_(i), bounds_.lo(i), bounds_.hi(i));
      if (std::isfinite(bounds_.lo(i)) && std::isfinite(bounds_.hi(i))) {
        v = std::clamp(v, bounds_.lo(i) + 1e-3 * (bounds_.hi(i) - bounds_.lo(i)),
                       bounds_.hi(i) - 1e-3 * (bounds_.hi(i) - bounds_.lo(i)));
      } else if (v == bounds_.lo(i)) {
        v += 1e-3;
      } else if (v == bounds_.hi(i)) {
        v -= 1e-3;
      }
      z(j) = v;
    }
    if (l1()) {
      for (Eigen::Index j = 0; j < nf(); ++j) {
        z(nf() + j) = std::abs(z(j) - spec_.x0(free_[static_cast<std::size_t>(j)])) + 1.0;
      }
    }
    return z;
  }

  Eigen::Index dim() const override { return l1() ? 2 * nf() : nf(); }

  double objective(const Vector& z) const override { return 0.5 * (z.head(nf()) - xp_free()).squaredNorm(); }

  Vector objective_grad(const Vector& z) const override {
    Vector g = Vector::Zero(dim());
    g.head(nf()) = z.head(nf()) - xp_free();
    return g;
  }

  Matrix objective_hess(const Vector&) const override {
    Matrix h = Matrix::Zero(dim(), dim());
    h.topLeftCorner(nf(), nf()).setIdentity();
    return h;
  }

  std::size_t num_constraints() const override {
    return lower_.size() + upper_.size() + spec_.cones.size() + (l1() ? 1 + 2 * free_.size() : 1);
  }

  void constraint_values(const Vector& z, Vector& out) const override {
    out.resize(static_cast<Eigen::Index>(num_constraints()));
    const Vector y = point(z);
    Eigen::Index r = 0;
    for (auto j : lower_) out(r++) = bounds_.lo(free_[static_cast<std::size_t>(j)]) - z(j);
    for (auto j : upper_) out(r++) = z(j) - bounds_.hi(free_[static_cast<std::size_t>(j)]);
    const double norm = y.norm();
    for (const auto& cone : spec_.cones) out(r++) = cone.radius * norm - cone.mean.dot(y) + spec_.margin;
    if (l1()) {
      out(r++) = z.tail(nf()).sum() + fixed_cost_ - spec_.delta;
      for (Eigen::Index j = 0; j < nf(); ++j) {
        const double diff = z(j) - spec_.x0(free_[static_cast<std::size_t>(j)]);
        out(r++) = diff - z(nf() + j);
        out(r++) = -diff - z(nf() + j);
      }
    } else {
      out(r++) = (y - spec_.x0).squaredNorm() - spec_.delta * spec_.delta;
    }
  }

  std::vector<detail::ConstraintEval> constraints(const Vector& z) const override {
    std::vector<detail::ConstraintEval> evals;
    evals.reserve(num_constraints());
    const Eigen::Index n = dim();
    const Vector y = point(z);
    const auto unit = [n](Eigen::Index j, double sign) {
      Vector g = Vector::Zero(n);
      g(j) = sign;
      return g;
    };
    for (auto j : lower_) evals.push_back({bounds_.lo(free_[static_cast<std::size_t>(j)]) - z(j), unit(j, -1.0), {}});
    for (auto j : upper_) evals.push_back({z(j) - bounds_.hi(free_[static_cast<std::size_t>(j)]), unit(j, 1.0), {}});

    const double norm = std::max(y.norm(), 1e-300);
    Vector y_free(nf());
    for (Eigen::Index j = 0; j < nf(); ++j) y_free(j) = y(free_[static_cast<std::size_t>(j)]);
    for (const auto& cone : spec_.cones) {
      detail::ConstraintEval c;
      c.value = cone.radius * norm - cone.mean.dot(y) + spec_.margin;
      c.grad = Vector::Zero(n);
      for (Eigen::Index j = 0; j < nf(); ++j) {
        const Eigen::Index i = free_[static_cast<std::size_t>(j)];
        c.grad(j) = cone.radius * y(i) / norm - cone.mean(i);
      }
      if (cone.radius > 0.0) {
        c.hess = Matrix::Zero(n, n);
        c.hess.topLeftCorner(nf(), nf()) =
            (cone.radius / norm) * (Matrix::Identity(nf(), nf()) - y_free * y_free.transpose() / (norm * norm));
      }
      evals.push_back(std::move(c));
    }
    if (l1()) {
      detail::ConstraintEval sum;
      sum.value = z.tail(nf()).sum() + fixed_cost_ - spec_.delta;
      sum.grad = Vector::Zero(n);
      sum.grad.tail(nf()).setOnes();
      evals.push_back(std::move(sum));
      for (Eigen::Index j = 0; j < nf(); ++j) {
        const double diff = z(j) - spec_.x0(free_[static_cast<std::size_t>(j)]);
        Vector up = Vector::Zero(n);
        up(j) = 1.0;
        up(nf() + j) = -1.0;
        Vector down = Vector::Zero(n);
        down(j) = -1.0;
        down(nf() + j) = -1.0;
        evals.push_back({diff - z(nf() + j), std::move(up), {}});
        evals.push_back({-diff - z(nf() + j), std::move(down), {}});
      }
    } else {
      detail::ConstraintEval ball;
      ball.value = (y - spec_.x0).squaredNorm() - spec_.delta * spec_.delta;
      ball.grad = Vector::Zero(n);
      for (Eigen::Index j = 0; j < nf(); ++j) {
        ball.grad(j) = 2.0 * (y_free(j) - spec_.x0(free_[static_cast<std::size_t>(j)]));
      }
      ball.hess = Matrix::Zero(n, n);
      ball.hess.topLeftCorner(nf(), nf()).diagonal().setConstant(2.0);
      evals.push_back(std::move(ball));
    }
    return evals;
  }

 private:
  Vector xp_free() const {
    Vector v(nf());
    for (Eigen::Index j = 0; j < nf(); ++j) v(j) = xp_(free_[static_cast<std::size_t>(j)]);
    return v;
  }

  const Vector& xp_;
  const FeasibleSetSpec& spec_;
  const CoordinateBounds& bounds_;
  Vector base_;
  std::vector<Eigen::Index> free_;
  std::vector<Eigen::Index> lower_;
  std::vector<Eigen::Index> upper_;
  double fixed_cost_ = 0.0;
};

Vector project_interior_point(const Vector& xp, const FeasibleSetSpec& spec,
                              const CoordinateBounds& bounds) {
  const ProjectionProgram program(xp, spec, bounds);
  if (program.nf() == 0) {
    const Vector y = program.point(Vector());
    if (is_feasible(y, spec, 0.0)) return y;
    throw Error(ErrorCode::kEmptyFeasibleSet, "all coordinates are fixed and the point is infeasible");
  }
  const auto interior = detail::find_interior_point(program, program.start());
  if (!interior) {
    std::ostringstream os;
    os << "no strictly feasible point for budget " << spec.delta;
    throw Error(ErrorCode::kEmptyFeasibleSet, os.str());
  }
  detail::BarrierOptions options;
  const auto result = detail::solve_barrier(program, *interior, options);
  return program.point(result.z);
}

[[noreturn]] void throw_stalled(const Vector& x, const FeasibleSetSpec& spec) {
  std::ostringstream os;
  os << "projection stalled at cost " << cost(x, spec.x0, spec.cost) << " (budget " << spec.delta << ")";
  if (!spec.cones.empty()) os << ", margin violation " << max_margin_violation(x, spec);
  throw Error(ErrorCode::kEmptyFeasibleSet, os.str());
}

}  // namespace

Vector project_feasible(const Vector& xp, const FeasibleSetSpec& spec,
                        const ProjectionOptions& options) {
  if (xp.size() != spec.x0.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "point and feasible set differ in dimension");
  }
  if (is_feasible(xp, spec, 0.0)) return xp;
  const CoordinateBounds bounds = actionability_bounds(spec);
  if (spec.delta == 0.0) {
    if (is_feasible(spec.x0, spec, options.tol)) return spec.x0;
    throw Error(ErrorCode::kEmptyFeasibleSet, "zero budget and the instance itself is infeasible");
  }
  if (options.method == ProjectionMethod::kInteriorPoint) {
    return project_interior_point(xp, spec, bounds);
  }
  const DykstraOutcome out = run_dykstra(xp, spec, bounds, options);
  const bool feasible = is_feasible(out.x, spec, 10.0 * options.tol);
  if (out.status == DykstraStatus::kSettled) {
    if (feasible) return out.x;
    throw_stalled(out.x, spec);
  }
  if (options.method == ProjectionMethod::kAuto) return project_interior_point(xp, spec, bounds);
  if (!feasible) throw_stalled(out.x, spec);
  throw Error(ErrorCode::kMaxIterExceeded, "Dykstra projection did not settle");
}

double delta_min(const FeasibleSetSpec& spec, const DeltaMinOptions& options) {
  const auto nonempty = [&](double delta) {
    FeasibleSetSpec trial = spec;
    trial.delta = delta;
    try {
      project_feasible(spec.x0, trial, options.projection);
      return true;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMaxIterExceeded) return true;
      if (e.code() == ErrorCode::kEmptyFeasibleSet) return false;
      throw;
    }
  };
  if (nonempty(0.0)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (!nonempty(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > options.cap) {
      throw Error(ErrorCode::kUnattainable,
                  "margin constraints cannot be met within the maximum cost budget");
    }
  }
  while (hi - lo > options.tol) {
    const double mid = 0.5 * (lo + hi);
    if (nonempty(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace dirrac
