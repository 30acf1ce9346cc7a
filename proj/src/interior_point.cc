#include "interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dirrac::detail {
namespace {

bool all_negative(const Vector& g) { return g.allFinite() && (g.array() < 0.0).all(); }

double barrier_value(const SmoothProgram& program, const Vector& z, const Vector& g, double tau) {
  return tau * program.objective(z) - (-g.array()).log().sum();
}

// Damped Newton on tau * f0 - sum log(-g_i) from a strictly feasible point.
Vector center(const SmoothProgram& program, Vector z, double tau, int max_newton) {
  const auto m = static_cast<Eigen::Index>(program.num_constraints());
  const Eigen::Index n = program.dim();
  Vector g(m);
  for (int it = 0; it < max_newton; ++it) {
    const auto evals = program.constraints(z);
    Vector grad = tau * program.objective_grad(z);
    Matrix hess = Matrix::Zero(n, n);
    const Matrix obj_hess = program.objective_hess(z);
    if (obj_hess.size() != 0) hess += tau * obj_hess;
    for (const auto& c : evals) {
      const double inv = -1.0 / c.value;
      grad += inv * c.grad;
      hess.noalias() += (inv * inv) * c.grad * c.grad.transpose();
      if (c.hess.size() != 0) hess += inv * c.hess;
    }
    Eigen::LDLT<Matrix> ldlt(hess);
    Vector step = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      const double ridge = 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      step = (hess + ridge * Matrix::Identity(n, n)).ldlt().solve(-grad);
      if (!step.allFinite()) break;
    }
    const double decrement = -grad.dot(step);
    if (!(decrement > 1e-14)) break;

    program.constraint_values(z, g);
    const double phi = barrier_value(program, z, g, tau);
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-18) {
      const Vector trial = z + t * step;
      program.constraint_values(trial, g);
      if (all_negative(g)) {
        const double phi_trial = barrier_value(program, trial, g, tau);
        if (phi_trial <= phi - 0.25 * t * decrement) {
          z = trial;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) break;
    if (decrement < 1e-11) break;
  }
  return z;
}

// minimize s  subject to  g_i(z) - s <= 0, over (z, s).
class PhaseOne final : public SmoothProgram {
 public:
  explicit PhaseOne(const SmoothProgram& inner) : inner_(inner) {}

  Eigen::Index dim() const override { return inner_.dim() + 1; }
  double objective(const Vector& w) const override { return w(w.size() - 1); }
  Vector objective_grad(const Vector& w) const override {
    Vector g = Vector::Zero(w.size());
    g(w.size() - 1) = 1.0;
    return g;
  }
  Matrix objective_hess(const Vector&) const override { return {}; }
  std::size_t num_constraints() const override { return inner_.num_constraints(); }
  void constraint_values(const Vector& w, Vector& out) const override {
    inner_.constraint_values(w.head(inner_.dim()), out);
    out.array() -= w(w.size() - 1);
  }
  std::vector<ConstraintEval> constraints(const Vector& w) const override {
    const Eigen::Index n = inner_.dim();
    auto evals = inner_.constraints(w.head(n));
    for (auto& c : evals) {
      c.value -= w(n);
      Vector grad(n + 1);
      grad.head(n) = c.grad;
      grad(n) = -1.0;
      c.grad = std::move(grad);
      if (c.hess.size() != 0) {
        Matrix hess = Matrix::Zero(n + 1, n + 1);
        hess.topLeftCorner(n, n) = c.hess;
        c.hess = std::move(hess);
      }
    }
    return evals;
  }

 private:
  const SmoothProgram& inner_;
};

}  // namespace

BarrierResult solve_barrier(const SmoothProgram& program, Vector z0, const BarrierOptions& options) {
  const double m = static_cast<double>(program.num_constraints());
  BarrierResult result;
  result.z = std::move(z0);
  double tau = options.tau0;
  for (int outer = 0; outer < options.max_outer; ++outer) {
    result.z = center(program, result.z, tau, options.max_newton);
    result.gap = m / tau;
    if (options.stop && options.stop(result.z)) {
      result.stopped_early = true;
      return result;
    }
    if (result.gap < options.gap_tol * std::max(1.0, std::abs(program.objective(result.z)))) break;
    tau *= options.tau_growth;
  }
  return result;
}

std::optional<Vector> find_interior_point(const SmoothProgram& program, const Vector& z0) {
  const Eigen::Index n = program.dim();
  Vector start = z0;
  Vector g(static_cast<Eigen::Index>(program.num_constraints()));
  program.constraint_values(start, g);
  if (all_negative(g)) return start;
  if (!g.allFinite()) return std::nullopt;

  PhaseOne phase_one(program);
  Vector w(n + 1);
  w.head(n) = start;
  w(n) = g.maxCoeff() + 1.0;
  BarrierOptions options;
  options.stop = [n](const Vector& v) { return v(n) < 0.0; };
  const BarrierResult res = solve_barrier(phase_one, w, options);
  Vector z = res.z.head(n);
  program.constraint_values(z, g);
  if (all_negative(g)) return z;
  return std::nullopt;
}

}  // namespace dirrac::detail
