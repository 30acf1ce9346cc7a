#include "dirrac/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace dirrac {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kInvalidWeights: return "InvalidWeights";
    case ErrorCode::kBadBudget: return "BadBudget";
    case ErrorCode::kBetaOutOfRange: return "BetaOutOfRange";
    case ErrorCode::kZeroAction: return "ZeroAction";
    case ErrorCode::kInfeasibleMargin: return "InfeasibleMargin";
    case ErrorCode::kDualSolveFailed: return "DualSolveFailed";
    case ErrorCode::kDegenerateDirection: return "DegenerateDirection";
    case ErrorCode::kEmptyFeasibleSet: return "EmptyFeasibleSet";
    case ErrorCode::kMaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::kUnattainable: return "Unattainable";
    case ErrorCode::kBudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::kEmptyCluster: return "EmptyCluster";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kDegenerateScores: return "DegenerateScores";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingLabel: return "MissingLabel";
    case ErrorCode::kNonNumeric: return "NonNumeric";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

FeatureVector::FeatureVector(Vector values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature vector needs at least one feature plus the bias coordinate");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "feature vector has non-finite entries");
  }
  if (values_(values_.size() - 1) != 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "bias coordinate must equal 1");
  }
}

FeatureVector FeatureVector::from_features(const Vector& features) {
  Vector v(features.size() + 1);
  v.head(features.size()) = features;
  v(features.size()) = 1.0;
  return FeatureVector(std::move(v));
}

void validate(const LinearClassifier& clf) {
  if (clf.theta.size() == 0 || !clf.theta.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "classifier parameters must be finite");
  }
  if (clf.theta.isZero(0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "classifier parameters are all zero");
  }
}

void validate(const ComponentMoments& comp, Eigen::Index d) {
  if (comp.mean.size() != d || comp.covariance.rows() != d || comp.covariance.cols() != d) {
    std::ostringstream os;
    os << "component has mean of size " << comp.mean.size() << " and covariance "
       << comp.covariance.rows() << "x" << comp.covariance.cols() << ", expected d=" << d;
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  if (!comp.mean.allFinite() || !comp.covariance.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "component moments must be finite");
  }
  if (!(comp.radius >= 0.0) || !std::isfinite(comp.radius)) {
    throw Error(ErrorCode::kInvalidArgument, "ambiguity radius must be a finite nonnegative value");
  }
  const double scale = std::max(1.0, comp.covariance.cwiseAbs().maxCoeff());
  const double asym = (comp.covariance - comp.covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw Error(ErrorCode::kNotPositiveDefinite, "covariance is not symmetric");
  }
  const Matrix sym = 0.5 * (comp.covariance + comp.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    std::ostringstream os;
    os << "covariance has smallest eigenvalue " << eig.eigenvalues().minCoeff();
    throw Error(ErrorCode::kNotPositiveDefinite, os.str());
  }
}

void validate(const MixtureBelief& belief) {
  if (belief.components.empty()) {
    throw Error(ErrorCode::kInvalidWeights, "mixture needs at least one component");
  }
  if (belief.weights.size() != belief.components.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "number of weights differs from number of components");
  }
  double total = 0.0;
  for (double w : belief.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidWeights, "mixture weights must be nonnegative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "mixture weights sum to " << total;
    throw Error(ErrorCode::kInvalidWeights, os.str());
  }
  const Eigen::Index d = belief.dim();
  for (const auto& comp : belief.components) validate(comp, d);
}

MixtureBelief symmetrized(MixtureBelief belief) {
  for (auto& comp : belief.components) {
    comp.covariance = (0.5 * (comp.covariance + comp.covariance.transpose())).eval();
  }
  return belief;
}

bool is_gaussian(SolverMode mode) {
  return mode == SolverMode::kGaussian || mode == SolverMode::kGaussianWeightRobust ||
         mode == SolverMode::kGaussianWorstComponent;
}

std::string_view to_string(CostKind kind) { return kind == CostKind::kL1 ? "l1" : "l2"; }

std::string_view to_string(SolverMode mode) {
  switch (mode) {
    case SolverMode::kNonparametric: return "nonparametric";
    case SolverMode::kGaussian: return "gaussian";
    case SolverMode::kWeightRobust: return "weight_robust";
    case SolverMode::kWorstComponent: return "worst_component";
    case SolverMode::kGaussianWeightRobust: return "gaussian_weight_robust";
    case SolverMode::kGaussianWorstComponent: return "gaussian_worst_component";
  }
  return "unknown";
}

std::string_view to_string(Divergence div) { return div == Divergence::kKL ? "kl" : "chi2"; }

CostKind parse_cost(std::string_view text) {
  if (text == "l1") return CostKind::kL1;
  if (text == "l2") return CostKind::kL2;
  throw Error(ErrorCode::kInvalidArgument, "unknown cost '" + std::string(text) + "' (expected l1 or l2)");
}

SolverMode parse_mode(std::string_view text) {
  for (auto mode : {SolverMode::kNonparametric, SolverMode::kGaussian, SolverMode::kWeightRobust,
                    SolverMode::kWorstComponent, SolverMode::kGaussianWeightRobust,
                    SolverMode::kGaussianWorstComponent}) {
    if (to_string(mode) == text) return mode;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(text) + "'");
}

Divergence parse_divergence(std::string_view text) {
  if (text == "kl") return Divergence::kKL;
  if (text == "chi2") return Divergence::kChi2;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown divergence '" + std::string(text) + "' (expected kl or chi2)");
}

namespace {

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

RecourseProblem validate_problem(const RecourseProblem& problem) {
  RecourseProblem out = problem;
  const Eigen::Index d = problem.x0.dim();
  if (problem.belief.dim() != d) {
    std::ostringstream os;
    os << "instance has dimension " << d << " but belief has dimension " << problem.belief.dim();
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  validate(problem.belief);
  out.belief = symmetrized(problem.belief);

  if (!(problem.delta >= 0.0) || !std::isfinite(problem.delta)) {
    throw Error(ErrorCode::kBadBudget, "cost budget delta must be nonnegative");
  }
  if (!(problem.margin > 0.0) || !std::isfinite(problem.margin)) {
    throw Error(ErrorCode::kBadBudget, "margin must be positive");
  }
  if (!(problem.weight_budget >= 0.0) || !std::isfinite(problem.weight_budget)) {
    throw Error(ErrorCode::kBadBudget, "weight budget must be nonnegative");
  }

  const auto check_index = [d](std::size_t i, const char* what) {
    if (i >= static_cast<std::size_t>(d)) {
      std::ostringstream os;
      os << what << " index " << i << " outside [0, " << d << ")";
      throw Error(ErrorCode::kDimensionMismatch, os.str());
    }
  };
  auto& act = out.actionability;
  for (auto i : act.immutable) check_index(i, "immutable");
  for (auto i : act.non_decreasing) check_index(i, "non-decreasing");
  for (const auto& b : act.box) {
    check_index(b.index, "box");
    if (!(b.lo <= b.hi)) throw Error(ErrorCode::kInvalidArgument, "box bound has lo > hi");
  }
  act.immutable.push_back(static_cast<std::size_t>(d - 1));
  act.immutable = sorted_unique(std::move(act.immutable));
  act.non_decreasing = sorted_unique(std::move(act.non_decreasing));
  return out;
}

}  // namespace dirrac
