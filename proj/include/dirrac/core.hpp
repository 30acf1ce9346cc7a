#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dirrac {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  kDimensionMismatch,
  kNotPositiveDefinite,
  kInvalidWeights,
  kBadBudget,
  kBetaOutOfRange,
  kZeroAction,
  kInfeasibleMargin,
  kDualSolveFailed,
  kDegenerateDirection,
  kEmptyFeasibleSet,
  kMaxIterExceeded,
  kUnattainable,
  kBudgetTooSmall,
  kEmptyCluster,
  kTooFewSamples,
  kDegenerateScores,
  kParseError,
  kMissingLabel,
  kNonNumeric,
  kEmptyInput,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the solver, the sweep driver, the CLI) can branch on the cause.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A point in covariate space with the constant bias coordinate appended last.
class FeatureVector {
 public:
  /// Takes the full augmented vector; the last entry must be exactly 1.
  explicit FeatureVector(Vector values);

  /// Appends the bias coordinate to raw features.
  static FeatureVector from_features(const Vector& features);

  const Vector& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }
  Eigen::Index bias_index() const noexcept { return values_.size() - 1; }
  /// Raw features without the bias coordinate.
  Vector features() const { return values_.head(values_.size() - 1); }

 private:
  Vector values_;
};

/// Decision rule: favorable (1) iff theta^T x >= 0.
struct LinearClassifier {
  Vector theta;

  bool favorable(const Vector& x) const { return theta.dot(x) >= 0.0; }
};

void validate(const LinearClassifier& clf);

struct ComponentMoments {
  Vector mean;
  Matrix covariance;
  double radius = 0.0;
};

struct MixtureBelief {
  std::vector<ComponentMoments> components;
  std::vector<double> weights;

  std::size_t size() const noexcept { return components.size(); }
  Eigen::Index dim() const { return components.empty() ? 0 : components.front().mean.size(); }
};

/// Checks symmetry (1e-10), positive definiteness of the symmetric part,
/// nonnegative radius and consistent dimension d.
void validate(const ComponentMoments& comp, Eigen::Index d);
void validate(const MixtureBelief& belief);

/// Returns the belief with every covariance replaced by its symmetric part.
MixtureBelief symmetrized(MixtureBelief belief);

struct BoxBound {
  std::size_t index;
  double lo;
  double hi;
};

struct ActionabilitySpec {
  std::vector<std::size_t> immutable;
  std::vector<std::size_t> non_decreasing;
  std::vector<BoxBound> box;
};

enum class CostKind { kL1, kL2 };

enum class SolverMode {
  kNonparametric,
  kGaussian,
  kWeightRobust,
  kWorstComponent,
  kGaussianWeightRobust,
  kGaussianWorstComponent,
};

enum class Divergence { kKL, kChi2 };

bool is_gaussian(SolverMode mode);

std::string_view to_string(CostKind kind);
std::string_view to_string(SolverMode mode);
std::string_view to_string(Divergence div);
CostKind parse_cost(std::string_view text);
SolverMode parse_mode(std::string_view text);
Divergence parse_divergence(std::string_view text);

struct RecourseProblem {
  FeatureVector x0;
  MixtureBelief belief;
  double delta = 0.0;
  double margin = 1e-3;
  CostKind cost = CostKind::kL1;
  ActionabilitySpec actionability;
  SolverMode mode = SolverMode::kNonparametric;
  double weight_budget = 0.0;
  Divergence divergence = Divergence::kKL;
};

struct RecourseResult {
  FeatureVector action;
  double objective = 1.0;
  std::vector<double> component_probs;
  int iterations = 0;
  double stationarity = 0.0;
  double delta_min = 0.0;
  bool converged = false;
};

/// Checks every invariant of the problem and its belief. The returned copy has
/// symmetrized covariances and the bias coordinate added to the immutable set.
RecourseProblem validate_problem(const RecourseProblem& problem);

}  // namespace dirrac
