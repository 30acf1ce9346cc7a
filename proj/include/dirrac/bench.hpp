#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dirrac/core.hpp"
#include "dirrac/estimation.hpp"
#include "dirrac/optimizer.hpp"

namespace dirrac {

enum class ShiftKind { kMean, kCov, kBoth };

std::string_view to_string(ShiftKind kind);
ShiftKind parse_shift_kind(std::string_view text);

/// Two Gaussian classes in the plane. Shift i (1-based) moves the class-0
/// mean by [mu_adapt * i, 0] and/or scales the class-0 covariance by
/// (1 + cov_adapt * i).
struct SyntheticConfig {
  Eigen::Vector2d mu0{-3.0, -3.0};
  Eigen::Vector2d mu1{3.0, 3.0};
  Eigen::Matrix2d sigma0 = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d sigma1 = Eigen::Matrix2d::Identity();
  int n_per_class = 500;
  ShiftKind shift = ShiftKind::kMean;
  double mu_adapt = 0.1;
  double cov_adapt = 0.1;
  int n_shifts = 10;
  std::uint64_t seed = 0;
};

void validate(const SyntheticConfig& config);

struct SyntheticData {
  LabeledDataset original;
  std::vector<LabeledDataset> shifted;
};

/// Rows are class 0 then class 1. The original draw and each shifted draw use
/// their own derived seed.
SyntheticData generate_synthetic(const SyntheticConfig& config);

enum class M2Mode { kShiftedOnly, kConcat };

std::string_view to_string(M2Mode mode);
M2Mode parse_m2_mode(std::string_view text);

struct ShiftEnsemble {
  std::vector<LinearClassifier> classifiers;
};

struct EnsembleOptions {
  /// Fraction of a shifted dataset drawn (without replacement) per trial.
  double subsample = 0.2;
  int trials = 100;
  /// kConcat appends the original data to each drawn subsample.
  M2Mode mode = M2Mode::kShiftedOnly;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  LogisticOptions logistic;
};

/// Trial t trains on a random subsample of shifted[t % shifted.size()].
ShiftEnsemble build_shift_ensemble(const std::vector<LabeledDataset>& shifted,
                                   const LabeledDataset& original, const EnsembleOptions& options);

struct InstanceEvaluation {
  std::size_t index = 0;
  bool valid_original = false;
  /// Fraction of the ensemble accepting the recourse.
  double shifted_validity = 0.0;
  double l1_cost = 0.0;
  double l2_cost = 0.0;
};

struct EvaluationReport {
  double m1_validity = 0.0;
  double m2_validity = 0.0;
  double l1_cost = 0.0;
  double l2_cost = 0.0;
  std::vector<InstanceEvaluation> per_instance;
  double runtime_seconds = 0.0;
};

/// M1: fraction of recourses accepted by the original classifier.
/// M2: mean over instances of the fraction of ensemble members accepting the
/// recourse. Costs exclude the bias coordinate.
EvaluationReport evaluate(const std::vector<FeatureVector>& recourses,
                          const std::vector<FeatureVector>& instances,
                          const LinearClassifier& original, const ShiftEnsemble& ensemble);

struct RecourseOutcome {
  std::optional<RecourseResult> result;
  DescentStatus status = DescentStatus::kMaxIter;
  std::string error;
};

/// Solves every instance against the template problem (its x0 and delta are
/// replaced) with delta = delta_min + delta_add. Failures are recorded per
/// instance. Instance i uses solver seed derive_seed(config.seed, i).
std::vector<RecourseOutcome> generate_recourses(const std::vector<FeatureVector>& instances,
                                                const RecourseProblem& problem_template,
                                                double delta_add, const SolverConfig& config,
                                                unsigned workers = 0);

/// Instances the classifier rejects (theta^T x < 0).
std::vector<std::size_t> negative_indices(const LabeledDataset& data, const LinearClassifier& clf);

struct SweepRow {
  double delta_add = 0.0;
  double rho = 0.0;
  std::size_t solved = 0;
  std::size_t failed = 0;
  double l1_cost = 0.0;
  double l2_cost = 0.0;
  double m1_validity = 0.0;
  double m2_validity = 0.0;
  std::string first_error;
};

/// One row per (delta_add, rho) pair, rho varying fastest. Every component
/// radius is set to rho. Metrics cover the solved instances only.
std::vector<SweepRow> sweep_frontier(const std::vector<FeatureVector>& instances,
                                     const RecourseProblem& problem_template,
                                     const std::vector<double>& deltas_add, const std::vector<double>& rhos,
                                     const LinearClassifier& original, const ShiftEnsemble& ensemble,
                                     const SolverConfig& config, unsigned workers = 0);

}  // namespace dirrac
