#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dirrac/core.hpp"

namespace dirrac {

/// Raw features (n x (d-1), no bias column) with binary labels.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;

  Eigen::Index size() const { return features.rows(); }
  /// Dimension including the bias coordinate.
  Eigen::Index dim() const { return features.cols() + 1; }
};

/// n >= 10, labels in {0, 1} with both classes present, finite features.
void validate(const LabeledDataset& data);

/// Features with the bias column of ones appended.
Matrix augmented_features(const LabeledDataset& data);

LabeledDataset subset(const LabeledDataset& data, const std::vector<Eigen::Index>& rows);
LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b);

struct LogisticOptions {
  /// Ridge penalty (l2_reg / 2) ||theta||^2 on the non-bias coordinates,
  /// added to the mean logistic loss.
  double l2_reg = 1e-3;
  int max_epochs = 20000;
  /// Step size; 0 selects 1 / L from the loss curvature bound.
  double lr = 0.0;
  double grad_tol = 1e-6;
  /// Seeds the small random initialization.
  std::uint64_t seed = 0;
};

struct LogisticFit {
  LinearClassifier classifier;
  bool converged = false;
  int epochs = 0;
  double grad_norm = 0.0;
};

/// Full-batch accelerated gradient descent (Nesterov momentum with gradient
/// restarts) on the regularized mean logistic loss.
LogisticFit train_logistic(const LabeledDataset& data, const LogisticOptions& options = {});

struct ParameterSample {
  std::vector<LinearClassifier> thetas;
};

struct BootstrapOptions {
  int count = 100;
  /// Fraction of rows drawn without replacement for each fit.
  double subsample = 0.8;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  LogisticOptions logistic;
};

/// Retrains on independent random subsamples; fit b uses seeds derived from
/// (seed, b), so the result does not depend on the worker count.
ParameterSample bootstrap_parameters(const LabeledDataset& data, const BootstrapOptions& options);

struct MixtureFitOptions {
  int restarts = 10;
  int max_iter = 300;
  /// Diagonal jitter added to each cluster covariance.
  double jitter = 1e-4;
  std::uint64_t seed = 0;
};

/// k-means (k-means++ seeding, best of `restarts`) on the parameter vectors,
/// then per-cluster weight, mean and covariance + jitter * I. Radii are left
/// at zero. Components are ordered lexicographically by mean.
MixtureBelief fit_mixture_moments(const ParameterSample& sample, int k,
                                  const MixtureFitOptions& options = {});

/// Within-cluster sum of squares of the best k-means partition for
/// k = 1..k_max (elbow diagnostic only).
std::vector<double> elbow_wcss(const ParameterSample& sample, int k_max,
                               const MixtureFitOptions& options = {});

/// Single component centred at theta0 with covariance tau * I, for when no
/// training data is available.
MixtureBelief prior_only_belief(const Vector& theta0, double tau = 0.1, double radius = 0.0);

/// Opaque scorer returning the probability of the favorable class.
using BlackBoxModel = std::function<double(const FeatureVector&)>;

struct SurrogateOptions {
  int n_perturb = 1000;
  /// Perturbation standard deviation per feature.
  double scale = 0.3;
  /// Kernel width; 0 selects 0.75 * sqrt(number of features).
  double kernel_width = 0.0;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

/// Weighted ridge fit of (score - 1/2) on Gaussian perturbations of x0 with
/// weights exp(-||z - x0||^2 / width^2). The bias coefficient is not penalized.
LinearClassifier local_linear_surrogate(const BlackBoxModel& model, const FeatureVector& x0,
                                        const SurrogateOptions& options = {});

/// Mean and covariance (+ jitter) of `count` surrogates fitted with seeds
/// derived from options.seed, as a single-component belief.
MixtureBelief surrogate_belief(const BlackBoxModel& model, const FeatureVector& x0, int count,
                               const SurrogateOptions& options = {}, double jitter = 1e-4);

}  // namespace dirrac
