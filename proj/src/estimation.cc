#include "dirrac/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "dirrac/parallel.hpp"

namespace dirrac {
namespace {

Vector sigmoid(const Vector& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix stack(const ParameterSample& sample) {
  if (sample.thetas.empty()) throw Error(ErrorCode::kTooFewSamples, "empty parameter sample");
  const Eigen::Index d = sample.thetas.front().theta.size();
  Matrix points(static_cast<Eigen::Index>(sample.thetas.size()), d);
  for (std::size_t i = 0; i < sample.thetas.size(); ++i) {
    if (sample.thetas[i].theta.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "parameter sample mixes dimensions");
    }
    points.row(static_cast<Eigen::Index>(i)) = sample.thetas[i].theta.transpose();
  }
  return points;
}

struct Partition {
  std::vector<int> labels;
  Matrix centers;
  double wcss = std::numeric_limits<double>::infinity();
};

double assign(const Matrix& points, const Matrix& centers, std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < centers.rows(); ++k) {
      const double dist = (points.row(i) - centers.row(k)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = static_cast<int>(k);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    total += best_d;
  }
  return total;
}

// One k-means run; returns an empty partition if some cluster cannot be kept
// nonempty (fewer distinct points than clusters).
Partition lloyd(const Matrix& points, int k, std::mt19937_64& rng, int max_iter) {
  const Eigen::Index n = points.rows();
  Matrix centers(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  Vector nearest = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        target -= nearest(chosen);
        if (target <= 0.0) break;
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = points.row(chosen);
    nearest = nearest.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  Partition part;
  part.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> previous;
  for (int it = 0; it < max_iter; ++it) {
    assign(points, centers, part.labels);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : part.labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      // Move the empty center onto the point farthest from its own center.
      Eigen::Index far = -1;
      double far_d = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = part.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(l)] <= 1) continue;
        const double dist = (points.row(i) - centers.row(l)).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      if (far < 0) return {};
      --counts[static_cast<std::size_t>(part.labels[static_cast<std::size_t>(far)])];
      part.labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
    }
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(part.labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < k; ++c) centers.row(c) /= counts[static_cast<std::size_t>(c)];
    if (part.labels == previous) break;
    previous = part.labels;
  }
  part.wcss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    part.wcss += (points.row(i) - centers.row(part.labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  part.centers = std::move(centers);
  return part;
}

Partition best_partition(const Matrix& points, int k, const MixtureFitOptions& options) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "number of components must be at least 1");
  if (points.rows() < k) {
    std::ostringstream os;
    os << points.rows() << " parameter samples cannot form " << k << " clusters";
    throw Error(ErrorCode::kTooFewSamples, os.str());
  }
  Partition best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
    Partition part = lloyd(points, k, rng, options.max_iter);
    if (!part.labels.empty() && part.wcss < best.wcss) best = std::move(part);
  }
  if (best.labels.empty()) {
    throw Error(ErrorCode::kEmptyCluster, "k-means left a cluster empty on every restart");
  }
  return best;
}

Matrix sample_covariance(const Matrix& rows, const Vector& mean) {
  const Matrix centered = rows.rowwise() - mean.transpose();
  const double denom = rows.rows() > 1 ? static_cast<double>(rows.rows() - 1) : 1.0;
  return (centered.transpose() * centered) / denom;
}

}  // namespace

void validate(const LabeledDataset& data) {
  if (static_cast<std::size_t>(data.features.rows()) != data.labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature rows and labels differ in count");
  }
  if (data.features.cols() < 1) throw Error(ErrorCode::kDimensionMismatch, "dataset has no features");
  if (data.size() < 10) {
    std::ostringstream os;
    os << "dataset has " << data.size() << " rows; at least 10 are required";
    throw Error(ErrorCode::kTooFewSamples, os.str());
  }
  if (!data.features.allFinite()) throw Error(ErrorCode::kNonNumeric, "dataset has non-finite features");
  bool seen[2] = {false, false};
  for (int y : data.labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    seen[y] = true;
  }
  if (!seen[0] || !seen[1]) throw Error(ErrorCode::kInvalidArgument, "dataset must contain both classes");
}

Matrix augmented_features(const LabeledDataset& data) {
  Matrix x(data.features.rows(), data.features.cols() + 1);
  x.leftCols(data.features.cols()) = data.features;
  x.col(data.features.cols()).setOnes();
  return x;
}

LabeledDataset subset(const LabeledDataset& data, const std::vector<Eigen::Index>& rows) {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
    out.labels.push_back(data.labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.features.cols() != b.features.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "datasets differ in feature count");
  }
  LabeledDataset out;
  out.features.resize(a.size() + b.size(), a.features.cols());
  out.features << a.features, b.features;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

LogisticFit train_logistic(const LabeledDataset& data, const LogisticOptions& options) {
  validate(data);
  if (!(options.l2_reg >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "l2_reg must be nonnegative");
  const Matrix x = augmented_features(data);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = data.labels[static_cast<std::size_t>(i)];
  Vector penalized = Vector::Ones(d);
  penalized(d - 1) = 0.0;

  const auto gradient = [&](const Vector& theta) {
    Vector g = x.transpose() * (sigmoid(x * theta) - y) / static_cast<double>(n);
    g += options.l2_reg * penalized.cwiseProduct(theta);
    return g;
  };

  double lr = options.lr;
  if (lr <= 0.0) {
    const Matrix gram = x.transpose() * x / static_cast<double>(n);
    const double top = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    lr = 1.0 / (0.25 * top + options.l2_reg);
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> init(0.0, 1e-3);
  Vector theta(d);
  for (Eigen::Index i = 0; i < d; ++i) theta(i) = init(rng);

  LogisticFit fit;
  Vector previous = theta;
  Vector best = theta;
  double best_norm = std::numeric_limits<double>::infinity();
  double momentum_t = 1.0;
  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    const double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
    const Vector lookahead = theta + ((momentum_t - 1.0) / next_t) * (theta - previous);
    const Vector g = gradient(lookahead);
    Vector updated = lookahead - lr * g;
    if (g.dot(updated - theta) > 0.0) {
      // Momentum points uphill: restart from a plain gradient step.
      updated = theta - lr * gradient(theta);
      momentum_t = 1.0;
    } else {
      momentum_t = next_t;
    }
    previous = std::move(theta);
    theta = std::move(updated);
    fit.epochs = epoch + 1;
    const double norm = gradient(theta).norm();
    if (norm < best_norm) {
      best_norm = norm;
      best = theta;
    }
    if (norm <= options.grad_tol) {
      fit.converged = true;
      break;
    }
  }
  fit.classifier.theta = std::move(best);
  fit.grad_norm = best_norm;
  return fit;
}

ParameterSample bootstrap_parameters(const LabeledDataset& data, const BootstrapOptions& options) {
  if (options.count < 2) throw Error(ErrorCode::kTooFewSamples, "bootstrap needs at least 2 fits");
  if (!(options.subsample > 0.0 && options.subsample <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "subsample fraction must lie in (0, 1]");
  }
  validate(data);
  const auto n = static_cast<std::size_t>(data.size());
  const auto m = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(options.subsample * static_cast<double>(n))), 1, n);
  ParameterSample sample;
  sample.thetas.resize(static_cast<std::size_t>(options.count));
  parallel_for(sample.thetas.size(), options.workers, [&](std::size_t b) {
    std::vector<Eigen::Index> rows(n);
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    if (m < n) {
      std::mt19937_64 rng(derive_seed(options.seed, b));
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(m);
      std::sort(rows.begin(), rows.end());
    }
    sample.thetas[b] = train_logistic(subset(data, rows), options.logistic).classifier;
  });
  return sample;
}

MixtureBelief fit_mixture_moments(const ParameterSample& sample, int k, const MixtureFitOptions& options) {
  if (!(options.jitter > 0.0)) throw Error(ErrorCode::kInvalidArgument, "covariance jitter must be positive");
  const Matrix points = stack(sample);
  if (points.rows() < 2) throw Error(ErrorCode::kTooFewSamples, "need at least 2 parameter samples");
  const Partition part = best_partition(points, k, options);
  const Eigen::Index d = points.cols();

  std::vector<std::pair<ComponentMoments, double>> clusters;
  for (int c = 0; c < k; ++c) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (part.labels[static_cast<std::size_t>(i)] == c) members.push_back(i);
    }
    Matrix rows(static_cast<Eigen::Index>(members.size()), d);
    for (std::size_t j = 0; j < members.size(); ++j) rows.row(static_cast<Eigen::Index>(j)) = points.row(members[j]);
    const Vector mean = rows.colwise().mean().transpose();
    Matrix cov = sample_covariance(rows, mean);
    cov.diagonal().array() += options.jitter;
    clusters.push_back({{mean, cov, 0.0},
                        static_cast<double>(members.size()) / static_cast<double>(points.rows())});
  }
  std::sort(clusters.begin(), clusters.end(), [](const auto& l, const auto& r) {
    return std::lexicographical_compare(l.first.mean.begin(), l.first.mean.end(), r.first.mean.begin(),
                                        r.first.mean.end());
  });
  MixtureBelief belief;
  for (auto& [comp, weight] : clusters) {
    belief.components.push_back(std::move(comp));
    belief.weights.push_back(weight);
  }
  validate(belief);
  return belief;
}

std::vector<double> elbow_wcss(const ParameterSample& sample, int k_max, const MixtureFitOptions& options) {
  const Matrix points = stack(sample);
  std::vector<double> out;
  for (int k = 1; k <= std::min<Eigen::Index>(k_max, points.rows()); ++k) {
    out.push_back(best_partition(points, k, options).wcss);
  }
  return out;
}

MixtureBelief prior_only_belief(const Vector& theta0, double tau, double radius) {
  MixtureBelief belief;
  belief.components.push_back({theta0, tau * Matrix::Identity(theta0.size(), theta0.size()), radius});
  belief.weights = {1.0};
  validate(belief);
  return belief;
}

LinearClassifier local_linear_surrogate(const BlackBoxModel& model, const FeatureVector& x0,
                                        const SurrogateOptions& options) {
  if (options.n_perturb < 50) throw Error(ErrorCode::kInvalidArgument, "n_perturb must be at least 50");
  if (!(options.scale > 0.0) || !(options.ridge >= 0.0) || !(options.kernel_width >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "surrogate scale, ridge and kernel width must be valid");
  }
  const Eigen::Index d = x0.dim();
  const double width =
      options.kernel_width > 0.0 ? options.kernel_width : 0.75 * std::sqrt(static_cast<double>(d - 1));
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, options.scale);

  Matrix z(options.n_perturb, d);
  Vector target(options.n_perturb);
  Vector weight(options.n_perturb);
  for (int i = 0; i < options.n_perturb; ++i) {
    Vector point = x0.values();
    for (Eigen::Index j = 0; j + 1 < d; ++j) point(j) += noise(rng);
    const double score = model(FeatureVector(point));
    if (!(score >= 0.0 && score <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "black-box score outside [0, 1]");
    }
    z.row(i) = point.transpose();
    target(i) = score - 0.5;
    weight(i) = std::exp(-(point - x0.values()).squaredNorm() / (width * width));
  }
  if (target.maxCoeff() - target.minCoeff() <= 1e-12) {
    throw Error(ErrorCode::kDegenerateScores, "model is constant on every perturbation");
  }
  Matrix normal = z.transpose() * weight.asDiagonal() * z;
  normal.diagonal().head(d - 1).array() += options.ridge;
  const Vector rhs = z.transpose() * weight.cwiseProduct(target);
  return {normal.ldlt().solve(rhs)};
}

MixtureBelief surrogate_belief(const BlackBoxModel& model, const FeatureVector& x0, int count,
                               const SurrogateOptions& options, double jitter) {
  if (count < 2) throw Error(ErrorCode::kTooFewSamples, "need at least 2 surrogate fits");
  Matrix rows(count, x0.dim());
  for (int i = 0; i < count; ++i) {
    SurrogateOptions opt = options;
    opt.seed = derive_seed(options.seed, static_cast<std::uint64_t>(i));
    rows.row(i) = local_linear_surrogate(model, x0, opt).theta.transpose();
  }
  const Vector mean = rows.colwise().mean().transpose();
  Matrix cov = sample_covariance(rows, mean);
  cov.diagonal().array() += jitter;
  MixtureBelief belief;
  belief.components.push_back({mean, cov, 0.0});
  belief.weights = {1.0};
  validate(belief);
  return belief;
}

}  // namespace dirrac
