#include <algorithm>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "dirrac/estimation.hpp"

using namespace dirrac;
using testing::vec;

namespace {

LabeledDataset blobs(int per_class, std::uint64_t seed, double spread = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, spread);
  LabeledDataset d;
  d.features.resize(2 * per_class, 2);
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i < per_class ? 0 : 1;
    const double c = label ? 3.0 : -3.0;
    d.features(i, 0) = c + n(rng);
    d.features(i, 1) = c + n(rng);
    d.labels.push_back(label);
  }
  return d;
}

double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

double accuracy(const LinearClassifier& clf, const LabeledDataset& d) {
  const Matrix x = augmented_features(d);
  int hit = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) hit += (clf.favorable(x.row(i).transpose()) ? 1 : 0) == d.labels[i];
  return static_cast<double>(hit) / static_cast<double>(d.size());
}

ParameterSample cloud(const std::vector<std::pair<Vector, int>>& centers, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, spread);
  ParameterSample s;
  for (const auto& [center, count] : centers) {
    for (int i = 0; i < count; ++i) {
      Vector t = center;
      for (Eigen::Index j = 0; j < t.size(); ++j) t(j) += n(rng);
      s.thetas.push_back({t});
    }
  }
  return s;
}

}  // namespace

TEST_CASE("logistic regression on separated blobs") {
  const LabeledDataset d = blobs(500, 1);
  const LogisticFit fit = train_logistic(d);
  CHECK(accuracy(fit.classifier, d) >= 0.99);
  CHECK(fit.classifier.theta.size() == 3);

  LabeledDataset flipped = d;
  for (int& y : flipped.labels) y = 1 - y;
  const LogisticFit back = train_logistic(flipped);
  CHECK(cosine(back.classifier.theta, fit.classifier.theta) <= -0.99);
}

TEST_CASE("logistic boundary bisects two repeated points") {
  LabeledDataset d;
  d.features.resize(20, 2);
  for (int i = 0; i < 20; ++i) {
    d.features(i, 0) = i < 10 ? -1.0 : 3.0;
    d.features(i, 1) = 0.0;
    d.labels.push_back(i < 10 ? 0 : 1);
  }
  const LogisticFit fit = train_logistic(d);
  CHECK(std::abs(fit.classifier.theta.dot(vec({1.0, 0.0, 1.0}))) <= 1e-3);
}

TEST_CASE("logistic input errors") {
  LabeledDataset small = blobs(4, 2);
  CHECK_ERROR_CODE(train_logistic(small), ErrorCode::kTooFewSamples);
  LabeledDataset one_class = blobs(10, 3);
  std::fill(one_class.labels.begin(), one_class.labels.end(), 1);
  CHECK_THROWS_AS(train_logistic(one_class), Error);
}

TEST_CASE("bootstrap parameters") {
  const LabeledDataset d = blobs(500, 4);
  const Vector full = train_logistic(d).classifier.theta;
  BootstrapOptions opt;
  opt.count = 100;
  opt.seed = 11;
  opt.workers = 1;
  const ParameterSample s = bootstrap_parameters(d, opt);
  REQUIRE(s.thetas.size() == 100);
  Vector mean = Vector::Zero(3);
  for (const auto& t : s.thetas) mean += t.theta / 100.0;
  CHECK(cosine(mean, full) >= 0.99);

  opt.count = 2;
  opt.subsample = 1.0;
  const ParameterSample twins = bootstrap_parameters(d, opt);
  CHECK(twins.thetas[0].theta == twins.thetas[1].theta);

  opt.count = 0;
  CHECK_THROWS_AS(bootstrap_parameters(d, opt), Error);

  // Worker count does not change the result.
  opt.count = 6;
  opt.subsample = 0.8;
  opt.workers = 1;
  const ParameterSample serial = bootstrap_parameters(d, opt);
  opt.workers = 3;
  const ParameterSample threaded = bootstrap_parameters(d, opt);
  for (int i = 0; i < 6; ++i) CHECK(serial.thetas[i].theta == threaded.thetas[i].theta);
}

TEST_CASE("mixture moments from parameter samples") {
  const ParameterSample one = cloud({{vec({1, 2, 0}), 50}}, 0.2, 5);
  const MixtureBelief b1 = fit_mixture_moments(one, 1);
  REQUIRE(b1.size() == 1);
  Vector mean = Vector::Zero(3);
  for (const auto& t : one.thetas) mean += t.theta / 50.0;
  Matrix cov = Matrix::Zero(3, 3);
  for (const auto& t : one.thetas) cov += (t.theta - mean) * (t.theta - mean).transpose() / 49.0;
  CHECK((b1.components[0].mean - mean).norm() <= 1e-12);
  CHECK((b1.components[0].covariance - cov - 1e-4 * Matrix::Identity(3, 3)).norm() <= 1e-12);
  CHECK(b1.weights[0] == 1.0);

  const ParameterSample two = cloud({{vec({1, 1, 0}), 60}, {vec({-2, 3, 1}), 40}}, 0.1, 6);
  const MixtureBelief b2 = fit_mixture_moments(two, 2);
  validate(b2);
  REQUIRE(b2.size() == 2);
  // Components come back sorted by mean, so the (-2, 3, 1) cloud is first.
  CHECK((b2.components[0].mean - vec({-2, 3, 1})).norm() <= 0.1);
  CHECK((b2.components[1].mean - vec({1, 1, 0})).norm() <= 0.1);
  CHECK(std::abs(b2.weights[0] - 0.4) <= 0.05);
  CHECK(std::abs(b2.weights[1] - 0.6) <= 0.05);

  ParameterSample same;
  for (int i = 0; i < 10; ++i) same.thetas.push_back({vec({0.5, -1, 2})});
  const MixtureBelief b3 = fit_mixture_moments(same, 1);
  CHECK(b3.components[0].covariance == 1e-4 * Matrix::Identity(3, 3));

  CHECK_ERROR_CODE(fit_mixture_moments(two, 0), ErrorCode::kInvalidArgument);
  ParameterSample tiny;
  tiny.thetas.push_back({vec({1, 1})});
  CHECK_ERROR_CODE(fit_mixture_moments(tiny, 1), ErrorCode::kTooFewSamples);
}

TEST_CASE("mixture fit ignores sample order") {
  ParameterSample s = cloud({{vec({1, 1, 0}), 30}, {vec({-1, 2, 0.5}), 30}, {vec({0, -2, 0}), 20}}, 0.15, 8);
  const MixtureBelief a = fit_mixture_moments(s, 3);
  std::mt19937_64 rng(1);
  std::shuffle(s.thetas.begin(), s.thetas.end(), rng);
  const MixtureBelief b = fit_mixture_moments(s, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK((a.components[k].mean - b.components[k].mean).norm() <= 1e-12);
    CHECK((a.components[k].covariance - b.components[k].covariance).norm() <= 1e-12);
    CHECK(std::abs(a.weights[k] - b.weights[k]) <= 1e-15);
  }
}

TEST_CASE("elbow diagnostic decreases with K") {
  const ParameterSample s = cloud({{vec({1, 1}), 30}, {vec({-1, 2}), 30}}, 0.1, 9);
  const std::vector<double> w = elbow_wcss(s, 4);
  REQUIRE(w.size() == 4);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] <= w[i - 1] + 1e-12);
  CHECK(w[1] < 0.1 * w[0]);
}

TEST_CASE("local linear surrogate") {
  const Vector theta = vec({2.0, -1.0, 0.5});
  const BlackBoxModel linear = [&](const FeatureVector& x) { return 1.0 / (1.0 + std::exp(-theta.dot(x.values()))); };
  const FeatureVector x0(vec({0.3, 0.4, 1.0}));
  SurrogateOptions opt;
  opt.seed = 3;
  const LinearClassifier s = local_linear_surrogate(linear, x0, opt);
  // The bias is fit freely, so compare the actionable directions.
  CHECK(cosine(s.theta.head(2), theta.head(2)) >= 0.99);
  CHECK(local_linear_surrogate(linear, x0, opt).theta == s.theta);

  const BlackBoxModel constant = [](const FeatureVector&) { return 0.3; };
  CHECK_ERROR_CODE(local_linear_surrogate(constant, x0, opt), ErrorCode::kDegenerateScores);

  const BlackBoxModel out_of_range = [](const FeatureVector& x) { return x.values()(0) * 5; };
  CHECK_ERROR_CODE(local_linear_surrogate(out_of_range, x0, opt), ErrorCode::kInvalidArgument);

  // More perturbations never hurt the recovered direction on average.
  double small = 0;
  double large = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    opt.seed = seed;
    opt.n_perturb = 200;
    small += cosine(local_linear_surrogate(linear, x0, opt).theta.head(2), theta.head(2));
    opt.n_perturb = 2000;
    large += cosine(local_linear_surrogate(linear, x0, opt).theta.head(2), theta.head(2));
  }
  CHECK(large >= small - 1e-12);

  const MixtureBelief b = surrogate_belief(linear, x0, 10, opt);
  validate(b);
  CHECK(b.size() == 1);
}

TEST_CASE("prior-only belief") {
  const MixtureBelief b = prior_only_belief(vec({1, 2, -0.5}));
  validate(b);
  CHECK(b.components[0].covariance == 0.1 * Matrix::Identity(3, 3));
  CHECK(b.components[0].mean == vec({1, 2, -0.5}));
  CHECK(b.weights == std::vector<double>{1.0});
}
