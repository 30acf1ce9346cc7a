#include "dirrac/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dirrac/parallel.hpp"

namespace dirrac {
namespace {

void draw_class(const Eigen::Vector2d& mu, const Eigen::Matrix2d& sigma, int n, int label,
                std::mt19937_64& rng, LabeledDataset& out, Eigen::Index offset) {
  const Eigen::Matrix2d chol = sigma.llt().matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d z;
    z(0) = normal(rng);
    z(1) = normal(rng);
    out.features.row(offset + i) = (mu + chol * z).transpose();
    out.labels[static_cast<std::size_t>(offset + i)] = label;
  }
}

LabeledDataset draw(const SyntheticConfig& c, const Eigen::Vector2d& mu0, const Eigen::Matrix2d& sigma0,
                    std::uint64_t seed) {
  LabeledDataset out;
  out.features.resize(2 * c.n_per_class, 2);
  out.labels.resize(static_cast<std::size_t>(2 * c.n_per_class));
  std::mt19937_64 rng(seed);
  draw_class(mu0, sigma0, c.n_per_class, 0, rng, out, 0);
  draw_class(c.mu1, c.sigma1, c.n_per_class, 1, rng, out, c.n_per_class);
  return out;
}

bool positive_definite(const Eigen::Matrix2d& m) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10) return false;
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(m).eigenvalues().minCoeff() > 0.0;
}

}  // namespace

std::string_view to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::kMean: return "mean";
    case ShiftKind::kCov: return "cov";
    case ShiftKind::kBoth: return "both";
  }
  return "?";
}

ShiftKind parse_shift_kind(std::string_view text) {
  if (text == "mean") return ShiftKind::kMean;
  if (text == "cov") return ShiftKind::kCov;
  if (text == "both") return ShiftKind::kBoth;
  throw Error(ErrorCode::kInvalidArgument, "unknown shift kind '" + std::string(text) + "' (mean|cov|both)");
}

std::string_view to_string(M2Mode mode) {
  return mode == M2Mode::kShiftedOnly ? "shifted-only" : "concat";
}

M2Mode parse_m2_mode(std::string_view text) {
  if (text == "shifted-only") return M2Mode::kShiftedOnly;
  if (text == "concat") return M2Mode::kConcat;
  throw Error(ErrorCode::kInvalidArgument, "unknown m2 mode '" + std::string(text) + "' (shifted-only|concat)");
}

void validate(const SyntheticConfig& config) {
  if (config.n_per_class < 10) throw Error(ErrorCode::kInvalidArgument, "n_per_class must be at least 10");
  if (config.n_shifts < 0) throw Error(ErrorCode::kInvalidArgument, "n_shifts must be nonnegative");
  if (!positive_definite(config.sigma0) || !positive_definite(config.sigma1)) {
    throw Error(ErrorCode::kNotPositiveDefinite, "class covariances must be symmetric positive definite");
  }
  if (!config.mu0.allFinite() || !config.mu1.allFinite() || !std::isfinite(config.mu_adapt) ||
      !std::isfinite(config.cov_adapt)) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic parameters must be finite");
  }
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  validate(config);
  SyntheticData data;
  data.original = draw(config, config.mu0, config.sigma0, derive_seed(config.seed, 0));
  for (int i = 1; i <= config.n_shifts; ++i) {
    Eigen::Vector2d mu0 = config.mu0;
    Eigen::Matrix2d sigma0 = config.sigma0;
    if (config.shift != ShiftKind::kCov) mu0(0) += config.mu_adapt * i;
    if (config.shift != ShiftKind::kMean) sigma0 *= 1.0 + config.cov_adapt * i;
    if (!positive_definite(sigma0)) {
      throw Error(ErrorCode::kNotPositiveDefinite, "covariance shift produced a non-PD matrix");
    }
    data.shifted.push_back(draw(config, mu0, sigma0, derive_seed(config.seed, static_cast<std::uint64_t>(i))));
  }
  return data;
}

ShiftEnsemble build_shift_ensemble(const std::vector<LabeledDataset>& shifted,
                                   const LabeledDataset& original, const EnsembleOptions& options) {
  if (shifted.empty()) throw Error(ErrorCode::kEmptyInput, "no shifted datasets");
  if (options.trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be at least 1");
  if (!(options.subsample > 0.0 && options.subsample <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ensemble subsample must lie in (0, 1]");
  }
  ShiftEnsemble ensemble;
  ensemble.classifiers.resize(static_cast<std::size_t>(options.trials));
  parallel_for(ensemble.classifiers.size(), options.workers, [&](std::size_t t) {
    const LabeledDataset& source = shifted[t % shifted.size()];
    const auto n = static_cast<std::size_t>(source.size());
    const auto m = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(options.subsample * static_cast<double>(n))), 1, n);
    std::vector<Eigen::Index> rows(n);
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(options.seed, t));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(m);
    std::sort(rows.begin(), rows.end());
    LabeledDataset train = subset(source, rows);
    if (options.mode == M2Mode::kConcat) train = concatenate(original, train);
    ensemble.classifiers[t] = train_logistic(train, options.logistic).classifier;
  });
  return ensemble;
}

EvaluationReport evaluate(const std::vector<FeatureVector>& recourses,
                          const std::vector<FeatureVector>& instances,
                          const LinearClassifier& original, const ShiftEnsemble& ensemble) {
  const auto start = std::chrono::steady_clock::now();
  if (recourses.empty()) throw Error(ErrorCode::kEmptyInput, "no recourses to evaluate");
  if (ensemble.classifiers.empty()) throw Error(ErrorCode::kEmptyInput, "empty shift ensemble");
  if (recourses.size() != instances.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "recourses and instances differ in count");
  }
  const Eigen::Index d = original.theta.size();
  for (const auto& clf : ensemble.classifiers) {
    if (clf.theta.size() != d) throw Error(ErrorCode::kDimensionMismatch, "ensemble classifier dimension");
  }
  EvaluationReport report;
  for (std::size_t i = 0; i < recourses.size(); ++i) {
    const Vector& x = recourses[i].values();
    if (x.size() != d || instances[i].dim() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "recourse or instance dimension differs from classifier");
    }
    InstanceEvaluation row;
    row.index = i;
    row.valid_original = original.favorable(x);
    std::size_t accepted = 0;
    for (const auto& clf : ensemble.classifiers) accepted += clf.favorable(x) ? 1 : 0;
    row.shifted_validity = static_cast<double>(accepted) / static_cast<double>(ensemble.classifiers.size());
    const Vector diff = x.head(d - 1) - instances[i].values().head(d - 1);
    row.l1_cost = diff.lpNorm<1>();
    row.l2_cost = diff.norm();
    report.per_instance.push_back(row);
  }
  const double n = static_cast<double>(report.per_instance.size());
  for (const auto& row : report.per_instance) {
    report.m1_validity += row.valid_original ? 1.0 : 0.0;
    report.m2_validity += row.shifted_validity;
    report.l1_cost += row.l1_cost;
    report.l2_cost += row.l2_cost;
  }
  report.m1_validity /= n;
  report.m2_validity /= n;
  report.l1_cost /= n;
  report.l2_cost /= n;
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<RecourseOutcome> generate_recourses(const std::vector<FeatureVector>& instances,
                                                const RecourseProblem& problem_template,
                                                double delta_add, const SolverConfig& config,
                                                unsigned workers) {
  if (!(delta_add >= 0.0)) throw Error(ErrorCode::kBadBudget, "delta_add must be nonnegative");
  std::vector<RecourseOutcome> outcomes(instances.size());
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    RecourseProblem problem = problem_template;
    problem.x0 = instances[i];
    SolverConfig cfg = config;
    cfg.seed = derive_seed(config.seed, i);
    try {
      SolveReport report = solve_with_added_budget(problem, delta_add, cfg);
      outcomes[i].status = report.status;
      outcomes[i].result = std::move(report.result);
    } catch (const Error& e) {
      outcomes[i].error = std::string(to_string(e.code())) + ": " + e.what();
    }
  });
  return outcomes;
}

std::vector<std::size_t> negative_indices(const LabeledDataset& data, const LinearClassifier& clf) {
  if (clf.theta.size() != data.dim()) throw Error(ErrorCode::kDimensionMismatch, "classifier dimension");
  const Matrix x = augmented_features(data);
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!clf.favorable(x.row(i).transpose())) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<SweepRow> sweep_frontier(const std::vector<FeatureVector>& instances,
                                     const RecourseProblem& problem_template,
                                     const std::vector<double>& deltas_add, const std::vector<double>& rhos,
                                     const LinearClassifier& original, const ShiftEnsemble& ensemble,
                                     const SolverConfig& config, unsigned workers) {
  if (deltas_add.empty() || rhos.empty()) throw Error(ErrorCode::kEmptyInput, "sweep grid is empty");
  if (instances.empty()) throw Error(ErrorCode::kEmptyInput, "sweep has no instances");
  std::vector<SweepRow> rows;
  for (double delta_add : deltas_add) {
    for (double rho : rhos) {
      SweepRow row;
      row.delta_add = delta_add;
      row.rho = rho;
      RecourseProblem problem = problem_template;
      for (auto& comp : problem.belief.components) comp.radius = rho;
      std::vector<FeatureVector> found;
      std::vector<FeatureVector> origins;
      try {
        const auto outcomes = generate_recourses(instances, problem, delta_add, config, workers);
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
          if (outcomes[i].result) {
            found.push_back(outcomes[i].result->action);
            origins.push_back(instances[i]);
          } else if (row.first_error.empty()) {
            row.first_error = outcomes[i].error;
          }
        }
      } catch (const Error& e) {
        row.first_error = std::string(to_string(e.code())) + ": " + e.what();
      }
      row.solved = found.size();
      row.failed = instances.size() - found.size();
      if (!found.empty()) {
        const EvaluationReport report = evaluate(found, origins, original, ensemble);
        row.l1_cost = report.l1_cost;
        row.l2_cost = report.l2_cost;
        row.m1_validity = report.m1_validity;
        row.m2_validity = report.m2_validity;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace dirrac
