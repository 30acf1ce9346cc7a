#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dirrac/bench.hpp"
#include "dirrac/estimation.hpp"
#include "dirrac/optimizer.hpp"

namespace dirrac {

/// Everything a config file can set. Keys are flat and listed in the README.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned workers = 0;

  SolverMode mode = SolverMode::kNonparametric;
  int k = 1;
  /// One radius for every component, or one per component.
  std::vector<double> rho{0.1};
  double delta_add = 1.0;
  double margin = 1e-3;
  CostKind cost = CostKind::kL1;
  double weight_budget = 0.1;
  Divergence divergence = Divergence::kKL;
  ActionabilitySpec actionability;

  SolverConfig solver;

  std::string label = "label";
  bool normalize = false;
  int bootstrap = 100;
  double bootstrap_subsample = 0.8;
  LogisticOptions logistic;
  MixtureFitOptions mixture;

  SyntheticConfig synthetic;
  /// "mean", "cov", "both" or "all".
  std::string shift = "all";
  /// Shifts per kind; with "all" one entry per kind in mean, cov, both order.
  std::vector<int> n_shifts{33, 33, 34};
  int test_per_class = 100;

  EnsembleOptions ensemble;

  std::vector<double> sweep_delta_add{0.0, 0.5, 1.0, 2.0};
  std::vector<double> sweep_rho{0.0, 0.1, 0.2};
};

/// Applies the keys of a JSON object on top of `config`. Returns one message
/// per offending key (unknown key, wrong type, out of range); empty on success.
std::vector<std::string> apply_config(const nlohmann::json& j, RunConfig& config);

/// Entry point of the command line tool. Exit codes: 0 success, 1 usage or
/// configuration error, 2 runtime failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dirrac
