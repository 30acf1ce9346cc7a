#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "dirrac/bench.hpp"
#include "dirrac/cli.hpp"
#include "dirrac/io.hpp"

using namespace dirrac;
using testing::vec;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dirrac_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "dirrac");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

Vector column_mean(const LabeledDataset& d, int label) {
  Vector sum = Vector::Zero(d.features.cols());
  int n = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.labels[static_cast<std::size_t>(i)] != label) continue;
    sum += d.features.row(i).transpose();
    ++n;
  }
  return sum / n;
}

FeatureVector fv(std::initializer_list<double> xs) { return FeatureVector(vec(xs)); }

// Small end-to-end setup shared by the sweep tests: K = 1 bootstrap belief,
// a shift ensemble and the rejected test instances.
struct MiniPipeline {
  LinearClassifier original;
  MixtureBelief belief;
  ShiftEnsemble ensemble;
  std::vector<FeatureVector> instances;
};

MiniPipeline mini_pipeline(std::size_t count) {
  MiniPipeline m;
  SyntheticConfig sc;
  sc.n_shifts = 4;
  sc.shift = ShiftKind::kBoth;
  sc.seed = 1;
  const SyntheticData data = generate_synthetic(sc);
  m.original = train_logistic(data.original).classifier;
  BootstrapOptions bo;
  bo.count = 20;
  bo.seed = 2;
  bo.workers = 1;
  m.belief = fit_mixture_moments(bootstrap_parameters(data.original, bo), 1);
  m.belief.components[0].radius = 0.1;
  EnsembleOptions eo;
  eo.trials = 20;
  eo.seed = 3;
  eo.workers = 1;
  m.ensemble = build_shift_ensemble(data.shifted, data.original, eo);
  SyntheticConfig tc = sc;
  tc.n_shifts = 0;
  tc.seed = 4;
  const LabeledDataset test = generate_synthetic(tc).original;
  const Matrix x = augmented_features(test);
  for (std::size_t i : negative_indices(test, m.original)) {
    if (m.instances.size() == count) break;
    m.instances.emplace_back(Vector(x.row(static_cast<Eigen::Index>(i)).transpose()));
  }
  return m;
}

}  // namespace

TEST_CASE("synthetic shifts") {
  SyntheticConfig c;
  c.n_shifts = 2;
  c.seed = 5;
  const SyntheticData d = generate_synthetic(c);
  REQUIRE(d.shifted.size() == 2);
  CHECK(d.original.size() == 1000);
  const double tol = 3.0 / std::sqrt(500.0);
  const Vector m0 = column_mean(d.shifted[0], 0);
  CHECK(std::abs(m0(0) - (-2.9)) <= tol);
  CHECK(std::abs(m0(1) - (-3.0)) <= tol);
  const Vector m1 = column_mean(d.shifted[0], 1);
  CHECK(std::abs(m1(0) - 3.0) <= tol);

  const SyntheticData again = generate_synthetic(c);
  CHECK(dataset_csv(again.shifted[1]) == dataset_csv(d.shifted[1]));
  CHECK(dataset_csv(again.original) == dataset_csv(d.original));

  // No adaptation: each shifted set is another draw from the original law.
  c.mu_adapt = 0;
  c.cov_adapt = 0;
  c.shift = ShiftKind::kBoth;
  const SyntheticData still = generate_synthetic(c);
  CHECK((column_mean(still.shifted[1], 0) - vec({-3, -3})).norm() <= 2 * tol);

  c.n_per_class = 5;
  CHECK_THROWS_AS(validate(c), Error);
  CHECK(parse_shift_kind(to_string(ShiftKind::kCov)) == ShiftKind::kCov);
  CHECK(parse_m2_mode("concat") == M2Mode::kConcat);
}

TEST_CASE("csv ingestion") {
  const LoadedCsv toy = parse_csv("a,b,label\n1,2,0\n3,4,1\n5,6,1\n");
  CHECK(toy.data.size() == 3);
  CHECK(toy.data.dim() == 3);
  CHECK(toy.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(toy.data.labels == std::vector<int>{0, 1, 1});

  CsvLoadOptions norm;
  norm.normalize = true;
  const LoadedCsv flat = parse_csv("a,b,label\n1,7,0\n3,7,1\n5,7,1\n", norm);
  CHECK(flat.data.features.col(1).isZero(0.0));
  CHECK(flat.data.features(2, 0) == 1.0);
  CHECK(!flat.warnings.empty());

  bool thrown = false;
  try {
    parse_csv("a,b,label\n1,2,0\n3,4\n");
  } catch (const Error& e) {
    thrown = true;
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK(thrown);
  CHECK_ERROR_CODE(parse_csv("a,b,label\n1,x,0\n"), ErrorCode::kNonNumeric);
  CHECK_ERROR_CODE(parse_csv("a,b\n1,2\n"), ErrorCode::kMissingLabel);
  CHECK_ERROR_CODE(parse_csv(""), ErrorCode::kEmptyInput);
}

TEST_CASE("evaluation counts") {
  const std::vector<FeatureVector> instances{fv({0, 0, 1}), fv({-1, -1, 1})};
  const LinearClassifier original{vec({1, 0, 0})};
  const ShiftEnsemble ensemble{{{vec({1, 0, 0})}, {vec({0, 1, 0})}, {vec({-1, 0, 0})}, {vec({1, 1, 0})}}};
  const EvaluationReport r = evaluate({fv({1, 1, 1}), fv({-1, -2, 1})}, instances, original, ensemble);
  CHECK(r.m1_validity == 0.5);
  CHECK(r.m2_validity == 0.5);
  CHECK(r.per_instance[0].shifted_validity == 0.75);
  CHECK(r.per_instance[1].shifted_validity == 0.25);
  CHECK(r.per_instance[0].l1_cost == 2.0);
  CHECK(r.per_instance[1].l1_cost == 1.0);
  CHECK(r.l1_cost == 1.5);
  CHECK(r.l2_cost == doctest::Approx((std::sqrt(2.0) + 1.0) / 2).epsilon(1e-15));

  // Already favorable everywhere and unchanged.
  const ShiftEnsemble pos{{{vec({1, 0, 0})}, {vec({1, 1, 0})}}};
  const EvaluationReport same = evaluate({fv({2, 1, 1})}, {fv({2, 1, 1})}, original, pos);
  CHECK(same.m1_validity == 1.0);
  CHECK(same.m2_validity == 1.0);
  CHECK(same.l1_cost == 0.0);

  const ShiftEnsemble half{{{vec({1, 0, 0})}, {vec({-1, 0, 0})}}};
  CHECK(evaluate({fv({2, 1, 1})}, {fv({2, 1, 1})}, original, half).per_instance[0].shifted_validity == 0.5);
  CHECK_ERROR_CODE(evaluate({}, {}, original, half), ErrorCode::kEmptyInput);
}

TEST_CASE("serialization round trips") {
  MixtureBelief b{{{vec({1, 2, 0.5}), Matrix::Identity(3, 3) * 0.3, 0.1}, {vec({-1, 0.25, 3}), Matrix::Identity(3, 3), 0}},
                  {0.25, 0.75}};
  b.components[0].covariance(0, 2) = b.components[0].covariance(2, 0) = 0.05;
  const MixtureBelief back = belief_from_json(nlohmann::json::parse(to_json(b).dump()));
  CHECK(back.weights == b.weights);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back.components[k].mean == b.components[k].mean);
    CHECK(back.components[k].covariance == b.components[k].covariance);
    CHECK(back.components[k].radius == b.components[k].radius);
  }

  const ClassifierFile cf{{vec({0.1, -0.2, 0.3})}, Normalization{vec({1, 2}), vec({3, 4})}};
  const ClassifierFile cf2 = classifier_from_json(nlohmann::json::parse(to_json(cf).dump()));
  CHECK(cf2.classifier.theta == cf.classifier.theta);
  REQUIRE(cf2.normalization.has_value());
  CHECK(cf2.normalization->invert(cf2.normalization->apply(vec({5, 6}))) == vec({5, 6}));

  RecourseResult res{FeatureVector(vec({0.5, 0.25, 1})), 0.125, {0.125}, 12, 1e-5, 0.75, true};
  const std::vector<RecourseRecord> recs{{0, vec({-1, -2, 1}), res, "ok"}, {3, vec({-3, 1, 1}), std::nullopt, "EmptyFeasibleSet"}};
  const std::string text = recourse_csv(recs, 1);
  const RecoursePairs pairs = parse_recourse_csv(text);
  REQUIRE(pairs.ids.size() == 1);
  CHECK(pairs.ids[0] == 0);
  CHECK(pairs.actions[0].values() == vec({0.5, 0.25, 1}));
  CHECK(pairs.instances[0].values() == vec({-1, -2, 1}));
  CHECK(text.substr(0, text.find('\n')).find("objective") != std::string::npos);

  EvaluationReport rep;
  rep.m1_validity = 1;
  rep.m2_validity = 0.5;
  rep.per_instance.push_back({0, true, 0.5, 1.0, 0.5});
  rep.runtime_seconds = 3;
  const nlohmann::json j = nlohmann::json::parse(to_json(rep).dump());
  CHECK(j.at("m2_validity").get<double>() == 0.5);
  CHECK(!j.contains("runtime_seconds"));
  CHECK(to_json(rep, true).contains("runtime_seconds"));
  CHECK(report_csv(rep) == "index,valid_original,shifted_validity,l1_cost,l2_cost\n0,1,0.5,1,0.5\n");

  const LabeledDataset d{(Matrix(2, 2) << 0.1, 1e-17, -3, 2.5).finished(), {0, 1}};
  const LoadedCsv again = parse_csv(dataset_csv(d));
  CHECK(again.data.features == d.features);
  CHECK(again.data.labels == d.labels);
}

TEST_CASE("sweep rows and trends") {
  const MiniPipeline m = mini_pipeline(50);
  REQUIRE(m.instances.size() == 50);
  RecourseProblem tmpl{FeatureVector(vec({0, 0, 1})), m.belief};
  SolverConfig cfg;
  cfg.restarts = 1;
  cfg.max_iter = 60;

  const auto one = sweep_frontier({m.instances[0]}, tmpl, {1.0}, {0.1}, m.original, m.ensemble, cfg, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].solved + one[0].failed == 1);

  const auto rows = sweep_frontier(m.instances, tmpl, {0.0, 1.0}, {0.0, 0.2}, m.original, m.ensemble, cfg, 1);
  REQUIRE(rows.size() == 4);
  // Rows are ordered with rho varying fastest.
  CHECK(rows[1].rho == 0.2);
  CHECK(rows[2].delta_add == 1.0);
  for (const auto& r : rows) {
    CHECK(r.solved == 50);
    CHECK(r.m1_validity == 1.0);
  }
  CHECK(rows[1].m2_validity >= rows[0].m2_validity);
  CHECK(rows[3].m2_validity >= rows[2].m2_validity);
  CHECK(rows[2].l1_cost >= rows[0].l1_cost);
  CHECK(rows[3].l1_cost >= rows[1].l1_cost);
  CHECK(frontier_csv(rows).rfind("delta_add,rho,", 0) == 0);
}

TEST_CASE("recourse generation records failures per instance") {
  const MiniPipeline m = mini_pipeline(3);
  RecourseProblem tmpl{FeatureVector(vec({0, 0, 1})), m.belief};
  tmpl.actionability.immutable = {0, 1};
  SolverConfig cfg;
  cfg.restarts = 1;
  const auto out = generate_recourses(m.instances, tmpl, 1.0, cfg, 1);
  REQUIRE(out.size() == 3);
  for (const auto& o : out) {
    CHECK(!o.result.has_value());
    CHECK(!o.error.empty());
  }
}

TEST_CASE("command line") {
  const fs::path dir = scratch_dir("cli");
  const std::string cfg = (dir / "small.json").string();
  {
    std::ofstream f(cfg);
    f << R"({"n_per_class": 60, "n_shifts": [2], "shift": "mean", "test_per_class": 20,
             "bootstrap": 10, "trials": 4, "restarts": 1, "max_iter": 40, "workers": 1})";
  }
  const std::string a = (dir / "a").string();
  const std::string b = (dir / "b").string();
  CHECK(run_cli({"synth", "--config", cfg, "--seed", "7", "--out", a}) == 0);
  CHECK(run_cli({"synth", "--config", cfg, "--seed", "7", "--out", b}) == 0);
  for (const char* name : {"original.csv", "test.csv", "shifted_mean_001.csv", "shifted_mean_002.csv"}) {
    CHECK(read_text((fs::path(a) / name).string()) == read_text((fs::path(b) / name).string()));
  }

  const std::string est = (dir / "est").string();
  REQUIRE(run_cli({"estimate", "--config", cfg, "--data", a + "/original.csv", "--out", est}) == 0);
  CHECK(fs::exists(est + "/belief.json"));

  std::string err;
  CHECK(run_cli({"generate", "--config", cfg, "--belief", est + "/belief.json", "--instances", a + "/test.csv",
                 "--classifier", est + "/classifier.json", "--delta-add", "-1", "--out", (dir / "r.csv").string()},
                &err) == 1);
  CHECK(err.find("delta-add") != std::string::npos);

  REQUIRE(run_cli({"generate", "--config", cfg, "--belief", est + "/belief.json", "--instances", a + "/test.csv",
                   "--classifier", est + "/classifier.json", "--out", (dir / "r.csv").string()}) == 0);
  REQUIRE(run_cli({"evaluate", "--config", cfg, "--recourses", (dir / "r.csv").string(), "--classifier",
                   est + "/classifier.json", "--shifted-dir", a, "--out", (dir / "report").string()}) == 0);
  const nlohmann::json report = nlohmann::json::parse(read_text((dir / "report.json").string()));
  CHECK(report.at("m1_validity").get<double>() == 1.0);
  CHECK(report.at("instances").get<int>() > 0);

  CHECK(run_cli({"evaluate", "--recourses", (dir / "r.csv").string(), "--classifier", est + "/classifier.json",
                 "--shifted-dir", a, "--m2-mode", "sideways", "--out", (dir / "x").string()}) == 1);
  CHECK(run_cli({"bogus"}) == 1);
  CHECK(run_cli({"generate", "--belief", (dir / "missing.json").string(), "--instances", a + "/test.csv", "--out",
                 (dir / "r2.csv").string()}) == 2);

  RunConfig rc;
  const auto errors = apply_config(nlohmann::json::parse(R"({"zeta": -1, "nonsense": 3, "cost": "l7"})"), rc);
  CHECK(errors.size() >= 3);
  std::string all;
  for (const auto& e : errors) all += e + "\n";
  CHECK(all.find("zeta") != std::string::npos);
  CHECK(all.find("nonsense") != std::string::npos);
  CHECK(all.find("cost") != std::string::npos);
  fs::remove_all(dir);
}
