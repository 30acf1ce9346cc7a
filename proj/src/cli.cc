#include "dirrac/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "dirrac/io.hpp"
#include "dirrac/parallel.hpp"

namespace dirrac {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Seed streams per pipeline stage, derived from the master seed.
enum SeedStream : std::uint64_t {
  kSynthOriginal = 1,
  kSynthTest = 2,
  kSynthShift = 3,
  kBootstrap = 11,
  kClustering = 12,
  kEnsemble = 13,
  kSolver = 14,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Key handlers throw std::string with the reason.
using Handler = std::function<void(const json&, RunConfig&)>;

double number(const json& v) {
  if (!v.is_number()) throw std::string("expected a number");
  return v.get<double>();
}

double positive(const json& v) {
  const double x = number(v);
  if (!(x > 0.0)) throw std::string("must be > 0");
  return x;
}

double nonnegative(const json& v) {
  const double x = number(v);
  if (!(x >= 0.0)) throw std::string("must be >= 0");
  return x;
}

int integer(const json& v, int lo) {
  if (!v.is_number_integer()) throw std::string("expected an integer");
  const auto x = v.get<long long>();
  if (x < lo) throw std::string("must be >= " + std::to_string(lo));
  return static_cast<int>(x);
}

std::string text(const json& v) {
  if (!v.is_string()) throw std::string("expected a string");
  return v.get<std::string>();
}

std::vector<double> number_list(const json& v, bool allow_scalar) {
  if (allow_scalar && v.is_number()) return {v.get<double>()};
  if (!v.is_array() || v.empty()) throw std::string("expected a nonempty list of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(number(e));
  return out;
}

std::vector<std::size_t> index_list(const json& v) {
  if (!v.is_array()) throw std::string("expected a list of indices");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(static_cast<std::size_t>(integer(e, 0)));
  return out;
}

Eigen::Vector2d vec2(const json& v) {
  const auto xs = number_list(v, false);
  if (xs.size() != 2) throw std::string("expected 2 numbers");
  return {xs[0], xs[1]};
}

Eigen::Matrix2d mat2(const json& v) {
  if (!v.is_array() || v.size() != 2) throw std::string("expected a 2x2 matrix");
  Eigen::Matrix2d m;
  m.row(0) = vec2(v[0]).transpose();
  m.row(1) = vec2(v[1]).transpose();
  return m;
}

template <class F>
auto parsed(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw std::string(e.what());
  }
}

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table = {
      {"seed", [](const json& v, RunConfig& c) {
         if (!v.is_number_unsigned()) throw std::string("expected a nonnegative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"workers", [](const json& v, RunConfig& c) { c.workers = static_cast<unsigned>(integer(v, 0)); }},
      {"mode", [](const json& v, RunConfig& c) { c.mode = parsed([&] { return parse_mode(text(v)); }); }},
      {"K", [](const json& v, RunConfig& c) { c.k = integer(v, 1); }},
      {"rho", [](const json& v, RunConfig& c) {
         c.rho = number_list(v, true);
         for (double r : c.rho) {
           if (!(r >= 0.0)) throw std::string("radii must be >= 0");
         }
       }},
      {"delta_add", [](const json& v, RunConfig& c) { c.delta_add = nonnegative(v); }},
      {"margin", [](const json& v, RunConfig& c) { c.margin = positive(v); }},
      {"cost", [](const json& v, RunConfig& c) { c.cost = parsed([&] { return parse_cost(text(v)); }); }},
      {"weight_budget", [](const json& v, RunConfig& c) { c.weight_budget = nonnegative(v); }},
      {"divergence",
       [](const json& v, RunConfig& c) { c.divergence = parsed([&] { return parse_divergence(text(v)); }); }},
      {"immutable", [](const json& v, RunConfig& c) { c.actionability.immutable = index_list(v); }},
      {"non_decreasing", [](const json& v, RunConfig& c) { c.actionability.non_decreasing = index_list(v); }},
      {"box", [](const json& v, RunConfig& c) {
         if (!v.is_array()) throw std::string("expected a list of [index, lo, hi]");
         c.actionability.box.clear();
         for (const auto& e : v) {
           if (!e.is_array() || e.size() != 3) throw std::string("each entry must be [index, lo, hi]");
           const double lo = number(e[1]);
           const double hi = number(e[2]);
           if (lo > hi) throw std::string("box lower bound exceeds upper bound");
           c.actionability.box.push_back({static_cast<std::size_t>(integer(e[0], 0)), lo, hi});
         }
       }},
      {"lambda_ls", [](const json& v, RunConfig& c) {
         const double x = number(v);
         if (!(x > 0.0 && x < 1.0)) throw std::string("must lie in (0, 1)");
         c.solver.lambda_ls = x;
       }},
      {"zeta", [](const json& v, RunConfig& c) { c.solver.zeta = positive(v); }},
      {"max_iter", [](const json& v, RunConfig& c) { c.solver.max_iter = integer(v, 0); }},
      {"station_tol", [](const json& v, RunConfig& c) { c.solver.station_tol = nonnegative(v); }},
      {"max_backtracks", [](const json& v, RunConfig& c) { c.solver.max_backtracks = integer(v, 0); }},
      {"restarts", [](const json& v, RunConfig& c) { c.solver.restarts = integer(v, 1); }},
      {"restart_scale", [](const json& v, RunConfig& c) { c.solver.restart_scale = nonnegative(v); }},
      {"finite_difference", [](const json& v, RunConfig& c) {
         if (!v.is_boolean()) throw std::string("expected true or false");
         c.solver.finite_difference = v.get<bool>();
       }},
      {"label", [](const json& v, RunConfig& c) { c.label = text(v); }},
      {"normalize", [](const json& v, RunConfig& c) {
         if (!v.is_boolean()) throw std::string("expected true or false");
         c.normalize = v.get<bool>();
       }},
      {"bootstrap", [](const json& v, RunConfig& c) { c.bootstrap = integer(v, 2); }},
      {"bootstrap_subsample", [](const json& v, RunConfig& c) {
         const double x = number(v);
         if (!(x > 0.0 && x <= 1.0)) throw std::string("must lie in (0, 1]");
         c.bootstrap_subsample = x;
       }},
      {"l2_reg", [](const json& v, RunConfig& c) { c.logistic.l2_reg = nonnegative(v); }},
      {"max_epochs", [](const json& v, RunConfig& c) { c.logistic.max_epochs = integer(v, 1); }},
      {"jitter", [](const json& v, RunConfig& c) { c.mixture.jitter = positive(v); }},
      {"kmeans_restarts", [](const json& v, RunConfig& c) { c.mixture.restarts = integer(v, 1); }},
      {"mu0", [](const json& v, RunConfig& c) { c.synthetic.mu0 = vec2(v); }},
      {"mu1", [](const json& v, RunConfig& c) { c.synthetic.mu1 = vec2(v); }},
      {"sigma0", [](const json& v, RunConfig& c) { c.synthetic.sigma0 = mat2(v); }},
      {"sigma1", [](const json& v, RunConfig& c) { c.synthetic.sigma1 = mat2(v); }},
      {"n_per_class", [](const json& v, RunConfig& c) { c.synthetic.n_per_class = integer(v, 10); }},
      {"test_per_class", [](const json& v, RunConfig& c) { c.test_per_class = integer(v, 1); }},
      {"shift", [](const json& v, RunConfig& c) {
         const std::string s = text(v);
         if (s != "all") parsed([&] { return parse_shift_kind(s); });
         c.shift = s;
       }},
      {"mu_adapt", [](const json& v, RunConfig& c) { c.synthetic.mu_adapt = number(v); }},
      {"cov_adapt", [](const json& v, RunConfig& c) { c.synthetic.cov_adapt = nonnegative(v); }},
      {"n_shifts", [](const json& v, RunConfig& c) {
         c.n_shifts.clear();
         if (v.is_number()) {
           c.n_shifts.push_back(integer(v, 0));
           return;
         }
         if (!v.is_array() || v.empty()) throw std::string("expected an integer or a list of integers");
         for (const auto& e : v) c.n_shifts.push_back(integer(e, 0));
       }},
      {"trials", [](const json& v, RunConfig& c) { c.ensemble.trials = integer(v, 1); }},
      {"ensemble_subsample", [](const json& v, RunConfig& c) {
         const double x = number(v);
         if (!(x > 0.0 && x <= 1.0)) throw std::string("must lie in (0, 1]");
         c.ensemble.subsample = x;
       }},
      {"m2_mode", [](const json& v, RunConfig& c) { c.ensemble.mode = parsed([&] { return parse_m2_mode(text(v)); }); }},
      {"sweep_delta_add", [](const json& v, RunConfig& c) {
         c.sweep_delta_add = number_list(v, true);
         for (double d : c.sweep_delta_add) {
           if (!(d >= 0.0)) throw std::string("values must be >= 0");
         }
       }},
      {"sweep_rho", [](const json& v, RunConfig& c) {
         c.sweep_rho = number_list(v, true);
         for (double r : c.sweep_rho) {
           if (!(r >= 0.0)) throw std::string("values must be >= 0");
         }
       }},
  };
  return table;
}

std::vector<std::string> cross_checks(const RunConfig& c) {
  std::vector<std::string> errors;
  if (c.rho.size() != 1 && c.rho.size() != static_cast<std::size_t>(c.k)) {
    errors.push_back("key 'rho': needs 1 or K = " + std::to_string(c.k) + " entries");
  }
  if (c.shift == "all" && c.n_shifts.size() != 3 && c.n_shifts.size() != 1) {
    errors.push_back("key 'n_shifts': with shift 'all' give 1 or 3 counts");
  }
  if (c.shift != "all" && c.n_shifts.size() != 1) {
    errors.push_back("key 'n_shifts': a single shift kind takes one count");
  }
  return errors;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig config;
  if (!path.empty()) {
    json j;
    try {
      j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
      throw UsageError("config " + path + ": not valid JSON (" + e.what() + ")");
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    const auto errors = apply_config(j, config);
    if (!errors.empty()) {
      std::string msg = "config " + path + " has " + std::to_string(errors.size()) + " problem(s):";
      for (const auto& e : errors) msg += "\n  " + e;
      throw UsageError(msg);
    }
  }
  if (seed) config.seed = *seed;
  return config;
}

MixtureBelief with_radii(MixtureBelief belief, const std::vector<double>& rho) {
  for (std::size_t k = 0; k < belief.size(); ++k) {
    belief.components[k].radius = rho.size() == 1 ? rho.front() : rho.at(k);
  }
  return belief;
}

RecourseProblem problem_template(const RunConfig& c, const MixtureBelief& belief) {
  Vector x0 = Vector::Ones(belief.dim());
  return {FeatureVector(x0), belief, 0.0, c.margin, c.cost, c.actionability, c.mode, c.weight_budget,
          c.divergence};
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

std::vector<std::string> shifted_files(const std::vector<std::string>& files, const std::string& dir) {
  std::vector<std::string> out = files;
  if (!dir.empty()) {
    std::vector<std::string> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("shifted_", 0) == 0 && entry.path().extension() == ".csv") found.push_back(entry.path().string());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  if (out.empty()) throw UsageError("no shifted datasets given (--shifted or --shifted-dir)");
  return out;
}

struct EnsembleInputs {
  std::vector<std::string> files;
  std::string dir;
  std::string original;
};

ShiftEnsemble ensemble_from(const EnsembleInputs& in, const RunConfig& c,
                            const std::optional<Normalization>& norm, std::ostream& err) {
  CsvLoadOptions opts;
  opts.label_column = c.label;
  opts.normalization = norm;
  std::vector<LabeledDataset> shifted;
  for (const auto& f : shifted_files(in.files, in.dir)) shifted.push_back(load_csv(f, opts).data);
  LabeledDataset original;
  if (c.ensemble.mode == M2Mode::kConcat) {
    if (in.original.empty()) throw UsageError("m2_mode 'concat' needs --original");
    original = load_csv(in.original, opts).data;
  }
  EnsembleOptions eo = c.ensemble;
  eo.seed = derive_seed(c.seed, kEnsemble);
  eo.workers = c.workers;
  eo.logistic = c.logistic;
  err << "training " << eo.trials << " shifted classifiers on " << shifted.size() << " dataset(s)\n";
  return build_shift_ensemble(shifted, original, eo);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// ---- subcommands ----

int run_synth(const RunConfig& c, const std::string& out_dir, std::ostream& out) {
  fs::create_directories(out_dir);
  SyntheticConfig base = c.synthetic;
  base.n_shifts = 0;
  base.seed = derive_seed(c.seed, kSynthOriginal);
  write_text((fs::path(out_dir) / "original.csv").string(), dataset_csv(generate_synthetic(base).original));

  SyntheticConfig test = base;
  test.n_per_class = c.test_per_class < 10 ? 10 : c.test_per_class;
  test.seed = derive_seed(c.seed, kSynthTest);
  write_text((fs::path(out_dir) / "test.csv").string(), dataset_csv(generate_synthetic(test).original));

  std::vector<ShiftKind> kinds;
  if (c.shift == "all") {
    kinds = {ShiftKind::kMean, ShiftKind::kCov, ShiftKind::kBoth};
  } else {
    kinds = {parse_shift_kind(c.shift)};
  }
  std::size_t written = 0;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    SyntheticConfig sc = c.synthetic;
    sc.shift = kinds[k];
    sc.n_shifts = c.n_shifts.size() == 1 ? c.n_shifts.front() : c.n_shifts[k];
    sc.seed = derive_seed(derive_seed(c.seed, kSynthShift), k);
    const SyntheticData data = generate_synthetic(sc);
    for (std::size_t i = 0; i < data.shifted.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "shifted_%s_%03zu.csv", std::string(to_string(kinds[k])).c_str(), i + 1);
      write_text((fs::path(out_dir) / name).string(), dataset_csv(data.shifted[i]));
      ++written;
    }
  }
  out << "wrote original.csv, test.csv and " << written << " shifted datasets to " << out_dir << "\n";
  return 0;
}

int run_estimate(const RunConfig& c, const std::string& data_path, const std::string& out_dir, int elbow,
                 std::ostream& out, std::ostream& err) {
  CsvLoadOptions opts;
  opts.label_column = c.label;
  opts.normalize = c.normalize;
  const LoadedCsv loaded = load_csv(data_path, opts);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";

  const LogisticFit full = train_logistic(loaded.data, c.logistic);
  if (!full.converged) err << "warning: full-data classifier stopped at gradient norm " << full.grad_norm << "\n";

  BootstrapOptions bo;
  bo.count = c.bootstrap;
  bo.subsample = c.bootstrap_subsample;
  bo.seed = derive_seed(c.seed, kBootstrap);
  bo.workers = c.workers;
  bo.logistic = c.logistic;
  const ParameterSample sample = bootstrap_parameters(loaded.data, bo);
  MixtureFitOptions mo = c.mixture;
  mo.seed = derive_seed(c.seed, kClustering);
  const MixtureBelief belief = with_radii(fit_mixture_moments(sample, c.k, mo), c.rho);

  fs::create_directories(out_dir);
  json bj = to_json(belief);
  if (loaded.normalization) bj["normalization"] = to_json(*loaded.normalization);
  write_text((fs::path(out_dir) / "belief.json").string(), bj.dump(2) + "\n");
  write_text((fs::path(out_dir) / "classifier.json").string(),
             to_json(ClassifierFile{full.classifier, loaded.normalization}).dump(2) + "\n");
  if (elbow > 0) {
    const auto wcss = elbow_wcss(sample, elbow, mo);
    std::string csv = "k,wcss\n";
    for (std::size_t k = 0; k < wcss.size(); ++k) csv += std::to_string(k + 1) + "," + format_number(wcss[k]) + "\n";
    write_text((fs::path(out_dir) / "elbow.csv").string(), csv);
  }
  out << "fitted " << c.k << " component(s) from " << sample.thetas.size() << " bootstrap classifiers; wrote "
      << out_dir << "/belief.json and classifier.json\n";
  return 0;
}

struct Instances {
  std::vector<std::size_t> ids;
  std::vector<FeatureVector> points;
};

Instances load_instances(const RunConfig& c, const std::string& path, const std::optional<Normalization>& norm,
                         const std::optional<LinearClassifier>& filter) {
  CsvLoadOptions opts;
  opts.label_column = c.label;
  opts.label_optional = true;
  opts.normalization = norm;
  const LoadedCsv loaded = load_csv(path, opts);
  Instances out;
  for (Eigen::Index r = 0; r < loaded.data.features.rows(); ++r) {
    FeatureVector x = FeatureVector::from_features(loaded.data.features.row(r).transpose());
    if (filter && filter->favorable(x.values())) continue;
    out.ids.push_back(static_cast<std::size_t>(r));
    out.points.push_back(std::move(x));
  }
  if (out.points.empty()) throw Error(ErrorCode::kEmptyInput, path + ": no instances to explain");
  return out;
}

struct BeliefFile {
  MixtureBelief belief;
  std::optional<Normalization> normalization;
};

BeliefFile load_belief(const std::string& path) {
  const json j = read_json(path);
  BeliefFile f{belief_from_json(j), std::nullopt};
  if (j.contains("normalization")) f.normalization = normalization_from_json(j.at("normalization"));
  return f;
}

int run_generate(const RunConfig& c, const std::string& belief_path, const std::string& instances_path,
                 const std::string& classifier_path, bool all_instances, const std::string& out_path,
                 std::ostream& out) {
  BeliefFile bf = load_belief(belief_path);
  std::optional<LinearClassifier> filter;
  if (!classifier_path.empty() && !all_instances) filter = classifier_from_json(read_json(classifier_path)).classifier;
  const Instances inst = load_instances(c, instances_path, bf.normalization, filter);

  SolverConfig solver = c.solver;
  solver.seed = derive_seed(c.seed, kSolver);
  const auto outcomes =
      generate_recourses(inst.points, problem_template(c, bf.belief), c.delta_add, solver, c.workers);

  std::vector<RecourseRecord> records;
  std::size_t solved = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    RecourseRecord rec{inst.ids[i], inst.points[i].values(), outcomes[i].result, outcomes[i].error};
    if (rec.result) {
      ++solved;
      rec.status = outcomes[i].status == DescentStatus::kStationary ? "stationary"
                   : outcomes[i].status == DescentStatus::kMaxIter  ? "max_iter"
                                                                    : "line_search_stalled";
    }
    records.push_back(std::move(rec));
  }
  ensure_parent(out_path);
  write_text(out_path, recourse_csv(records, bf.belief.size(), bf.normalization));
  out << "solved " << solved << " of " << records.size() << " instances; wrote " << out_path << "\n";
  return solved == records.size() ? 0 : 2;
}

LinearClassifier nominal_classifier(const MixtureBelief& belief) {
  Vector theta = Vector::Zero(belief.dim());
  for (std::size_t k = 0; k < belief.size(); ++k) theta += belief.weights[k] * belief.components[k].mean;
  return {theta};
}

struct Reference {
  LinearClassifier classifier;
  std::optional<Normalization> normalization;
};

Reference reference_from(const std::string& classifier_path, const std::string& belief_path) {
  if (!classifier_path.empty() == !belief_path.empty()) {
    throw UsageError("give exactly one of --classifier or --belief as the reference model");
  }
  if (!classifier_path.empty()) {
    ClassifierFile f = classifier_from_json(read_json(classifier_path));
    return {f.classifier, f.normalization};
  }
  BeliefFile bf = load_belief(belief_path);
  return {nominal_classifier(bf.belief), bf.normalization};
}

int run_evaluate(const RunConfig& c, const std::string& recourse_path, const Reference& ref,
                 const EnsembleInputs& ens_in, const std::string& out_prefix, bool timing, std::ostream& out,
                 std::ostream& err) {
  const RecoursePairs pairs = parse_recourse_csv(read_text(recourse_path));
  if (pairs.actions.empty()) throw Error(ErrorCode::kEmptyInput, recourse_path + ": no solved recourses");
  const ShiftEnsemble ensemble = ensemble_from(ens_in, c, ref.normalization, err);
  EvaluationReport report = evaluate(pairs.actions, pairs.instances, ref.classifier, ensemble);
  for (std::size_t i = 0; i < report.per_instance.size(); ++i) report.per_instance[i].index = pairs.ids[i];
  ensure_parent(out_prefix);
  json j = to_json(report, timing);
  j["ensemble_size"] = ensemble.classifiers.size();
  j["m2_mode"] = std::string(to_string(c.ensemble.mode));
  write_text(out_prefix + ".json", j.dump(2) + "\n");
  write_text(out_prefix + ".csv", report_csv(report));
  out << "M1 " << format_number(report.m1_validity) << "  M2 " << format_number(report.m2_validity) << "  l1 "
      << format_number(report.l1_cost) << "  l2 " << format_number(report.l2_cost) << "\n";
  return 0;
}

int run_sweep(const RunConfig& c, const std::string& belief_path, const std::string& instances_path,
              const Reference& ref, const EnsembleInputs& ens_in, const std::string& out_path, std::ostream& out,
              std::ostream& err) {
  BeliefFile bf = load_belief(belief_path);
  const Instances inst = load_instances(c, instances_path, bf.normalization, ref.classifier);
  const ShiftEnsemble ensemble = ensemble_from(ens_in, c, ref.normalization, err);
  SolverConfig solver = c.solver;
  solver.seed = derive_seed(c.seed, kSolver);
  const auto rows = sweep_frontier(inst.points, problem_template(c, bf.belief), c.sweep_delta_add, c.sweep_rho,
                                   ref.classifier, ensemble, solver, c.workers);
  ensure_parent(out_path);
  write_text(out_path, frontier_csv(rows));
  out << "wrote " << rows.size() << " frontier rows to " << out_path << "\n";
  return 0;
}

}  // namespace

std::vector<std::string> apply_config(const json& j, RunConfig& config) {
  std::vector<std::string> errors;
  if (!j.is_object()) return {"config must be a JSON object of key/value pairs"};
  for (const auto& [key, value] : j.items()) {
    const auto it = handlers().find(key);
    if (it == handlers().end()) {
      errors.push_back("key '" + key + "': unknown key");
      continue;
    }
    try {
      it->second(value, config);
    } catch (const std::string& why) {
      errors.push_back("key '" + key + "': " + why);
    }
  }
  if (errors.empty()) errors = cross_checks(config);
  return errors;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributionally robust recourse for linear classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
  };

  std::string out_path;
  std::string data_path;
  std::string belief_path;
  std::string instances_path;
  std::string classifier_path;
  std::string recourse_path;
  std::optional<double> delta_add;
  bool all_instances = false;
  bool timing = false;
  int elbow = 0;
  std::string m2_mode;
  EnsembleInputs ens_in;

  auto* synth = app.add_subcommand("synth", "write the synthetic original, test and shifted datasets");
  common(synth);
  synth->add_option("--out", out_path, "output directory")->required();

  auto* estimate = app.add_subcommand("estimate", "bootstrap classifiers and fit the mixture belief");
  common(estimate);
  estimate->add_option("--data", data_path, "training CSV")->required();
  estimate->add_option("--out", out_path, "output directory")->required();
  estimate->add_option("--elbow", elbow, "also write within-cluster sums of squares for K = 1..N");

  auto* generate = app.add_subcommand("generate", "compute robust recourses for instances");
  common(generate);
  generate->add_option("--belief", belief_path, "belief JSON")->required();
  generate->add_option("--instances", instances_path, "instances CSV")->required();
  generate->add_option("--classifier", classifier_path, "only explain instances this classifier rejects");
  generate->add_flag("--all-instances", all_instances, "explain every row even with --classifier");
  generate->add_option("--delta-add", delta_add, "budget above delta_min (overrides the config)");
  generate->add_option("--out", out_path, "recourse CSV")->required();

  const auto ensemble_opts = [&](CLI::App* sub) {
    sub->add_option("--shifted", ens_in.files, "shifted dataset CSVs");
    sub->add_option("--shifted-dir", ens_in.dir, "directory of shifted_*.csv files");
    sub->add_option("--original", ens_in.original, "original data (m2_mode concat)");
    sub->add_option("--classifier", classifier_path, "reference classifier JSON");
    sub->add_option("--m2-mode", m2_mode, "shifted-only or concat (overrides the config)");
  };

  auto* evaluate_cmd = app.add_subcommand("evaluate", "M1/M2 validity and costs of a recourse file");
  common(evaluate_cmd);
  evaluate_cmd->add_option("--recourses", recourse_path, "recourse CSV")->required();
  ensemble_opts(evaluate_cmd);
  evaluate_cmd->add_option("--belief", belief_path, "use the belief's mean as reference classifier");
  evaluate_cmd->add_flag("--timing", timing, "include runtime in the JSON report");
  evaluate_cmd->add_option("--out", out_path, "report path prefix (.json and .csv are added)")->required();

  auto* sweep = app.add_subcommand("sweep", "cost/validity frontier over delta_add and rho");
  common(sweep);
  sweep->add_option("--belief", belief_path, "belief JSON")->required();
  sweep->add_option("--instances", instances_path, "instances CSV")->required();
  ensemble_opts(sweep);
  sweep->add_option("--out", out_path, "frontier CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    RunConfig config = load_config(config_path, seed);
    if (delta_add) {
      if (!(*delta_add >= 0.0)) throw UsageError("--delta-add must be >= 0");
      config.delta_add = *delta_add;
    }
    if (!m2_mode.empty()) {
      try {
        config.ensemble.mode = parse_m2_mode(m2_mode);
      } catch (const Error& e) {
        throw UsageError(std::string("--m2-mode: ") + e.what());
      }
    }
    if (*synth) return run_synth(config, out_path, out);
    if (*estimate) return run_estimate(config, data_path, out_path, elbow, out, err);
    if (*generate) {
      return run_generate(config, belief_path, instances_path, classifier_path, all_instances, out_path, out);
    }
    if (*evaluate_cmd) {
      const Reference ref = reference_from(classifier_path, belief_path);
      return run_evaluate(config, recourse_path, ref, ens_in, out_path, timing, out, err);
    }
    if (*sweep) {
      if (classifier_path.empty()) throw UsageError("sweep needs --classifier");
      const Reference ref = reference_from(classifier_path, "");
      return run_sweep(config, belief_path, instances_path, ref, ens_in, out_path, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace dirrac
