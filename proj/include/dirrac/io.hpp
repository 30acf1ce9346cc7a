#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dirrac/bench.hpp"
#include "dirrac/core.hpp"
#include "dirrac/estimation.hpp"

namespace dirrac {

/// Per-column min-max scaling: normalized = (raw - lo) / span, with span 0
/// for constant columns (which then map to 0).
struct Normalization {
  Vector lo;
  Vector span;

  Vector apply(const Vector& raw) const;
  Vector invert(const Vector& normalized) const;
  Matrix apply_rows(const Matrix& raw) const;
};

struct CsvLoadOptions {
  /// Column holding the label; empty means the file has no label column.
  std::string label_column = "label";
  /// Accept files without the label column (labels are then left empty).
  bool label_optional = false;
  bool normalize = false;
  /// Scaling to apply instead of fitting one from this file.
  std::optional<Normalization> normalization;
};

struct LoadedCsv {
  LabeledDataset data;
  std::vector<std::string> feature_names;
  std::optional<Normalization> normalization;
  std::vector<std::string> warnings;
};

/// Header row, comma separated numeric cells. Labels are numeric; values > 0
/// map to 1 and everything else to 0.
/// Errors: ParseError (ragged row, with line number), MissingLabel,
/// NonNumeric (with line and column), EmptyInput.
LoadedCsv load_csv(const std::string& path, const CsvLoadOptions& options = {});
LoadedCsv parse_csv(const std::string& text, const CsvLoadOptions& options = {},
                    const std::string& source = "<memory>");

/// Shortest-roundtrip-safe rendering (%.17g).
std::string format_number(double value);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

std::string dataset_csv(const LabeledDataset& data, const std::vector<std::string>& feature_names = {});

nlohmann::json to_json(const MixtureBelief& belief);
MixtureBelief belief_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Normalization& norm);
Normalization normalization_from_json(const nlohmann::json& j);

/// Classifier file: {"theta": [...], "normalization": {...}?}.
struct ClassifierFile {
  LinearClassifier classifier;
  std::optional<Normalization> normalization;
};
nlohmann::json to_json(const ClassifierFile& file);
ClassifierFile classifier_from_json(const nlohmann::json& j);

/// One recourse-file row.
struct RecourseRecord {
  std::size_t id = 0;
  Vector instance;
  std::optional<RecourseResult> result;
  std::string status;
};

/// Columns: id, x0_j..., x_j..., [raw_j...], objective, p_k..., stationarity,
/// iterations, converged, delta_min, status. Coordinates exclude the bias.
std::string recourse_csv(const std::vector<RecourseRecord>& records, std::size_t num_components,
                         const std::optional<Normalization>& normalization = std::nullopt);

/// Instances and actions of the solved rows of a recourse file.
struct RecoursePairs {
  std::vector<std::size_t> ids;
  std::vector<FeatureVector> instances;
  std::vector<FeatureVector> actions;
};
RecoursePairs parse_recourse_csv(const std::string& text);

nlohmann::json to_json(const EvaluationReport& report, bool include_timing = false);
std::string report_csv(const EvaluationReport& report);
std::string frontier_csv(const std::vector<SweepRow>& rows);

}  // namespace dirrac
