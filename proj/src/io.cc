#include "dirrac/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dirrac {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i < line.size() && line[i] == '"') quoted = !quoted;
    if (i == line.size() || (line[i] == ',' && !quoted)) {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::optional<double> to_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool blank(const std::string& line) { return trim(line).empty(); }

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::kNonNumeric, what + " has a non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kParseError, std::string("missing key '") + key + "'");
  }
  return j.at(key);
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
  return out;
}

}  // namespace

Vector Normalization::apply(const Vector& raw) const {
  Vector out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) out(i) = span(i) > 0.0 ? (raw(i) - lo(i)) / span(i) : 0.0;
  return out;
}

Vector Normalization::invert(const Vector& normalized) const {
  return lo + normalized.cwiseProduct(span);
}

Matrix Normalization::apply_rows(const Matrix& raw) const {
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) out.row(r) = apply(raw.row(r).transpose()).transpose();
  return out;
}

LoadedCsv parse_csv(const std::string& text, const CsvLoadOptions& options, const std::string& source) {
  const std::vector<std::string> lines = lines_of(text);
  std::size_t header_line = 0;
  while (header_line < lines.size() && blank(lines[header_line])) ++header_line;
  if (header_line == lines.size()) throw Error(ErrorCode::kEmptyInput, source + ": no header row");
  const std::vector<std::string> header = split_fields(lines[header_line]);

  std::optional<std::size_t> label_col;
  if (!options.label_column.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == options.label_column) label_col = c;
    }
    if (!label_col && !options.label_optional) {
      throw Error(ErrorCode::kMissingLabel, source + ": no column named '" + options.label_column + "'");
    }
  }
  LoadedCsv out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!label_col || c != *label_col) out.feature_names.push_back(header[c]);
  }
  if (out.feature_names.empty()) throw Error(ErrorCode::kParseError, source + ": no feature columns");

  std::vector<std::vector<double>> rows;
  for (std::size_t l = header_line + 1; l < lines.size(); ++l) {
    if (blank(lines[l])) continue;
    const std::vector<std::string> cells = split_fields(lines[l]);
    const std::string where = source + ":" + std::to_string(l + 1);
    if (cells.size() != header.size()) {
      std::ostringstream os;
      os << where << ": expected " << header.size() << " fields, found " << cells.size();
      throw Error(ErrorCode::kParseError, os.str());
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = to_number(cells[c]);
      if (label_col && c == *label_col) {
        if (cells[c].empty()) throw Error(ErrorCode::kMissingLabel, where + ": empty label");
        if (!value) throw Error(ErrorCode::kNonNumeric, where + ": label '" + cells[c] + "' is not numeric");
        out.data.labels.push_back(*value > 0.0 ? 1 : 0);
        continue;
      }
      if (!value) {
        throw Error(ErrorCode::kNonNumeric, where + ": column '" + header[c] + "' value '" + cells[c] +
                                                "' is not numeric");
      }
      row.push_back(*value);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyInput, source + ": no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(out.feature_names.size());
  Matrix features(n, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) features(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  if (options.normalization) {
    if (options.normalization->lo.size() != p) {
      throw Error(ErrorCode::kDimensionMismatch, source + ": stored normalization has a different column count");
    }
    out.normalization = options.normalization;
  } else if (options.normalize) {
    Normalization norm{features.colwise().minCoeff().transpose(), Vector(p)};
    norm.span = features.colwise().maxCoeff().transpose() - norm.lo;
    for (Eigen::Index c = 0; c < p; ++c) {
      if (norm.span(c) == 0.0) {
        out.warnings.push_back(source + ": column '" + out.feature_names[static_cast<std::size_t>(c)] +
                               "' is constant and normalizes to 0");
      }
    }
    out.normalization = norm;
  }
  out.data.features = out.normalization ? out.normalization->apply_rows(features) : features;
  return out;
}

LoadedCsv load_csv(const std::string& path, const CsvLoadOptions& options) {
  return parse_csv(read_text(path), options, path);
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kInvalidArgument, "failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_csv(const LabeledDataset& data, const std::vector<std::string>& feature_names) {
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
    header.push_back(static_cast<std::size_t>(c) < feature_names.size() ? feature_names[static_cast<std::size_t>(c)]
                                                                        : "x" + std::to_string(c));
  }
  header.push_back("label");
  std::string out = join(header);
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    std::vector<std::string> cells;
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) cells.push_back(format_number(data.features(r, c)));
    cells.push_back(std::to_string(data.labels[static_cast<std::size_t>(r)]));
    out += join(cells);
  }
  return out;
}

json to_json(const MixtureBelief& belief) {
  json comps = json::array();
  for (const auto& c : belief.components) {
    json cov = json::array();
    for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) cov.push_back(vector_json(c.covariance.row(r).transpose()));
    comps.push_back({{"mean", vector_json(c.mean)}, {"covariance", cov}, {"radius", c.radius}});
  }
  return {{"weights", belief.weights}, {"components", comps}};
}

MixtureBelief belief_from_json(const json& j) {
  MixtureBelief belief;
  const Vector w = vector_from_json(field(j, "weights"), "weights");
  belief.weights.assign(w.data(), w.data() + w.size());
  const json& comps = field(j, "components");
  if (!comps.is_array()) throw Error(ErrorCode::kParseError, "components must be an array");
  for (const auto& c : comps) {
    ComponentMoments comp;
    comp.mean = vector_from_json(field(c, "mean"), "mean");
    const json& cov = field(c, "covariance");
    if (!cov.is_array()) throw Error(ErrorCode::kParseError, "covariance must be an array of rows");
    comp.covariance.resize(static_cast<Eigen::Index>(cov.size()), comp.mean.size());
    for (std::size_t r = 0; r < cov.size(); ++r) {
      const Vector row = vector_from_json(cov[r], "covariance row");
      if (row.size() != comp.mean.size()) throw Error(ErrorCode::kDimensionMismatch, "covariance row length");
      comp.covariance.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    const json& radius = field(c, "radius");
    if (!radius.is_number()) throw Error(ErrorCode::kNonNumeric, "radius must be a number");
    comp.radius = radius.get<double>();
    belief.components.push_back(std::move(comp));
  }
  validate(belief);
  return belief;
}

json to_json(const Normalization& norm) { return {{"lo", vector_json(norm.lo)}, {"span", vector_json(norm.span)}}; }

Normalization normalization_from_json(const json& j) {
  Normalization norm{vector_from_json(field(j, "lo"), "normalization.lo"),
                     vector_from_json(field(j, "span"), "normalization.span")};
  if (norm.lo.size() != norm.span.size()) throw Error(ErrorCode::kDimensionMismatch, "normalization lengths");
  return norm;
}

json to_json(const ClassifierFile& file) {
  json j = {{"theta", vector_json(file.classifier.theta)}};
  if (file.normalization) j["normalization"] = to_json(*file.normalization);
  return j;
}

ClassifierFile classifier_from_json(const json& j) {
  ClassifierFile file;
  file.classifier.theta = vector_from_json(field(j, "theta"), "theta");
  validate(file.classifier);
  if (j.contains("normalization")) file.normalization = normalization_from_json(j.at("normalization"));
  return file;
}

std::string recourse_csv(const std::vector<RecourseRecord>& records, std::size_t num_components,
                         const std::optional<Normalization>& normalization) {
  const Eigen::Index p = records.empty() ? 0 : records.front().instance.size() - 1;
  std::vector<std::string> header{"id"};
  for (Eigen::Index j = 0; j < p; ++j) header.push_back("x0_" + std::to_string(j));
  for (Eigen::Index j = 0; j < p; ++j) header.push_back("x_" + std::to_string(j));
  if (normalization) {
    for (Eigen::Index j = 0; j < p; ++j) header.push_back("raw_x_" + std::to_string(j));
  }
  header.push_back("objective");
  for (std::size_t k = 0; k < num_components; ++k) header.push_back("p_" + std::to_string(k));
  for (const char* h : {"stationarity", "iterations", "converged", "delta_min", "status"}) header.push_back(h);
  std::string out = join(header);

  for (const auto& rec : records) {
    std::vector<std::string> cells{std::to_string(rec.id)};
    for (Eigen::Index j = 0; j < p; ++j) cells.push_back(format_number(rec.instance(j)));
    if (rec.result) {
      const Vector& x = rec.result->action.values();
      for (Eigen::Index j = 0; j < p; ++j) cells.push_back(format_number(x(j)));
      if (normalization) {
        const Vector raw = normalization->invert(x.head(p));
        for (Eigen::Index j = 0; j < p; ++j) cells.push_back(format_number(raw(j)));
      }
      cells.push_back(format_number(rec.result->objective));
      for (std::size_t k = 0; k < num_components; ++k) {
        cells.push_back(k < rec.result->component_probs.size() ? format_number(rec.result->component_probs[k]) : "");
      }
      cells.push_back(format_number(rec.result->stationarity));
      cells.push_back(std::to_string(rec.result->iterations));
      cells.push_back(rec.result->converged ? "1" : "0");
      cells.push_back(format_number(rec.result->delta_min));
    } else {
      const std::size_t blanks = static_cast<std::size_t>(p) * (normalization ? 2 : 1) + 1 + num_components + 4;
      cells.insert(cells.end(), blanks, "");
    }
    std::string status = rec.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    cells.push_back(status);
    out += join(cells);
  }
  return out;
}

RecoursePairs parse_recourse_csv(const std::string& text) {
  const std::vector<std::string> lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::kEmptyInput, "recourse file is empty");
  const std::vector<std::string> header = split_fields(lines.front());
  std::vector<std::size_t> x0_cols;
  std::vector<std::size_t> x_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("x0_", 0) == 0) x0_cols.push_back(c);
    if (header[c].rfind("x_", 0) == 0) x_cols.push_back(c);
  }
  if (header.empty() || header.front() != "id" || x0_cols.empty() || x0_cols.size() != x_cols.size()) {
    throw Error(ErrorCode::kParseError, "recourse file header is not recognized");
  }
  RecoursePairs out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (blank(lines[l])) continue;
    const std::vector<std::string> cells = split_fields(lines[l]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParseError, "recourse file line " + std::to_string(l + 1) + ": wrong field count");
    }
    if (cells[x_cols.front()].empty()) continue;
    const auto read = [&](const std::vector<std::size_t>& cols) {
      Vector v(static_cast<Eigen::Index>(cols.size()) + 1);
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto value = to_number(cells[cols[j]]);
        if (!value) throw Error(ErrorCode::kNonNumeric, "recourse file line " + std::to_string(l + 1));
        v(static_cast<Eigen::Index>(j)) = *value;
      }
      v(v.size() - 1) = 1.0;
      return FeatureVector(v);
    };
    const auto id = to_number(cells.front());
    if (!id) throw Error(ErrorCode::kNonNumeric, "recourse file line " + std::to_string(l + 1) + ": id");
    out.ids.push_back(static_cast<std::size_t>(*id));
    out.instances.push_back(read(x0_cols));
    out.actions.push_back(read(x_cols));
  }
  return out;
}

json to_json(const EvaluationReport& report, bool include_timing) {
  json rows = json::array();
  for (const auto& r : report.per_instance) {
    rows.push_back({{"index", r.index},
                    {"valid_original", r.valid_original},
                    {"shifted_validity", r.shifted_validity},
                    {"l1_cost", r.l1_cost},
                    {"l2_cost", r.l2_cost}});
  }
  json j = {{"m1_validity", report.m1_validity},
            {"m2_validity", report.m2_validity},
            {"l1_cost", report.l1_cost},
            {"l2_cost", report.l2_cost},
            {"instances", report.per_instance.size()},
            {"per_instance", rows}};
  if (include_timing) j["runtime_seconds"] = report.runtime_seconds;
  return j;
}

std::string report_csv(const EvaluationReport& report) {
  std::string out = "index,valid_original,shifted_validity,l1_cost,l2_cost\n";
  for (const auto& r : report.per_instance) {
    out += join({std::to_string(r.index), r.valid_original ? "1" : "0", format_number(r.shifted_validity),
                 format_number(r.l1_cost), format_number(r.l2_cost)});
  }
  return out;
}

std::string frontier_csv(const std::vector<SweepRow>& rows) {
  std::string out = "delta_add,rho,solved,failed,l1_cost,l2_cost,m1_validity,m2_validity,error\n";
  for (const auto& r : rows) {
    std::string error = r.first_error;
    for (char& ch : error) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    out += join({format_number(r.delta_add), format_number(r.rho), std::to_string(r.solved),
                 std::to_string(r.failed), format_number(r.l1_cost), format_number(r.l2_cost),
                 format_number(r.m1_validity), format_number(r.m2_validity), error});
  }
  return out;
}

}  // namespace dirrac
