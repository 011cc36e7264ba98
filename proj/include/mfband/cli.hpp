#pragma once

#include "mfband/conformal.hpp"
#include "mfband/harness.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mfband {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

// Long-format response curves: curve_id,component,t,value.
struct CurveTable {
  Grid grid;
  std::vector<std::string> ids;  // order of first appearance
  std::vector<MFCurve> curves;
};

CurveTable read_curves_csv(const std::string& path);
CurveTable parse_curves_csv(std::istream& in, const std::string& name);

// Scalar files have header curve_id,<name>...; functional files have header
// curve_id,component,t,<name>... with t matching the response grid.
struct CovariateTable {
  CovariateLayout layout;
  std::vector<std::string> ids;
  std::vector<Covariates> x;
};

// With `order` set, the result follows that id order and every id must be
// present; otherwise ids follow the first file.
CovariateTable read_covariates(const std::vector<std::string>& paths, const Grid& grid,
                               const std::vector<std::string>* order = nullptr);

struct ModelBundle {
  BandPredictor predictor;
  std::uint64_t seed = 0;
  std::string created_by;
};

nlohmann::json bundle_to_json(const ModelBundle& bundle);
// Throws SchemaError on missing fields or a format version mismatch.
ModelBundle bundle_from_json(const nlohmann::json& j);
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

struct BandRow {
  std::string curve_id;
  std::size_t component = 0;
  double t = 0.0;
  bool infinite = false;
  double lower = 0.0;
  double upper = 0.0;
  Closure closure = Closure::closed;
};

void write_band_csv(std::ostream& out, const std::vector<std::string>& ids,
                    const std::vector<Band>& bands, const Grid& grid);
std::vector<BandRow> read_band_csv(const std::string& path);

// Parses calibrate-config JSON against a dataset: split, regressor,
// modulation and trim settings.
struct CalibrationPlan {
  Split split;
  RegressorSpec regressor;
  ModulationKind modulation = ModulationKind::s0;
  TrimConfig trim;
  std::uint64_t seed = 0;
};
CalibrationPlan plan_from_json(const nlohmann::json& config, const Dataset& data);

struct CalibrateSummary {
  ModelBundle bundle;
  std::size_t l = 0;
  double theoretical_coverage = 0.0;
};

CalibrateSummary cmd_calibrate(const std::string& curves_path,
                               const std::vector<std::string>& covariate_paths,
                               const std::string& config_path, const std::string& out_path,
                               std::ostream& log);
void cmd_band(const std::string& bundle_path, const std::vector<std::string>& covariate_paths,
              const std::string& out_path, bool truncate);
std::vector<StudyReport> cmd_study(const std::string& config_path, const std::string& report_path,
                                   const std::string& table_path);

StudyConfig study_config_from_json(const nlohmann::json& j);
// Expands an optional "runs" array of overrides on top of the base object.
std::vector<StudyConfig> study_configs_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const StudyReport& report);
void write_study_table(std::ostream& out, const std::vector<StudyReport>& reports);

// Full command-line entry point; returns the process exit code
// (0 success, 2 schema error, 3 numeric/configuration error).
int run_cli(int argc, const char* const* argv);

}  // namespace mfband
