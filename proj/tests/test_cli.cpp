#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfband/cli.hpp"
#include "mfband/simgen.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace mfband;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir = fs::temp_directory_path() / ("mfband_cli_test_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(dir); }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

fs::path workdir() {
  static const TempDir tmp;
  return tmp.dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

void write_file(const std::string& name, const std::string& body) {
  std::ofstream(path(name)) << body;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// writes the simulated sample as curves.csv and a scalar covariates.csv,
// plus the held-out test covariates as new.csv
Dataset write_sim_files(std::size_t n, std::uint64_t seed) {
  ScenarioSpec s;
  s.n = n;
  s.rep_seed = seed;
  s.grid_points = 12;
  const SimSample smp = generate(s);
  std::ostringstream curves, cov;
  curves << "curve_id,component,t,value\n";
  cov << "curve_id,w,w2\n";
  for (std::size_t i = 0; i < smp.data.size(); ++i) {
    const std::string id = "c" + std::to_string(i);
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t g = 0; g < smp.data.grid.size(j); ++g)
        curves << id << ',' << j << ',' << num(smp.data.grid.component(j).points[g]) << ','
               << num(smp.data.y[i].values[j][g]) << '\n';
    cov << id << ',' << num(smp.data.x[i].scalar[0]) << ',' << num(smp.data.x[i].scalar[1]) << '\n';
  }
  write_file("curves.csv", curves.str());
  write_file("covariates.csv", cov.str());
  write_file("new.csv", "curve_id,w,w2\nnew0," + num(smp.test_x.scalar[0]) + ',' +
                            num(smp.test_x.scalar[1]) + "\nnew1,0.5,0.25\n");
  return smp.data;
}

const char* kConfig = R"({
  "alpha": 0.1, "mode": "split", "modulation": "sigma", "seed": 17,
  "split": {"strategy": "random", "l": 9},
  "regressor": {"kind": "concurrent_fos", "components": [
     {"intercept": true, "scalar": ["w"]}, {"intercept": true, "scalar": ["w2"]}]}
})";

int run(std::vector<std::string> args) {
  std::vector<const char*> argv = {"mfband"};
  for (auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("curves csv parsing") {
  std::istringstream ok(
      "curve_id,component,t,value\n"
      "a,0,0.0,1\na,0,1.0,2\na,1,0.5,3\na,1,0.0,4\n"
      "b,1,0.0,5\nb,0,1.0,6\nb,0,0.0,7\nb,1,0.5,8\n");
  const CurveTable t = parse_curves_csv(ok, "mem");
  CHECK(t.ids == std::vector<std::string>{"a", "b"});
  CHECK(t.grid.dims() == 2);
  CHECK(t.grid.component(1).points == std::vector<double>{0.0, 0.5});
  CHECK(t.curves[0].values[1] == std::vector<double>{4, 3});
  CHECK(t.curves[1].values[0] == std::vector<double>{7, 6});
}

TEST_CASE("curves csv schema errors name the row") {
  auto err = [](const std::string& body) {
    std::istringstream in(body);
    try {
      parse_curves_csv(in, "f.csv");
    } catch (const SchemaError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(err("id,component,t,value\n").find("row 1") != std::string::npos);
  CHECK(err("curve_id,component,t,value\na,0,0,x\n").find("row 2") != std::string::npos);
  CHECK(err("curve_id,component,t,value\na,0,0,1\na,0,0,2\n").find("duplicate") != std::string::npos);
  CHECK(err("curve_id,component,t,value\na,0,0,1\na,0,1,1\nb,0,0,1\n").find("grid") !=
        std::string::npos);
  CHECK(err("curve_id,component,t,value\na,0,0,1,9\n").find("row 2") != std::string::npos);
  CHECK(err("curve_id,component,t,value\na,-1,0,1\n").find("component") != std::string::npos);
}

TEST_CASE("calibrate writes a bundle that reproduces the in-memory predictor") {
  const Dataset data = write_sim_files(20, 3);
  write_file("config.json", kConfig);
  std::ostringstream log;
  const CalibrateSummary s = cmd_calibrate(path("curves.csv"), {path("covariates.csv")},
                                           path("config.json"), path("bundle.json"), log);
  CHECK(s.l == 9);
  CHECK(s.theoretical_coverage == doctest::Approx(0.9));
  CHECK(log.str().find("k=") != std::string::npos);
  CHECK(log.str().find("theoretical_coverage=0.9") != std::string::npos);

  // same split and model computed directly
  const Split split = random_split(20, 9, 17);
  const BandPredictor direct = calibrate_predictor(
      data, split, covariate_set_spec(1, 1, 2), ModulationKind::sigma, {0.1, ConformalMode::split});
  const ModelBundle loaded = load_bundle(path("bundle.json"));
  CHECK(loaded.predictor.calibration.radius == direct.calibration.radius);
  CHECK(loaded.predictor.modulation.fns == direct.modulation.fns);
  CHECK(loaded.predictor.model.coefficients == direct.model.coefficients);
  CHECK(loaded.predictor.model.grid == data.grid);
  CHECK(loaded.seed == 17);

  // byte-identical rerun
  const std::string first = slurp(path("bundle.json"));
  cmd_calibrate(path("curves.csv"), {path("covariates.csv")}, path("config.json"),
                path("bundle2.json"), log);
  CHECK(slurp(path("bundle2.json")) == first);

  // band output
  cmd_band(path("bundle.json"), {path("new.csv")}, path("band.csv"), false);
  const auto rows = read_band_csv(path("band.csv"));
  CHECK(rows.size() == 2 * 24);
  Covariates x{{0.5, 0.25}, {}};
  const Band b = make_band(direct, x);
  CHECK(rows[24].curve_id == "new1");
  CHECK(rows[24 + 13].lower == b.lower[1][1]);
  CHECK(rows[24 + 13].upper == b.upper[1][1]);
  CHECK(rows[0].closure == Closure::closed);
}

TEST_CASE("bundle json round trip and version check") {
  write_sim_files(20, 4);
  write_file("config.json", kConfig);
  std::ostringstream log;
  const CalibrateSummary s = cmd_calibrate(path("curves.csv"), {path("covariates.csv")},
                                           path("config.json"), path("b.json"), log);
  const auto j = bundle_to_json(s.bundle);
  const ModelBundle back = bundle_from_json(j);
  CHECK(bundle_to_json(back) == j);
  auto bad = j;
  bad["format_version"] = kBundleFormatVersion + 1;
  CHECK_THROWS_WITH_AS(bundle_from_json(bad), doctest::Contains("version"), SchemaError);
  auto missing = j;
  missing.erase("calibration");
  CHECK_THROWS_AS(bundle_from_json(missing), SchemaError);
}

TEST_CASE("parity split reproduces the case-study sizes") {
  write_sim_files(41, 5);
  write_file("parity.json", R"({"alpha": 0.25, "modulation": "sbar", "seed": 1,
      "split": {"strategy": "parity", "l": 19}})");
  std::ostringstream log;
  const CalibrateSummary s = cmd_calibrate(path("curves.csv"), {}, path("parity.json"),
                                           path("p.json"), log);
  CHECK(s.l == 19);
  CHECK(log.str().find("m=22") != std::string::npos);
  CHECK(s.theoretical_coverage == doctest::Approx(0.75));
  CHECK(s.bundle.predictor.calibration.rank == 15);
}

TEST_CASE("explicit split and smoothed mode with a config tau") {
  write_sim_files(10, 6);
  write_file("explicit.json", R"({"alpha": 0.2, "mode": "smoothed", "tau": 0.4,
      "split": {"strategy": "explicit", "train": [0,1,2,3,4], "calib": [5,6,7,8,9]}})");
  std::ostringstream log;
  const CalibrateSummary s = cmd_calibrate(path("curves.csv"), {}, path("explicit.json"),
                                           path("e.json"), log);
  CHECK(s.l == 5);
  CHECK(*s.bundle.predictor.tau == 0.4);
  CHECK(s.bundle.predictor.calibration.rank == 5);  // ceil(5 + .4 - 1.2)
  write_file("overlap.json", R"({"alpha": 0.2,
      "split": {"strategy": "explicit", "train": [0,1,2,3,4], "calib": [4,6,7,8,9]}})");
  CHECK_THROWS_AS(cmd_calibrate(path("curves.csv"), {}, path("overlap.json"), path("e.json"), log),
                  SchemaError);
}

TEST_CASE("functional covariates") {
  const Grid g = Grid::uniform(1, 3);
  write_file("fcov.csv",
             "curve_id,component,t,f\n"
             "a,0,0,1\na,0,0.5,2\na,0,1,3\n"
             "b,0,0,4\nb,0,0.5,5\nb,0,1,6\n");
  write_file("scov.csv", "curve_id,w\nb,0.2\na,0.1\n");
  const CovariateTable t = read_covariates({path("scov.csv"), path("fcov.csv")}, g);
  CHECK(t.ids == std::vector<std::string>{"b", "a"});
  CHECK(t.layout.functional == std::vector<std::string>{"f"});
  CHECK(t.x[0].functional[0].values[0] == std::vector<double>{4, 5, 6});
  CHECK(t.x[1].scalar[0] == 0.1);
  write_file("fbad.csv", "curve_id,component,t,f\na,0,0.25,1\n");
  CHECK_THROWS_WITH_AS(read_covariates({path("fbad.csv")}, g), doctest::Contains("row 2"),
                       SchemaError);
  write_file("fpart.csv", "curve_id,component,t,f\na,0,0,1\n");
  CHECK_THROWS_AS(read_covariates({path("fpart.csv")}, g), SchemaError);
}

TEST_CASE("exit codes") {
  write_sim_files(20, 7);
  write_file("config.json", kConfig);
  CHECK(run({"calibrate", "--curves", path("curves.csv"), "--covariates", path("covariates.csv"),
             "--config", path("config.json"), "--out", path("ok.json")}) == 0);
  CHECK(run({"band", "--bundle", path("ok.json"), "--covariates", path("new.csv"), "--out",
             path("ok.csv"), "--truncate-at-zero"}) == 0);
  for (const auto& row : read_band_csv(path("ok.csv"))) CHECK(row.lower >= 0.0);

  write_file("broken.csv", "curve_id,component,t\n");
  CHECK(run({"calibrate", "--curves", path("broken.csv"), "--config", path("config.json"),
             "--out", path("x.json")}) == 2);
  write_file("tiny_alpha.json", R"({"alpha": 0.05, "split": {"strategy": "random", "l": 9}})");
  CHECK(run({"calibrate", "--curves", path("curves.csv"), "--config", path("tiny_alpha.json"),
             "--out", path("x.json")}) == 3);
  CHECK(run({"band", "--bundle", path("missing.json"), "--out", path("x.csv")}) == 2);
  CHECK(run({"nonsense"}) == 2);
}

TEST_CASE("infeasible alpha explains the bound") {
  write_sim_files(20, 8);
  write_file("tiny_alpha.json", R"({"alpha": 0.05, "split": {"strategy": "random", "l": 9}})");
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(
      cmd_calibrate(path("curves.csv"), {}, path("tiny_alpha.json"), path("x.json"), log),
      doctest::Contains("below 1/(l+1)"), Error);
}

TEST_CASE("study command with run overrides") {
  write_file("study.json", R"({"study": 1, "scenario": 1, "n": 20, "l": 9, "replications": 50,
      "seed": 3, "threads": 1, "runs": [{"modulation": "s0"}, {"modulation": "sbar", "alpha": 0.2}]})");
  const auto reports = cmd_study(path("study.json"), path("report.json"), path("table.csv"));
  REQUIRE(reports.size() == 2);
  CHECK(reports[1].config.alpha == 0.2);
  CHECK(reports[0].config.modulation == ModulationKind::s0);
  const auto j = nlohmann::json::parse(slurp(path("report.json")));
  CHECK(j["runs"].size() == 2);
  CHECK(j["runs"][1]["modulation"] == "sbar");
  CHECK(j["runs"][0]["hits"].get<std::size_t>() == reports[0].hits);
  const std::string table = slurp(path("table.csv"));
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);

  // identical rerun, identical report
  const std::string first = slurp(path("report.json"));
  cmd_study(path("study.json"), path("report.json"), "");
  CHECK(slurp(path("report.json")) == first);

  write_file("bad_study.json", R"({"study": 1, "scenario": 1})");
  CHECK_THROWS_AS(cmd_study(path("bad_study.json"), path("r.json"), ""), SchemaError);
}

TEST_CASE("binary entry point") {
  write_sim_files(20, 9);
  write_file("config.json", kConfig);
  const std::string cmd = std::string(MFBAND_CLI) + " calibrate --curves " + path("curves.csv") +
                          " --covariates " + path("covariates.csv") + " --config " +
                          path("config.json") + " --out " + path("bin.json") + " > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(load_bundle(path("bin.json")).predictor.calib_size == 9);
  const std::string bad = std::string(MFBAND_CLI) + " band --bundle " + path("nope.json") +
                          " --out " + path("x.csv") + " 2> /dev/null";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
